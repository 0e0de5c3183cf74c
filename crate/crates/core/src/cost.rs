//! Trajectory costs: quadratic tracking, collision indicator and barrier
//! penalties.
//!
//! A trajectory `x_0..x_K` costs
//! `sum_{k=1..K} stage(x_k) + collision(x_k) + barrier_penalty(x_{k-1} -> x_k)`.
//! There is no separate terminal term.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cbf::{descent_residual, BarrierFunction, Heuristic};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("dimension mismatch: weights {weights}, target {target}, state {state}")]
    Dimension {
        weights: usize,
        target: usize,
        state: usize,
    },
    #[error("invalid cost parameter: {0}")]
    Invalid(String),
}

/// `(x - x_g)^T diag(Q) (x - x_g)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticCost {
    pub weights: Vec<f64>,
    pub target: Vec<f64>,
}

impl QuadraticCost {
    pub fn new(weights: Vec<f64>, target: Vec<f64>) -> Result<Self, CostError> {
        let c = Self { weights, target };
        c.validate()?;
        Ok(c)
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            target: vec![0.0; dim],
        }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        if self.weights.len() != self.target.len() {
            return Err(CostError::Dimension {
                weights: self.weights.len(),
                target: self.target.len(),
                state: self.target.len(),
            });
        }
        if self.weights.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(CostError::Invalid(
                "state weights must be finite and >= 0".into(),
            ));
        }
        if self.target.iter().any(|t| !t.is_finite()) {
            return Err(CostError::Invalid("target state must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn stage(&self, x: &[f64]) -> Result<f64, CostError> {
        if x.len() != self.weights.len() {
            return Err(CostError::Dimension {
                weights: self.weights.len(),
                target: self.target.len(),
                state: x.len(),
            });
        }
        Ok(self.eval(x))
    }

    /// Unchecked variant of [`QuadraticCost::stage`] for hot loops.
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.target)
            .zip(&self.weights)
            .map(|((xi, gi), qi)| {
                let d = xi - gi;
                qi * d * d
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyMode {
    Indicator,
    #[default]
    Hinge,
    Both,
}

/// `C_obs` when `h(x) > 0`, otherwise zero.
pub fn collision_cost(h: &dyn Heuristic, x: &[f64], weight: f64) -> f64 {
    collision_term(h.value(x), weight)
}

fn collision_term(h_value: f64, weight: f64) -> f64 {
    if h_value > 0.0 {
        weight
    } else {
        0.0
    }
}

/// Penalty for one step given its descent residual.
pub fn residual_penalty(residual: f64, weight: f64, mode: PenaltyMode) -> f64 {
    if residual.is_nan() {
        return f64::INFINITY;
    }
    let hinge = weight * residual.max(0.0);
    let indicator = if residual > 0.0 { weight } else { 0.0 };
    match mode {
        PenaltyMode::Hinge => hinge,
        PenaltyMode::Indicator => indicator,
        PenaltyMode::Both => hinge + indicator,
    }
}

/// Sum of per-step barrier penalties along `traj`.
pub fn cbf_penalty(
    traj: &[Vec<f64>],
    barrier: &BarrierFunction,
    weight: f64,
    mode: PenaltyMode,
) -> f64 {
    let values: Vec<f64> = traj.iter().map(|x| barrier.value(x)).collect();
    values
        .windows(2)
        .map(|w| residual_penalty(descent_residual(w[0], w[1], barrier.decay()), weight, mode))
        .sum()
}

/// Barrier penalty weight and shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierPenalty {
    pub weight: f64,
    #[serde(default)]
    pub mode: PenaltyMode,
}

/// Full trajectory cost with its optional penalty terms.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCost {
    pub stage: QuadraticCost,
    /// Collision weight `C_obs`; `None` disables the term.
    pub collision: Option<f64>,
    /// Barrier penalty; only charged when a barrier is supplied.
    pub barrier: Option<BarrierPenalty>,
    /// Rewards entering the avoid set instead of penalizing it.
    pub adversarial: bool,
}

impl TrajectoryCost {
    pub fn new(stage: QuadraticCost) -> Self {
        Self {
            stage,
            collision: None,
            barrier: None,
            adversarial: false,
        }
    }

    pub fn with_collision(mut self, weight: f64) -> Self {
        self.collision = Some(weight);
        self
    }

    pub fn with_barrier(mut self, weight: f64, mode: PenaltyMode) -> Self {
        self.barrier = Some(BarrierPenalty { weight, mode });
        self
    }

    pub fn validate(&self) -> Result<(), CostError> {
        self.stage.validate()?;
        if let Some(c) = self.collision {
            if !(c.is_finite() && c > 0.0) {
                return Err(CostError::Invalid(format!(
                    "collision weight must be > 0, got {c}"
                )));
            }
        }
        if let Some(p) = self.barrier {
            if !(p.weight.is_finite() && p.weight > 0.0) {
                return Err(CostError::Invalid(format!(
                    "barrier penalty weight must be > 0, got {}",
                    p.weight
                )));
            }
        }
        Ok(())
    }

    /// Cost of the step landing in `x_next`. `h_next` is the avoid heuristic
    /// at `x_next`; `b` and `b_next` are barrier values at both ends when a
    /// barrier is in use.
    pub fn step_cost(&self, x_next: &[f64], h_next: f64, barrier: Option<(f64, f64, f64)>) -> f64 {
        let mut c = self.stage.eval(x_next);
        if let Some(w) = self.collision {
            let term = collision_term(h_next, w);
            c += if self.adversarial { -term } else { term };
        }
        if let (Some(p), Some((b, b_next, a))) = (self.barrier, barrier) {
            c += residual_penalty(descent_residual(b, b_next, a), p.weight, p.mode);
        }
        c
    }

    /// Total over `x_1..x_K` of `traj = [x_0, ..., x_K]`.
    pub fn total(
        &self,
        traj: &[Vec<f64>],
        avoid: &dyn Heuristic,
        barrier: Option<&BarrierFunction>,
    ) -> f64 {
        let mut b_prev = barrier.map(|b| b.value(&traj[0]));
        let mut total = 0.0;
        for x in &traj[1..] {
            let bb = match (barrier, b_prev) {
                (Some(bf), Some(bp)) => {
                    let bn = bf.value(x);
                    b_prev = Some(bn);
                    Some((bp, bn, bf.decay()))
                }
                _ => None,
            };
            let h = if self.collision.is_some() {
                avoid.value(x)
            } else {
                0.0
            };
            total += self.step_cost(x, h, bb);
        }
        total
    }
}
