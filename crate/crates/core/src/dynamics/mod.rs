//! Discrete-time dynamics `x_{k+1} = f(x_k, u_k)` and open-loop rollouts.
//!
//! Every model clamps its control input to its box bounds before integrating
//! and rejects non-finite inputs. Stepping is a pure function of its
//! arguments, so models can be shared read-only between rollout workers.

mod drone;
mod simple;
mod track;
mod vehicle;

pub use drone::{DroneModel, DroneParams};
pub use simple::{DoubleIntegrator, ScalarLinear};
pub use track::{TrackGeometry, TrackSegment};
pub use vehicle::{DrivetrainParams, TireForces, VehicleModel, VehicleParams, VehicleState};

use thiserror::Error;

/// A state vector. Its dimension is fixed by the owning model.
pub type State = Vec<f64>;

/// A single control input vector.
pub type Control = Vec<f64>;

/// A state trajectory `x_0, ..., x_K`.
pub type Trajectory = Vec<State>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("non-finite {what}")]
    NonFinite { what: &'static str },
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("vehicle left the curvilinear chart (1 - rho*e_y = {denominator})")]
    OffTrack { denominator: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RolloutError {
    #[error("control sequence has zero length")]
    EmptyHorizon,
    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: StepError,
    },
}

/// Axis-aligned box `U` of admissible controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ControlBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, StepError> {
        if lower.len() != upper.len() {
            return Err(StepError::DimensionMismatch {
                what: "control bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(StepError::InvalidParameter(
                "control bounds must satisfy lower <= upper".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn symmetric(limits: &[f64]) -> Self {
        Self {
            lower: limits.iter().map(|l| -l).collect(),
            upper: limits.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn clamp_in_place(&self, u: &mut [f64]) {
        for ((v, lo), hi) in u.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn clamped(&self, u: &[f64]) -> Control {
        let mut out = u.to_vec();
        self.clamp_in_place(&mut out);
        out
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((v, lo), hi)| *v >= *lo && *v <= *hi)
    }
}

/// A discrete-time control system.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn control_bounds(&self) -> &ControlBounds;
    fn dt(&self) -> f64;
    /// Advances one step. `u` is clamped to [`Dynamics::control_bounds`]
    /// before integration.
    fn step(&self, x: &[f64], u: &[f64]) -> Result<State, StepError>;
}

/// A state-feedback law. Implementations may carry internal state such as a
/// warm-started plan.
pub trait Policy: Send {
    fn act(&mut self, x: &[f64]) -> Control;

    fn reset(&mut self) {}
}

impl<F> Policy for F
where
    F: FnMut(&[f64]) -> Control + Send,
{
    fn act(&mut self, x: &[f64]) -> Control {
        self(x)
    }
}

pub(crate) fn check_input(x: &[f64], u: &[f64], n_x: usize, n_u: usize) -> Result<(), StepError> {
    if x.len() != n_x {
        return Err(StepError::DimensionMismatch {
            what: "state",
            expected: n_x,
            got: x.len(),
        });
    }
    if u.len() != n_u {
        return Err(StepError::DimensionMismatch {
            what: "control",
            expected: n_u,
            got: u.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StepError::NonFinite { what: "state" });
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(StepError::NonFinite { what: "control" });
    }
    Ok(())
}

/// A `K x n_u` control trajectory stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence {
    horizon: usize,
    dim: usize,
    data: Vec<f64>,
}

impl ControlSequence {
    pub fn zeros(horizon: usize, dim: usize) -> Self {
        Self {
            horizon,
            dim,
            data: vec![0.0; horizon * dim],
        }
    }

    /// Builds a sequence holding `u` at every step.
    pub fn constant(horizon: usize, u: &[f64]) -> Self {
        let mut data = Vec::with_capacity(horizon * u.len());
        for _ in 0..horizon {
            data.extend_from_slice(u);
        }
        Self {
            horizon,
            dim: u.len(),
            data,
        }
    }

    pub fn from_flat(horizon: usize, dim: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == horizon * dim).then_some(Self { horizon, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return None;
        }
        Some(Self {
            horizon: rows.len(),
            dim,
            data: rows.concat(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn step_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.horizon)
    }

    pub fn clamp(&mut self, bounds: &ControlBounds) {
        for k in 0..self.horizon {
            bounds.clamp_in_place(self.step_mut(k));
        }
    }

    /// Copies the first `len` steps of `other` over this sequence.
    pub fn copy_prefix_from(&mut self, other: &ControlSequence, len: usize) {
        let n = len * self.dim;
        self.data[..n].copy_from_slice(&other.data[..n]);
    }

    /// Drops the first step and fills the freed last step according to `tail`.
    pub fn shifted(&self, tail: TailFill) -> Self {
        let mut out = self.clone();
        if self.horizon == 0 {
            return out;
        }
        out.data.copy_within(self.dim.., 0);
        let last = self.horizon - 1;
        match tail {
            TailFill::RepeatLast => {
                if self.horizon > 1 {
                    let prev = out.step(last - 1).to_vec();
                    out.step_mut(last).copy_from_slice(&prev);
                } else {
                    out.step_mut(0).copy_from_slice(self.step(0));
                }
            }
            TailFill::Zero => out.step_mut(last).fill(0.0),
        }
        out
    }
}

/// How the receding-horizon shift fills the vacated final step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailFill {
    #[default]
    RepeatLast,
    Zero,
}

/// Applies `controls` from `x0`, returning the `K + 1` visited states.
pub fn rollout(
    model: &dyn Dynamics,
    x0: &[f64],
    controls: &ControlSequence,
) -> Result<Trajectory, RolloutError> {
    if controls.horizon() == 0 {
        return Err(RolloutError::EmptyHorizon);
    }
    let mut traj = Vec::with_capacity(controls.horizon() + 1);
    traj.push(x0.to_vec());
    for (k, u) in controls.rows().enumerate() {
        let next = model
            .step(&traj[k], u)
            .map_err(|source| RolloutError::Step { step: k, source })?;
        traj.push(next);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_repeats_last_step() {
        let seq = ControlSequence::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let s = seq.shifted(TailFill::RepeatLast);
        assert_eq!(s.as_slice(), &[2.0, 3.0, 3.0]);
        let z = seq.shifted(TailFill::Zero);
        assert_eq!(z.as_slice(), &[2.0, 3.0, 0.0]);
    }

    #[test]
    fn bounds_clamp() {
        let b = ControlBounds::symmetric(&[1.0, 2.0]);
        assert_eq!(b.clamped(&[3.0, -5.0]), vec![1.0, -2.0]);
        assert!(ControlBounds::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn empty_horizon_rejected() {
        let m = DoubleIntegrator::new(0.1, 1.0);
        let err = rollout(&m, &[0.0, 0.0], &ControlSequence::zeros(0, 1)).unwrap_err();
        assert_eq!(err, RolloutError::EmptyHorizon);
    }

    #[test]
    fn rollout_reports_failing_step() {
        let m = DoubleIntegrator::new(0.1, 1.0);
        let mut u = ControlSequence::zeros(3, 1);
        u.step_mut(2)[0] = f64::NAN;
        match rollout(&m, &[0.0, 0.0], &u) {
            Err(RolloutError::Step { step, .. }) => assert_eq!(step, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
