//! Avoid-set heuristics and discrete-time control barrier functions.
//!
//! Every heuristic here is avoid-positive: a state is in the avoid set
//! exactly when the heuristic is `> 0`. A barrier `B` renders
//! `{x : B(x) <= 0}` forward invariant when each step satisfies
//! `B(x') - B(x) + a B(x) <= 0` with `a` in `(0, 1)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Dynamics, Policy, RolloutError, State, VehicleState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CbfError {
    #[error("class-kappa slope must lie in (0, 1), got {0}")]
    InvalidDecay(f64),
    #[error("initial state is outside the safe set: B(x0) = {0}")]
    UnsafeStart(f64),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
}

/// A scalar function of the state, positive on the avoid set.
pub trait Heuristic: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
}

impl<F> Heuristic for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

pub fn in_avoid_set(h: &dyn Heuristic, x: &[f64]) -> bool {
    h.value(x) > 0.0
}

/// Track-boundary heuristic `e_y^2 - w_I^2`.
pub fn h0_track(e_y: f64, half_width: f64) -> f64 {
    e_y * e_y - half_width * half_width
}

/// Discontinuous variant of [`h0_track`] that widens the gap between the
/// interior and the collision band while keeping the same avoid set.
pub fn h_modified(e_y: f64, half_width: f64, crash_width: f64) -> f64 {
    let d = e_y.abs();
    if d <= half_width {
        h0_track(e_y, half_width) - 0.3
    } else if d < crash_width {
        h0_track(e_y, half_width) + 0.2
    } else {
        2.8
    }
}

/// Circular keep-out zone in curvilinear coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackObstacle {
    pub s: f64,
    pub e_y: f64,
    pub radius: f64,
}

/// Avoid heuristic for the vehicle on a track, optionally with obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackHeuristic {
    pub half_width: f64,
    pub crash_width: f64,
    pub modified: bool,
    pub obstacles: Vec<TrackObstacle>,
    /// Track length used to fold arclength differences; `None` for an open track.
    pub track_length: Option<f64>,
}

impl TrackHeuristic {
    pub fn new(half_width: f64, crash_width: f64) -> Self {
        Self {
            half_width,
            crash_width,
            modified: false,
            obstacles: Vec::new(),
            track_length: None,
        }
    }

    pub fn modified(mut self) -> Self {
        self.modified = true;
        self
    }

    /// `max_j r_j^2 - |p - c_j|^2` over obstacles: positive inside one.
    pub fn obstacle_term(&self, s: f64, e_y: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for ob in &self.obstacles {
            let mut ds = s - ob.s;
            if let Some(l) = self.track_length {
                ds = ds.rem_euclid(l);
                if ds > 0.5 * l {
                    ds -= l;
                }
            }
            let de = e_y - ob.e_y;
            best = best.max(ob.radius * ob.radius - ds * ds - de * de);
        }
        best
    }
}

impl Heuristic for TrackHeuristic {
    fn value(&self, x: &[f64]) -> f64 {
        let e_y = x[VehicleState::E_Y];
        let base = if self.modified {
            h_modified(e_y, self.half_width, self.crash_width)
        } else {
            h0_track(e_y, self.half_width)
        };
        if self.obstacles.is_empty() {
            base
        } else {
            base.max(self.obstacle_term(x[VehicleState::S], e_y))
        }
    }
}

/// Axis-aligned keep-out box in the drone's `(x, z)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Block {
    /// Positive inside the box: the smallest distance to any face.
    pub fn depth(&self, x: f64, z: f64) -> f64 {
        (x - self.x_min)
            .min(self.x_max - x)
            .min(z - self.z_min)
            .min(self.z_max - z)
    }
}

/// Ground plane plus rectangular obstacles for the planar drone.
#[derive(Debug, Clone, PartialEq)]
pub struct CorridorHeuristic {
    pub blocks: Vec<Block>,
}

impl Heuristic for CorridorHeuristic {
    fn value(&self, x: &[f64]) -> f64 {
        let (px, pz) = (x[0], x[1]);
        self.blocks
            .iter()
            .map(|b| b.depth(px, pz))
            .fold(-pz, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierSource {
    Heuristic,
    Learned,
    PolicyValueOracle,
}

/// An evaluable barrier `B` together with its linear class-kappa slope.
#[derive(Clone)]
pub struct BarrierFunction {
    eval: Arc<dyn Heuristic>,
    decay: f64,
    source: BarrierSource,
}

impl fmt::Debug for BarrierFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BarrierFunction")
            .field("decay", &self.decay)
            .field("source", &self.source)
            .finish_non_exhaustive()
    }
}

impl BarrierFunction {
    pub fn new(
        eval: Arc<dyn Heuristic>,
        decay: f64,
        source: BarrierSource,
    ) -> Result<Self, CbfError> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(CbfError::InvalidDecay(decay));
        }
        Ok(Self {
            eval,
            decay,
            source,
        })
    }

    pub fn from_heuristic(h: Arc<dyn Heuristic>, decay: f64) -> Result<Self, CbfError> {
        Self::new(h, decay, BarrierSource::Heuristic)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.eval.value(x)
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn source(&self) -> BarrierSource {
        self.source
    }

    pub fn residual(&self, x: &[f64], x_next: &[f64]) -> f64 {
        descent_residual(self.value(x), self.value(x_next), self.decay)
    }
}

/// `B(x') - B(x) + a B(x)`; non-positive when the descent condition holds.
pub fn descent_residual(b: f64, b_next: f64, decay: f64) -> f64 {
    b_next - b + decay * b
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub states: Vec<State>,
    /// `B(x_k)` for `k = 0..=K`.
    pub values: Vec<f64>,
    /// `(1 - a)^k B(x_0)`.
    pub bounds: Vec<f64>,
    /// Residual of step `k -> k + 1`.
    pub residuals: Vec<f64>,
    /// First step whose residual is positive.
    pub first_violation: Option<usize>,
    /// `B(x_k) <= 0` for every `k`.
    pub stays_safe: bool,
    /// `B(x_k) <= (1 - a)^k B(x_0) + slack` for every `k`.
    pub bound_holds: bool,
}

/// Rolls the closed loop for `steps` steps and compares `B(x_k)` with the
/// geometric bound.
pub fn check_forward_invariance(
    x0: &[f64],
    policy: &mut dyn Policy,
    barrier: &BarrierFunction,
    model: &dyn Dynamics,
    steps: usize,
    slack: f64,
) -> Result<InvarianceReport, CbfError> {
    let b0 = barrier.value(x0);
    if b0 > 0.0 {
        return Err(CbfError::UnsafeStart(b0));
    }
    let a = barrier.decay();
    let mut states = vec![x0.to_vec()];
    let mut values = vec![b0];
    let mut bounds = vec![b0];
    let mut residuals = Vec::with_capacity(steps);
    let mut bound = b0;
    for k in 0..steps {
        let x = &states[k];
        let u = policy.act(x);
        let next = model
            .step(x, &u)
            .map_err(|source| RolloutError::Step { step: k, source })?;
        let b_next = barrier.value(&next);
        residuals.push(descent_residual(values[k], b_next, a));
        bound *= 1.0 - a;
        bounds.push(bound);
        values.push(b_next);
        states.push(next);
    }
    let first_violation = residuals.iter().position(|r| *r > 0.0);
    let stays_safe = values.iter().all(|b| *b <= 0.0);
    let bound_holds = values.iter().zip(&bounds).all(|(b, bd)| *b <= bd + slack);
    Ok(InvarianceReport {
        states,
        values,
        bounds,
        residuals,
        first_violation,
        stays_safe,
        bound_holds,
    })
}

/// A quadratic barrier `x^T P x - 1` for a double integrator under a linear
/// feedback, with `P` chosen so the descent condition holds at every state.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticBarrier {
    pub p: [[f64; 2]; 2],
    pub gains: [f64; 2],
}

impl QuadraticBarrier {
    /// Builds `P = sum_j (A~^T)^j A~^j` for `A~ = (A - B K) / sqrt(1 - a)`.
    /// Returns `None` when `A~` is not Schur stable.
    pub fn for_double_integrator(dt: f64, gains: [f64; 2], decay: f64) -> Option<Self> {
        let s = 1.0 / (1.0 - decay).sqrt();
        let a = [[s, s * dt], [-s * gains[0] * dt, s * (1.0 - gains[1] * dt)]];
        let mut p = [[1.0, 0.0], [0.0, 1.0]];
        for _ in 0..100_000 {
            // P <- I + A^T P A
            let mut pa = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    pa[i][j] = p[i][0] * a[0][j] + p[i][1] * a[1][j];
                }
            }
            let mut next = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    next[i][j] =
                        a[0][i] * pa[0][j] + a[1][i] * pa[1][j] + if i == j { 1.0 } else { 0.0 };
                }
            }
            let diff = (0..2)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| (next[i][j] - p[i][j]).abs())
                .fold(0.0, f64::max);
            p = next;
            if !p[0][0].is_finite() || p[0][0] > 1e12 {
                return None;
            }
            if diff < 1e-13 * p[0][0].abs().max(1.0) {
                return Some(Self { p, gains });
            }
        }
        None
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let p = &self.p;
        p[0][0] * x[0] * x[0] + 2.0 * p[0][1] * x[0] * x[1] + p[1][1] * x[1] * x[1] - 1.0
    }

    pub fn control(&self, x: &[f64]) -> f64 {
        -self.gains[0] * x[0] - self.gains[1] * x[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Control, DoubleIntegrator, ScalarLinear};
    use proptest::prelude::*;

    fn ey(e: f64) -> Vec<f64> {
        let mut x = vec![0.0; 8];
        x[VehicleState::E_Y] = e;
        x
    }

    #[test]
    fn track_heuristic_values() {
        let h = TrackHeuristic::new(1.5, 1.8);
        assert_eq!(h.value(&ey(0.0)), -2.25);
        assert_eq!(h.value(&ey(1.5)), 0.0);
        assert!(!in_avoid_set(&h, &ey(1.5)));
        assert_eq!(h.value(&ey(2.0)), 1.75);
        assert_eq!(h.value(&ey(-2.0)), 1.75);
    }

    #[test]
    fn modified_heuristic_branches() {
        assert_eq!(h_modified(0.0, 1.5, 1.8), -2.25 - 0.3);
        assert_eq!(h_modified(1.8, 1.5, 1.8), 2.8);
        assert_eq!(h_modified(5.0, 1.5, 1.8), 2.8);
        let just_above = h_modified(1.5 + 1e-9, 1.5, 1.8);
        assert!(just_above > 0.2 && just_above < 0.21);
    }

    #[test]
    fn modified_heuristic_keeps_avoid_set() {
        let (wi, wo) = (1.5, 1.8);
        for i in -40_000..=40_000 {
            let e = i as f64 * 1e-4;
            assert_eq!(
                h0_track(e, wi) > 0.0,
                h_modified(e, wi, wo) > 0.0,
                "e_y = {e}"
            );
        }
        for e in [wi, -wi, wo, -wo] {
            assert_eq!(h0_track(e, wi) > 0.0, h_modified(e, wi, wo) > 0.0);
        }
    }

    #[test]
    fn residual_examples() {
        assert_eq!(descent_residual(0.0, 0.0, 0.5), 0.0);
        assert_eq!(descent_residual(-1.0, -1.0, 0.5), -0.5);
        assert_eq!(descent_residual(-1.0, 0.0, 0.5), 0.5);
    }

    #[test]
    fn rejects_bad_decay() {
        let h: Arc<dyn Heuristic> = Arc::new(|x: &[f64]| x[0]);
        for a in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(BarrierFunction::from_heuristic(h.clone(), a).is_err());
        }
    }

    #[test]
    fn corridor_heuristic() {
        let c = CorridorHeuristic {
            blocks: vec![Block {
                x_min: 2.0,
                x_max: 3.0,
                z_min: 0.5,
                z_max: 5.0,
            }],
        };
        assert!(c.value(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]) < 0.0);
        assert!(c.value(&[0.0, -0.1, 0.0, 0.0, 0.0, 0.0]) > 0.0);
        assert!(c.value(&[2.5, 1.0, 0.0, 0.0, 0.0, 0.0]) > 0.0);
        assert!(c.value(&[2.5, 0.3, 0.0, 0.0, 0.0, 0.0]) < 0.0);
    }

    #[test]
    fn obstacle_extends_avoid_set() {
        let mut h = TrackHeuristic::new(1.5, 1.8);
        h.obstacles.push(TrackObstacle {
            s: 10.0,
            e_y: 0.5,
            radius: 0.4,
        });
        h.track_length = Some(100.0);
        let mut x = ey(0.5);
        x[VehicleState::S] = 10.1;
        assert!(h.value(&x) > 0.0);
        x[VehicleState::S] = 20.0;
        assert!(h.value(&x) < 0.0);
    }

    fn double_integrator_setup() -> (DoubleIntegrator, QuadraticBarrier, BarrierFunction) {
        let q = QuadraticBarrier::for_double_integrator(0.1, [1.0, 2.0], 0.1).unwrap();
        let qc = q.clone();
        let b =
            BarrierFunction::from_heuristic(Arc::new(move |x: &[f64]| qc.value(x)), 0.1).unwrap();
        (DoubleIntegrator::new(0.1, 1e9), q, b)
    }

    #[test]
    fn double_integrator_invariance() {
        let (m, q, b) = double_integrator_setup();
        // scale x0 onto the level set B = -0.2
        let dir = [0.6, -0.8];
        let r = (0.8 / (q.value(&dir) + 1.0)).sqrt();
        let x0 = [dir[0] * r, dir[1] * r];
        let qp = q.clone();
        let mut pi = move |x: &[f64]| -> Control { vec![qp.control(x)] };
        let rep = check_forward_invariance(&x0, &mut pi, &b, &m, 200, 1e-12).unwrap();
        assert!(rep.residuals.iter().all(|r| *r <= 0.0));
        assert!(rep.first_violation.is_none());
        assert!(rep.stays_safe && rep.bound_holds);
    }

    #[test]
    fn zero_residual_rides_the_boundary() {
        // x' = 0.9 x + 0.1 with B(x) = x - 1 gives B' = 0.9 B exactly
        let m = ScalarLinear::new(0.9, 0.1, 1.0);
        let b = BarrierFunction::from_heuristic(Arc::new(|x: &[f64]| x[0] - 1.0), 0.1).unwrap();
        let mut pi = |_: &[f64]| -> Control { vec![1.0] };
        let rep = check_forward_invariance(&[1.0], &mut pi, &b, &m, 50, 0.0).unwrap();
        assert!(rep.values.iter().all(|v| *v == 0.0));
        assert!(rep.stays_safe);
    }

    #[test]
    fn violation_is_flagged_at_its_step() {
        let m = ScalarLinear::new(1.0, 1.0, 10.0);
        let b = BarrierFunction::from_heuristic(Arc::new(|x: &[f64]| x[0] - 1.0), 0.5).unwrap();
        let mut k = 0;
        let mut pi = move |_: &[f64]| -> Control {
            let u = if k == 3 { 1.5 } else { 0.0 };
            k += 1;
            vec![u]
        };
        let rep = check_forward_invariance(&[-1.0], &mut pi, &b, &m, 6, 0.0).unwrap();
        assert_eq!(rep.first_violation, Some(3));
    }

    #[test]
    fn unsafe_start_rejected() {
        let (m, _, b) = double_integrator_setup();
        let mut pi = |_: &[f64]| -> Control { vec![0.0] };
        assert!(matches!(
            check_forward_invariance(&[10.0, 0.0], &mut pi, &b, &m, 5, 0.0),
            Err(CbfError::UnsafeStart(_))
        ));
    }

    proptest! {
        #[test]
        fn quadratic_barrier_descends_everywhere(px in -3.0..3.0f64, vx in -3.0..3.0f64) {
            let (m, q, b) = double_integrator_setup();
            let x = [px, vx];
            let next = m.step(&x, &[q.control(&x)]).unwrap();
            prop_assert!(b.residual(&x, &next) <= 0.0);
        }

        #[test]
        fn induction_bound_holds(dir in 0.0..std::f64::consts::TAU, level in 0.0..1.0f64) {
            let (m, q, b) = double_integrator_setup();
            let d = [dir.cos(), dir.sin()];
            let r = ((1.0 - level) / (q.value(&d) + 1.0)).sqrt();
            let x0 = [d[0] * r, d[1] * r];
            let qp = q.clone();
            let mut pi = move |x: &[f64]| -> Control { vec![qp.control(x)] };
            let rep = check_forward_invariance(&x0, &mut pi, &b, &m, 60, 1e-12).unwrap();
            prop_assert!(rep.bound_holds && rep.stays_safe);
        }
    }
}
