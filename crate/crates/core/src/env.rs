//! Closed-loop environments: a dynamics model plus its avoid set, contact
//! rules and initial-state distribution.

use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::cbf::{CorridorHeuristic, Heuristic, TrackHeuristic};
use crate::dynamics::{
    Control, DroneModel, Dynamics, ScalarLinear, State, StepError, VehicleModel, VehicleState,
};

/// Outcome of touching the environment's boundaries at one state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contact {
    Clear,
    /// Touched a boundary but can keep going.
    Collision,
    /// Cannot continue; the episode ends.
    Crash,
}

pub trait Environment: Send + Sync {
    fn name(&self) -> &str;
    fn dynamics(&self) -> &dyn Dynamics;
    /// Heuristic whose positive set is the avoid set used by costs and RBR.
    fn avoid(&self) -> Arc<dyn Heuristic>;
    /// Heuristic used as the label when learning a value barrier.
    fn training_heuristic(&self) -> Arc<dyn Heuristic> {
        self.avoid()
    }
    fn contact(&self, x: &[f64]) -> Contact;
    fn initial_state(&self) -> State;
    /// Draws a start state for value-function data collection.
    fn sample_initial(&self, rng: &mut dyn RngCore) -> State;
    /// Forward speed reported in trial metrics.
    fn speed(&self, x: &[f64]) -> f64;
    /// Per-dimension std of the additive plant disturbance; empty for none.
    fn disturbance_std(&self) -> &[f64] {
        &[]
    }
    /// A goal was reached and the episode may stop early.
    fn done(&self, _x: &[f64]) -> bool {
        false
    }

    /// Plant step: model step plus the configured disturbance.
    fn plant_step(&self, x: &[f64], u: &[f64], rng: &mut dyn RngCore) -> Result<State, StepError> {
        let mut next = self.dynamics().step(x, u)?;
        for (xi, std) in next.iter_mut().zip(self.disturbance_std()) {
            if *std > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                *xi += std * z;
            }
        }
        Ok(next)
    }
}

/// Rally car on a closed track.
pub struct VehicleTrack {
    pub model: VehicleModel,
    pub avoid: Arc<TrackHeuristic>,
    pub training: Arc<TrackHeuristic>,
    pub start_speed: f64,
    pub disturbance: Vec<f64>,
}

impl VehicleTrack {
    pub fn new(model: VehicleModel, start_speed: f64, disturbance: Vec<f64>) -> Self {
        let t = model.track();
        let mut avoid = TrackHeuristic::new(t.half_width, t.crash_width);
        avoid.track_length = Some(t.total_length());
        let training = avoid.clone().modified();
        Self {
            avoid: Arc::new(avoid),
            training: Arc::new(training),
            model,
            start_speed,
            disturbance,
        }
    }
}

impl Environment for VehicleTrack {
    fn name(&self) -> &str {
        "vehicle"
    }
    fn dynamics(&self) -> &dyn Dynamics {
        &self.model
    }
    fn avoid(&self) -> Arc<dyn Heuristic> {
        self.avoid.clone()
    }
    fn training_heuristic(&self) -> Arc<dyn Heuristic> {
        self.training.clone()
    }
    fn contact(&self, x: &[f64]) -> Contact {
        let t = self.model.track();
        let e = x[VehicleState::E_Y].abs();
        if e >= t.crash_width {
            Contact::Crash
        } else if e >= t.half_width
            || self
                .avoid
                .obstacle_term(x[VehicleState::S], x[VehicleState::E_Y])
                > 0.0
        {
            Contact::Collision
        } else {
            Contact::Clear
        }
    }
    fn initial_state(&self) -> State {
        self.model.cruising_state(self.start_speed).to_vec()
    }
    fn sample_initial(&self, rng: &mut dyn RngCore) -> State {
        let t = self.model.track();
        let speed = self.start_speed * rng.random_range(0.5..1.2);
        let mut v = self.model.cruising_state(speed);
        v.s = rng.random_range(0.0..t.total_length());
        v.e_y = rng.random_range(-0.9..0.9) * t.half_width;
        v.e_psi = rng.random_range(-0.3..0.3);
        v.v_y = rng.random_range(-0.3..0.3);
        v.yaw_rate = t.curvature(v.s) * speed + rng.random_range(-0.3..0.3);
        v.to_vec()
    }
    fn speed(&self, x: &[f64]) -> f64 {
        x[VehicleState::V_X].hypot(x[VehicleState::V_Y])
    }
    fn disturbance_std(&self) -> &[f64] {
        &self.disturbance
    }
}

/// Planar drone flying along `+x` through a corridor of blocks.
pub struct DroneCorridor {
    pub model: DroneModel,
    pub corridor: Arc<CorridorHeuristic>,
    pub start: State,
    /// Episode ends successfully once `x` passes this.
    pub goal_x: f64,
    pub disturbance: Vec<f64>,
}

impl Environment for DroneCorridor {
    fn name(&self) -> &str {
        "drone"
    }
    fn dynamics(&self) -> &dyn Dynamics {
        &self.model
    }
    fn avoid(&self) -> Arc<dyn Heuristic> {
        self.corridor.clone()
    }
    fn contact(&self, x: &[f64]) -> Contact {
        if self.corridor.value(x) > 0.0 {
            Contact::Crash
        } else {
            Contact::Clear
        }
    }
    fn initial_state(&self) -> State {
        self.start.clone()
    }
    fn sample_initial(&self, rng: &mut dyn RngCore) -> State {
        let mut x = self.start.clone();
        x[0] += rng.random_range(-1.0..(self.goal_x - self.start[0]).max(0.0));
        x[1] = rng.random_range(0.1..self.start[1] + 0.6);
        x[2] = self.start[2] * rng.random_range(0.5..1.3);
        x[3] = rng.random_range(-0.5..0.5);
        x[4] = rng.random_range(-0.15..0.15);
        x
    }
    fn speed(&self, x: &[f64]) -> f64 {
        x[2].hypot(x[3])
    }
    fn disturbance_std(&self) -> &[f64] {
        &self.disturbance
    }
    fn done(&self, x: &[f64]) -> bool {
        x[0] >= self.goal_x
    }
}

/// Scalar contraction `x' = 0.9 x + 0.1 u` with `h(x) = x - 1`, used as a
/// ground-truth system for value-function learning.
pub struct ScalarOracle {
    pub model: ScalarLinear,
    pub range: (f64, f64),
}

impl Default for ScalarOracle {
    fn default() -> Self {
        Self {
            model: ScalarLinear::new(0.9, 0.1, 1.0),
            range: (-3.0, 3.0),
        }
    }
}

impl ScalarOracle {
    /// The fixed policy `clamp(-x, -1, 1)`.
    pub fn policy(x: &[f64]) -> Control {
        vec![(-x[0]).clamp(-1.0, 1.0)]
    }

    pub fn heuristic(x: &[f64]) -> f64 {
        x[0] - 1.0
    }
}

impl Environment for ScalarOracle {
    fn name(&self) -> &str {
        "oracle"
    }
    fn dynamics(&self) -> &dyn Dynamics {
        &self.model
    }
    fn avoid(&self) -> Arc<dyn Heuristic> {
        Arc::new(Self::heuristic)
    }
    fn contact(&self, _x: &[f64]) -> Contact {
        // the oracle value is defined over whole trajectories, so nothing stops an episode
        Contact::Clear
    }
    fn initial_state(&self) -> State {
        vec![0.0]
    }
    fn sample_initial(&self, rng: &mut dyn RngCore) -> State {
        vec![rng.random_range(self.range.0..=self.range.1)]
    }
    fn speed(&self, x: &[f64]) -> f64 {
        x[0].abs()
    }
}
