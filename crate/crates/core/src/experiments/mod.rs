//! Closed-loop scenario runners and the metrics built on them.

pub mod checks;
pub mod metrics;
pub mod sweep;

use std::sync::{Arc, Mutex};
use std::time::Instant;

use thiserror::Error;

use crate::cbf::{BarrierFunction, CorridorHeuristic};
use crate::config::{ConfigError, EnvKind, ScenarioConfig, Variant};
use crate::cost::{QuadraticCost, TrajectoryCost};
use crate::dynamics::{DroneModel, Dynamics, VehicleModel};
use crate::env::{Contact, DroneCorridor, Environment, ScalarOracle, VehicleTrack};
use crate::sampler::{stream_rng, Algorithm, Controller, SamplerError};
use crate::valuefn::GridOracle;
use crate::valuefn::{
    as_barrier, collect_rollouts, model_file, train, Mlp, TrainError, TrainOutcome,
};

pub use checks::{theorem_checks, CheckOutcome};
pub use metrics::{ess_histogram, histogram, timing_report, EssHistogram, TimingRow};
pub use sweep::{run_sweep, SweepRow, SweepSpec, SweepTable};

/// Stream key of the plant disturbance, kept apart from the controller's.
const PLANT_STREAM: u64 = 0x706c_616e_74;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] model_file::ModelFileError),
    #[error("{0}")]
    Other(String),
}

/// A validated config with its environment built.
pub struct Scenario {
    config: ScenarioConfig,
    env: Arc<dyn Environment>,
    model: Arc<dyn Dynamics>,
    learned: Mutex<Option<Arc<Mlp>>>,
}

/// What `train_barrier` produced.
pub struct TrainReport {
    pub outcome: TrainOutcome,
    pub transitions: usize,
    pub crashes: usize,
    /// Sup-norm error against the tabulated value function, for the oracle
    /// system only.
    pub oracle_error: Option<f64>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let env_cfg = &config.environment;
        let (env, model): (Arc<dyn Environment>, Arc<dyn Dynamics>) = match env_cfg.kind {
            EnvKind::Vehicle => {
                let v = env_cfg.vehicle.as_ref().expect("validated");
                let model =
                    VehicleModel::new(v.params.clone(), v.drivetrain.clone(), v.track.geometry()?)
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                let mut env = VehicleTrack::new(
                    model.clone(),
                    env_cfg.start_speed,
                    env_cfg.disturbance.clone(),
                );
                Arc::make_mut(&mut env.avoid).obstacles = v.obstacles.clone();
                Arc::make_mut(&mut env.training).obstacles = v.obstacles.clone();
                (Arc::new(env), Arc::new(model))
            }
            EnvKind::Drone => {
                let d = env_cfg.drone.as_ref().expect("validated");
                let model = DroneModel::new(d.params.clone())
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                let env = DroneCorridor {
                    model: model.clone(),
                    corridor: Arc::new(CorridorHeuristic {
                        blocks: d.blocks.clone(),
                    }),
                    start: d.start.clone(),
                    goal_x: d.goal_x,
                    disturbance: env_cfg.disturbance.clone(),
                };
                (Arc::new(env), Arc::new(model))
            }
            EnvKind::Oracle => {
                let env = ScalarOracle::default();
                let model = env.model.clone();
                (Arc::new(env), Arc::new(model))
            }
        };
        Ok(Self {
            config,
            env,
            model,
            learned: Mutex::new(None),
        })
    }

    pub fn from_env(
        config: ScenarioConfig,
        env: Arc<dyn Environment>,
        model: Arc<dyn Dynamics>,
    ) -> Self {
        Self {
            config,
            env,
            model,
            learned: Mutex::new(None),
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn env(&self) -> &Arc<dyn Environment> {
        &self.env
    }

    pub fn model(&self) -> &Arc<dyn Dynamics> {
        &self.model
    }

    /// Uses `net` as the learned barrier instead of loading or training one.
    pub fn with_learned(self, net: Arc<Mlp>) -> Self {
        *self.learned.lock().unwrap() = Some(net);
        self
    }

    pub fn needs_learned(&self) -> bool {
        self.config
            .experiment
            .variants
            .iter()
            .any(|v| v.algorithm == Algorithm::NsMppi)
    }

    /// The learned barrier network: the configured model file, or one
    /// trained in-process on first use.
    pub fn learned_net(&self) -> Result<Arc<Mlp>, ExperimentError> {
        let mut slot = self.learned.lock().unwrap();
        if let Some(net) = slot.as_ref() {
            return Ok(net.clone());
        }
        let net = match &self.config.barrier.model {
            Some(path) => model_file::load(path)?,
            None => self.train_barrier()?.outcome.net,
        };
        let net = Arc::new(net);
        *slot = Some(net.clone());
        Ok(net)
    }

    /// Collects closed-loop data and fits the value network. The oracle
    /// system uses its fixed policy; the others use Shield-MPPI.
    pub fn train_barrier(&self) -> Result<TrainReport, ExperimentError> {
        let t = &self.config.training;
        let data = if self.config.environment.kind == EnvKind::Oracle {
            collect_rollouts(self.env.as_ref(), &mut ScalarOracle::policy, &t.collect)
        } else {
            let mut spec = self.config.controller.clone();
            spec.algorithm = Algorithm::ShieldMppi;
            spec.rbr = false;
            spec.samples = t.collector.samples;
            spec.horizon = t.collector.horizon;
            spec.elite = spec.elite.min(spec.samples);
            spec.seed = t.collector.seed;
            let (cost, barrier) = self.cost_and_barrier(Algorithm::ShieldMppi, false)?;
            let mut collector =
                Controller::new(spec, self.model.clone(), cost, self.env.avoid(), barrier)?;
            collect_rollouts(self.env.as_ref(), &mut collector, &t.collect)
        };
        let outcome = train(&data, &t.fit)?;
        let oracle_error = (self.config.environment.kind == EnvKind::Oracle).then(|| {
            let grid = self.oracle_grid(t.fit.gamma);
            grid.points()
                .iter()
                .map(|x| (outcome.net.forward(&[*x]) - grid.eval(*x)).abs())
                .fold(0.0, f64::max)
        });
        Ok(TrainReport {
            transitions: data.len(),
            crashes: data.crashes,
            outcome,
            oracle_error,
        })
    }

    /// Discounted value function of the oracle system's fixed policy.
    pub fn oracle_grid(&self, gamma: f64) -> GridOracle {
        let range = ScalarOracle::default().range;
        let model = self.model.clone();
        let step = move |x: f64| {
            model
                .step(&[x], &ScalarOracle::policy(&[x]))
                .map_or(f64::NAN, |n| n[0])
        };
        GridOracle::iterate(
            step,
            |x| ScalarOracle::heuristic(&[x]),
            range,
            601,
            gamma,
            1e-12,
            100_000,
        )
    }

    fn cost_and_barrier(
        &self,
        algorithm: Algorithm,
        rbr: bool,
    ) -> Result<(TrajectoryCost, Option<BarrierFunction>), ExperimentError> {
        let c = &self.config.cost;
        let stage = QuadraticCost::new(c.weights.clone(), c.target.clone())
            .map_err(|e| ExperimentError::Other(e.to_string()))?;
        let mut cost = TrajectoryCost::new(stage);
        cost.adversarial = c.adversarial;
        let decay = self.config.barrier.decay;
        let heuristic = || BarrierFunction::from_heuristic(self.env.avoid(), decay);
        let barrier = match algorithm {
            Algorithm::Mppi | Algorithm::Cem => {
                cost = cost.with_collision(c.collision);
                None
            }
            Algorithm::ShieldMppi => {
                cost = cost.with_barrier(c.barrier, c.penalty);
                Some(heuristic())
            }
            Algorithm::NsMppi => {
                cost = cost.with_barrier(c.barrier, c.penalty);
                Some(as_barrier(
                    self.learned_net()?,
                    self.env.training_heuristic(),
                    decay,
                ))
            }
        };
        let mut barrier = barrier
            .transpose()
            .map_err(|e| ExperimentError::Other(e.to_string()))?;
        if barrier.is_none() && rbr && self.config.controller.predicate.needs_barrier() {
            barrier = Some(heuristic().map_err(|e| ExperimentError::Other(e.to_string()))?);
        }
        Ok((cost, barrier))
    }

    /// Controller for `variant` sampling with `seed`.
    pub fn controller(&self, variant: Variant, seed: u64) -> Result<Controller, ExperimentError> {
        let mut spec = self.config.controller.clone();
        spec.algorithm = variant.algorithm;
        spec.rbr = variant.rbr;
        spec.seed = seed;
        let (cost, barrier) = self.cost_and_barrier(variant.algorithm, spec.rbr)?;
        Ok(Controller::new(
            spec,
            self.model.clone(),
            cost,
            self.env.avoid(),
            barrier,
        )?)
    }

    /// One closed-loop episode of `variant` with seed `seed`.
    pub fn run_trial(&self, variant: Variant, seed: u64) -> TrialResult {
        self.run_episode(variant, seed, self.config.experiment.episode_steps)
    }

    pub fn run_episode(&self, variant: Variant, seed: u64, steps: usize) -> TrialResult {
        let mut result = TrialResult::new(variant, seed);
        let mut controller = match self.controller(variant, seed) {
            Ok(c) => c,
            Err(e) => {
                result.crash = true;
                result.cause = Some(format!("controller: {e}"));
                return result;
            }
        };
        let env = self.env.as_ref();
        let mut rng = stream_rng(seed, PLANT_STREAM, 0);
        let mut x = env.initial_state();
        let mut speed_sum = 0.0;
        let mut busy = 0.0;
        for _ in 0..steps {
            if env.done(&x) {
                break;
            }
            let started = Instant::now();
            let update = controller.step(&x);
            busy += started.elapsed().as_secs_f64();
            let u = match update {
                Ok((u, diag)) => {
                    result.ess.push(diag.ess);
                    u
                }
                Err(e) => {
                    result.crash = true;
                    result.cause = Some(format!("controller: {e}"));
                    break;
                }
            };
            x = match env.plant_step(&x, &u, &mut rng) {
                Ok(next) => next,
                Err(e) => {
                    result.crash = true;
                    result.collision = true;
                    result.cause = Some(format!("dynamics: {e}"));
                    break;
                }
            };
            result.steps += 1;
            speed_sum += env.speed(&x);
            match env.contact(&x) {
                Contact::Clear => {}
                Contact::Collision => {
                    result.collision = true;
                    result.collision_steps += 1;
                }
                Contact::Crash => {
                    result.crash = true;
                    result.collision = true;
                    result.cause = Some("contact".into());
                    break;
                }
            }
        }
        result.reached_goal = !result.crash && env.done(&x);
        if result.steps > 0 {
            result.mean_velocity = speed_sum / result.steps as f64;
        }
        if !result.ess.is_empty() {
            result.step_seconds = busy / result.ess.len() as f64;
        }
        result
    }
}

/// Outcome of one closed-loop episode.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub variant: Variant,
    pub seed: u64,
    /// The episode ended early: a crash contact, or a controller or dynamics
    /// failure named in `cause`.
    pub crash: bool,
    pub cause: Option<String>,
    /// Touched a boundary at least once. Every crash counts as a collision.
    pub collision: bool,
    pub collision_steps: usize,
    /// Mean speed over the steps survived, m/s.
    pub mean_velocity: f64,
    pub steps: usize,
    pub reached_goal: bool,
    /// ESS of every control update.
    pub ess: Vec<f64>,
    /// Mean wall-clock time per control update, s. Ignored by `==`.
    pub step_seconds: f64,
}

impl TrialResult {
    fn new(variant: Variant, seed: u64) -> Self {
        Self {
            variant,
            seed,
            crash: false,
            cause: None,
            collision: false,
            collision_steps: 0,
            mean_velocity: 0.0,
            steps: 0,
            reached_goal: false,
            ess: Vec::new(),
            step_seconds: 0.0,
        }
    }

    pub fn mean_ess(&self) -> f64 {
        if self.ess.is_empty() {
            0.0
        } else {
            self.ess.iter().sum::<f64>() / self.ess.len() as f64
        }
    }
}

impl PartialEq for TrialResult {
    fn eq(&self, other: &Self) -> bool {
        self.variant == other.variant
            && self.seed == other.seed
            && self.crash == other.crash
            && self.cause == other.cause
            && self.collision == other.collision
            && self.collision_steps == other.collision_steps
            && self.mean_velocity.to_bits() == other.mean_velocity.to_bits()
            && self.steps == other.steps
            && self.reached_goal == other.reached_goal
            && self.ess.len() == other.ess.len()
            && self
                .ess
                .iter()
                .zip(&other.ess)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}
