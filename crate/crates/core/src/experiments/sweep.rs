//! Parameter sweeps over repeated seeded trials.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::{ExperimentError, Scenario, TrialResult};
use crate::config::{EnvKind, ScenarioConfig, SweepParameter, Variant};
use crate::dynamics::VehicleState;
use crate::sampler::Algorithm;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    /// Ignored when sweeping over algorithms.
    pub values: Vec<f64>,
    pub variants: Vec<Variant>,
    pub trials: usize,
    /// Trial `i` uses seed `seed + i`.
    pub seed: u64,
}

impl SweepSpec {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        let x = &cfg.experiment;
        Self {
            parameter: x.sweep.parameter,
            values: x.sweep.values.clone(),
            variants: x.variants.clone(),
            trials: x.trials,
            seed: x.seed,
        }
    }
}

/// Aggregates of one `(value, variant)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub parameter: SweepParameter,
    pub value: String,
    pub variant: Variant,
    pub trials: usize,
    pub crashes: usize,
    pub collisions: usize,
    /// Trials ended by a controller or dynamics error.
    pub failures: usize,
    pub crash_rate: f64,
    pub crash_se: f64,
    pub collision_rate: f64,
    pub collision_se: f64,
    pub mean_velocity: f64,
    pub velocity_se: f64,
    pub mean_steps: f64,
    pub mean_ess: f64,
}

/// `sqrt(p (1 - p) / n)`.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

impl SweepRow {
    pub fn aggregate(
        parameter: SweepParameter,
        value: String,
        variant: Variant,
        trials: &[TrialResult],
    ) -> Self {
        let n = trials.len();
        let count = |f: fn(&TrialResult) -> bool| trials.iter().filter(|t| f(t)).count();
        let crashes = count(|t| t.crash);
        let collisions = count(|t| t.collision);
        let failures = count(|t| t.cause.as_deref().is_some_and(|c| c != "contact"));
        let crash_rate = crashes as f64 / n as f64;
        let collision_rate = collisions as f64 / n as f64;
        let moving: Vec<f64> = trials
            .iter()
            .filter(|t| t.steps > 0)
            .map(|t| t.mean_velocity)
            .collect();
        let (mean_velocity, velocity_se) = mean_and_se(&moving);
        Self {
            parameter,
            value,
            variant,
            trials: n,
            crashes,
            collisions,
            failures,
            crash_rate,
            crash_se: binomial_se(crash_rate, n),
            collision_rate,
            collision_se: binomial_se(collision_rate, n),
            mean_velocity,
            velocity_se,
            mean_steps: trials.iter().map(|t| t.steps as f64).sum::<f64>() / n as f64,
            mean_ess: trials.iter().map(TrialResult::mean_ess).sum::<f64>() / n as f64,
        }
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Every trial, tagged with its sweep value, in row order.
    pub trials: Vec<(String, TrialResult)>,
}

pub const SUMMARY_HEADER: &str = "parameter,value,variant,trials,crashes,crash_rate,crash_se,collisions,collision_rate,collision_se,failures,mean_velocity,velocity_se,mean_steps,mean_ess";
pub const TRIALS_HEADER: &str = "value,variant,seed,crash,collision,collision_steps,steps,mean_velocity,mean_ess,reached_goal,cause";

impl SweepTable {
    pub fn row(&self, value: &str, variant: Variant) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.value == value && r.variant == variant)
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.parameter.label(),
                r.value,
                r.variant,
                r.trials,
                r.crashes,
                r.crash_rate,
                r.crash_se,
                r.collisions,
                r.collision_rate,
                r.collision_se,
                r.failures,
                r.mean_velocity,
                r.velocity_se,
                r.mean_steps,
                r.mean_ess
            );
        }
        out
    }

    pub fn trials_csv(&self) -> String {
        let mut out = String::from(TRIALS_HEADER);
        out.push('\n');
        for (value, t) in &self.trials {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                value,
                t.variant,
                t.seed,
                t.crash,
                t.collision,
                t.collision_steps,
                t.steps,
                t.mean_velocity,
                t.mean_ess(),
                t.reached_goal,
                t.cause.as_deref().unwrap_or("").replace(',', ";")
            );
        }
        out
    }
}

/// `cfg` with the swept parameter set to `value`.
pub fn apply(
    cfg: &ScenarioConfig,
    parameter: SweepParameter,
    value: f64,
) -> Result<ScenarioConfig, ExperimentError> {
    let mut cfg = cfg.clone();
    match parameter {
        SweepParameter::TargetVelocity => match cfg.environment.kind {
            EnvKind::Vehicle => {
                cfg.environment.start_speed = value;
                cfg.cost.target[VehicleState::V_X] = value;
            }
            EnvKind::Drone => {
                cfg.cost.target[2] = value;
                if let Some(d) = cfg.environment.drone.as_mut() {
                    d.start[2] = value;
                }
            }
            EnvKind::Oracle => {
                return Err(ExperimentError::Other(
                    "the oracle system has no velocity to sweep".into(),
                ));
            }
        },
        SweepParameter::Horizon => cfg.controller.horizon = value as usize,
        SweepParameter::Samples => {
            cfg.controller.samples = value as usize;
            cfg.controller.elite = cfg.controller.elite.min(cfg.controller.samples);
        }
        SweepParameter::Algorithm => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `spec.trials` trials of every variant at every value. The learned
/// barrier, if any variant needs one, is obtained once from `base` and shared
/// across values.
pub fn run_sweep(base: &Scenario, spec: &SweepSpec) -> Result<SweepTable, ExperimentError> {
    if spec.trials == 0 {
        return Err(ExperimentError::Other("trials must be >= 1".into()));
    }
    if spec.variants.is_empty() {
        return Err(ExperimentError::Other("no variants to sweep".into()));
    }
    let points: Vec<(String, ScenarioConfig, Vec<Variant>)> =
        if spec.parameter == SweepParameter::Algorithm {
            spec.variants
                .iter()
                .map(|v| (v.to_string(), base.config().clone(), vec![*v]))
                .collect()
        } else {
            if spec.values.is_empty() {
                return Err(ExperimentError::Other("no values to sweep".into()));
            }
            spec.values
                .iter()
                .map(|v| {
                    Ok((
                        v.to_string(),
                        apply(base.config(), spec.parameter, *v)?,
                        spec.variants.clone(),
                    ))
                })
                .collect::<Result<_, ExperimentError>>()?
        };
    let learned = if spec
        .variants
        .iter()
        .any(|v| v.algorithm == Algorithm::NsMppi)
    {
        Some(base.learned_net()?)
    } else {
        None
    };
    let mut table = SweepTable {
        rows: Vec::new(),
        trials: Vec::new(),
    };
    for (value, cfg, variants) in points {
        let mut scenario = Scenario::new(cfg)?;
        if let Some(net) = &learned {
            scenario = scenario.with_learned(net.clone());
        }
        for variant in variants {
            let trials: Vec<TrialResult> = (0..spec.trials as u64)
                .into_par_iter()
                .map(|i| scenario.run_trial(variant, spec.seed + i))
                .collect();
            table.rows.push(SweepRow::aggregate(
                spec.parameter,
                value.clone(),
                variant,
                &trials,
            ));
            table
                .trials
                .extend(trials.into_iter().map(|t| (value.clone(), t)));
        }
    }
    Ok(table)
}
