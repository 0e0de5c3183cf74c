//! Receding-horizon sampling controller.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::policy::GaussianPolicy;
use super::rollouts::{rollout_ensemble, RolloutContext, SafetyPredicate, WeightedEnsemble};
use super::weights::{cem_weights, ess, mppi_weights, normalize, snis_estimate};
use super::SamplerError;
use crate::cbf::{BarrierFunction, Heuristic};
use crate::cost::TrajectoryCost;
use crate::dynamics::{Control, ControlSequence, Dynamics, Policy, TailFill};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Mppi,
    Cem,
    /// MPPI with a heuristic barrier penalty.
    ShieldMppi,
    /// MPPI with a learned barrier penalty.
    NsMppi,
}

impl Algorithm {
    pub fn uses_barrier(self) -> bool {
        matches!(self, Algorithm::ShieldMppi | Algorithm::NsMppi)
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Mppi => "mppi",
            Algorithm::Cem => "cem",
            Algorithm::ShieldMppi => "shield-mppi",
            Algorithm::NsMppi => "ns-mppi",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mppi" => Ok(Algorithm::Mppi),
            "cem" => Ok(Algorithm::Cem),
            "shield-mppi" => Ok(Algorithm::ShieldMppi),
            "ns-mppi" => Ok(Algorithm::NsMppi),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSpec {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub samples: usize,
    /// Elite count for CEM.
    pub elite: usize,
    /// `lambda` in `exp(-J / lambda)`.
    pub temperature: f64,
    /// Per-dimension sampling std.
    pub noise_std: Vec<f64>,
    /// Mean of the initial plan; zeros when empty.
    pub nominal: Vec<f64>,
    pub rbr: bool,
    pub predicate: SafetyPredicate,
    pub tail: TailFill,
    pub seed: u64,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        Self::new(Algorithm::Mppi, 20, 100, vec![1.0])
    }
}

impl ControllerSpec {
    pub fn new(algorithm: Algorithm, horizon: usize, samples: usize, noise_std: Vec<f64>) -> Self {
        Self {
            algorithm,
            horizon,
            samples,
            elite: 10.min(samples),
            temperature: 1.0,
            noise_std,
            nominal: Vec::new(),
            rbr: false,
            predicate: SafetyPredicate::AvoidSet,
            tail: TailFill::RepeatLast,
            seed: 0,
        }
    }

    pub fn validate(&self, control_dim: usize) -> Result<(), SamplerError> {
        let bad = |m: String| Err(SamplerError::Invalid(m));
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        if self.samples == 0 {
            return bad("samples must be >= 1".into());
        }
        if self.algorithm == Algorithm::Cem && !(1..=self.samples).contains(&self.elite) {
            return bad(format!(
                "elite must be in 1..={}, got {}",
                self.samples, self.elite
            ));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return bad(format!("temperature must be > 0, got {}", self.temperature));
        }
        if self.noise_std.len() != control_dim {
            return bad(format!(
                "noise_std has {} entries for a {control_dim}-dimensional control",
                self.noise_std.len()
            ));
        }
        if self.noise_std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("noise_std entries must be > 0".into());
        }
        if !self.nominal.is_empty() && self.nominal.len() != control_dim {
            return bad(format!(
                "nominal has {} entries, expected {control_dim}",
                self.nominal.len()
            ));
        }
        Ok(())
    }
}

/// Diagnostics of one controller update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepDiagnostics {
    /// Effective sample size of the normalized weights; 0 when degenerate.
    pub ess: f64,
    pub safe_counts: Vec<usize>,
    pub rewires: usize,
    pub degenerate_steps: usize,
    /// All weights were zero; the prior mean was used.
    pub degenerate: bool,
    pub min_cost: f64,
}

pub struct Controller {
    spec: ControllerSpec,
    model: Arc<dyn Dynamics>,
    cost: TrajectoryCost,
    avoid: Arc<dyn Heuristic>,
    barrier: Option<BarrierFunction>,
    policy: GaussianPolicy,
    calls: u64,
    last: Option<StepDiagnostics>,
    history: Vec<StepDiagnostics>,
    keep_history: bool,
}

impl Controller {
    /// `barrier` is required by the barrier algorithms and by barrier safety
    /// predicates; it is ignored by plain MPPI and CEM.
    pub fn new(
        spec: ControllerSpec,
        model: Arc<dyn Dynamics>,
        cost: TrajectoryCost,
        avoid: Arc<dyn Heuristic>,
        barrier: Option<BarrierFunction>,
    ) -> Result<Self, SamplerError> {
        spec.validate(model.control_dim())?;
        cost.validate()
            .map_err(|e| SamplerError::Invalid(e.to_string()))?;
        let needs_barrier =
            spec.algorithm.uses_barrier() || (spec.rbr && spec.predicate.needs_barrier());
        if needs_barrier && barrier.is_none() {
            return Err(SamplerError::Invalid(format!(
                "{} needs a barrier function",
                spec.algorithm.label()
            )));
        }
        if spec.algorithm.uses_barrier() && cost.barrier.is_none() {
            return Err(SamplerError::Invalid(format!(
                "{} needs a barrier penalty in the cost",
                spec.algorithm.label()
            )));
        }
        let barrier = if needs_barrier { barrier } else { None };
        let policy =
            GaussianPolicy::from_std(initial_mean(&spec, model.control_dim()), &spec.noise_std)?;
        Ok(Self {
            spec,
            model,
            cost,
            avoid,
            barrier,
            policy,
            calls: 0,
            last: None,
            history: Vec::new(),
            keep_history: false,
        })
    }

    pub fn spec(&self) -> &ControllerSpec {
        &self.spec
    }

    pub fn policy(&self) -> &GaussianPolicy {
        &self.policy
    }

    pub fn last_diagnostics(&self) -> Option<&StepDiagnostics> {
        self.last.as_ref()
    }

    /// Keeps every update's diagnostics for later inspection.
    pub fn record_history(&mut self, on: bool) {
        self.keep_history = on;
    }

    pub fn take_history(&mut self) -> Vec<StepDiagnostics> {
        std::mem::take(&mut self.history)
    }

    /// Samples and rolls out an ensemble from `x0` without updating the plan.
    pub fn sample_ensemble(&self, x0: &[f64]) -> Result<WeightedEnsemble, SamplerError> {
        let samples = self.policy.sample_controls(
            self.spec.samples,
            self.spec.seed,
            self.calls,
            self.model.control_bounds(),
        );
        let ctx = RolloutContext {
            model: self.model.as_ref(),
            cost: &self.cost,
            avoid: self.avoid.as_ref(),
            barrier: self.barrier.as_ref(),
            rbr: self.spec.rbr.then_some(self.spec.predicate),
        };
        rollout_ensemble(x0, samples, &ctx, self.spec.seed, self.calls)
    }

    /// Unnormalized weights of `ensemble` under the configured algorithm.
    pub fn weights(&self, ensemble: &WeightedEnsemble) -> Vec<f64> {
        match self.spec.algorithm {
            Algorithm::Cem => cem_weights(&ensemble.costs, self.spec.elite),
            _ => mppi_weights(
                &ensemble.costs,
                &ensemble.controls,
                &self.policy.mean,
                self.policy.variance(),
                self.spec.temperature,
            ),
        }
    }

    /// One receding-horizon update from `x0`: returns the first control of
    /// the estimate and shifts the plan.
    pub fn step(&mut self, x0: &[f64]) -> Result<(Control, StepDiagnostics), SamplerError> {
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(SamplerError::Invalid("non-finite state".into()));
        }
        let ensemble = self.sample_ensemble(x0)?;
        self.calls += 1;
        let raw = self.weights(&ensemble);
        let mut diag = StepDiagnostics {
            safe_counts: ensemble.safe_counts.clone(),
            rewires: ensemble.rewires.len(),
            degenerate_steps: ensemble.degenerate_steps.len(),
            min_cost: ensemble.costs.iter().copied().fold(f64::INFINITY, f64::min),
            ..Default::default()
        };
        let estimate = match normalize(&raw) {
            Ok(w) => {
                diag.ess = ess(&w)?.value;
                snis_estimate(&ensemble.controls, &w)?
            }
            Err(SamplerError::DegenerateEnsemble) => {
                diag.degenerate = true;
                self.policy.mean.clone()
            }
            Err(e) => return Err(e),
        };
        let action = estimate.step(0).to_vec();
        self.policy.recede(&estimate, self.spec.tail);
        if self.keep_history {
            self.history.push(diag.clone());
        }
        self.last = Some(diag.clone());
        Ok((action, diag))
    }

    /// Restores the initial plan and restarts the random streams.
    pub fn reset_plan(&mut self) {
        self.policy.mean = initial_mean(&self.spec, self.model.control_dim());
        self.calls = 0;
        self.last = None;
        self.history.clear();
    }
}

fn initial_mean(spec: &ControllerSpec, dim: usize) -> ControlSequence {
    if spec.nominal.is_empty() {
        ControlSequence::zeros(spec.horizon, dim)
    } else {
        ControlSequence::constant(spec.horizon, &spec.nominal)
    }
}

impl Policy for Controller {
    /// Falls back to the current plan's first control if the update fails.
    fn act(&mut self, x: &[f64]) -> Control {
        match self.step(x) {
            Ok((u, _)) => u,
            Err(_) => {
                let u = self.policy.mean.step(0).to_vec();
                self.policy
                    .recede(&self.policy.mean.clone(), self.spec.tail);
                u
            }
        }
    }

    fn reset(&mut self) {
        self.reset_plan();
    }
}
