//! Learning the policy value function `V(x0) = max_k h(x_k)` as a barrier.
//!
//! Training minimizes the squared error between `V_theta(x_k)` and the
//! discounted one-step target `max{h(x_k), (1 - gamma) h(x_k) + gamma V(x_{k+1})}`
//! with `V` taken from a periodically frozen copy of the network.

mod mlp;
pub mod model_file;
mod oracle;

pub use mlp::{Mlp, MlpError};
pub use oracle::{discounted_unrolled, policy_value_oracle, GridOracle};

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cbf::{BarrierFunction, BarrierSource, CbfError, Heuristic};
use crate::dynamics::{Policy, State};
use crate::env::{Contact, Environment};

/// One closed-loop transition with the heuristic label of its start state.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub x: State,
    pub x_next: State,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutDataset {
    pub transitions: Vec<Transition>,
    pub episodes: usize,
    /// Episodes cut short by a dynamics error.
    pub step_errors: usize,
    pub crashes: usize,
}

impl RolloutDataset {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectConfig {
    pub episodes: usize,
    /// Steps per episode.
    pub horizon: usize,
    pub seed: u64,
    /// Extra episodes started from these states.
    pub extra_starts: Vec<State>,
    /// After a crash, add the self-loop `(x_T, x_T)` so the terminal value
    /// is pinned to its heuristic.
    pub absorb_terminal: bool,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            episodes: 50,
            horizon: 100,
            seed: 0,
            extra_starts: Vec::new(),
            absorb_terminal: true,
        }
    }
}

/// Runs `policy` from sampled start states and records transitions labelled
/// with the environment's training heuristic. Deterministic given the seed.
pub fn collect_rollouts(
    env: &dyn Environment,
    policy: &mut dyn Policy,
    cfg: &CollectConfig,
) -> RolloutDataset {
    let h = env.training_heuristic();
    let mut data = RolloutDataset::default();
    let mut starts = Vec::with_capacity(cfg.episodes + cfg.extra_starts.len());
    for ep in 0..cfg.episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(ep as u64);
        starts.push(env.sample_initial(&mut rng));
    }
    starts.extend(cfg.extra_starts.iter().cloned());
    for x0 in starts {
        policy.reset();
        data.episodes += 1;
        let mut x = x0;
        for _ in 0..cfg.horizon {
            let u = policy.act(&x);
            let next = match env.dynamics().step(&x, &u) {
                Ok(n) => n,
                Err(_) => {
                    data.step_errors += 1;
                    break;
                }
            };
            let hx = h.value(&x);
            let crashed = env.contact(&next) == Contact::Crash;
            data.transitions.push(Transition {
                x,
                x_next: next.clone(),
                h: hx,
            });
            x = next;
            if crashed {
                data.crashes += 1;
                if cfg.absorb_terminal {
                    data.transitions.push(Transition {
                        x: x.clone(),
                        x_next: x.clone(),
                        h: h.value(&x),
                    });
                }
                break;
            }
        }
    }
    data
}

/// `max{h, (1 - gamma) h + gamma v_next}`.
pub fn dp_target(h: f64, v_next: f64, gamma: f64) -> f64 {
    h.max((1.0 - gamma) * h + gamma * v_next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Gradient updates between target-network refreshes.
    pub target_refresh: usize,
    /// Learning rate at the last epoch relative to the first; the rate
    /// decays geometrically in between.
    pub final_lr_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            hidden: vec![64, 64],
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 100,
            target_refresh: 200,
            final_lr_fraction: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}, update {update}: loss {loss}")]
    Diverged {
        epoch: usize,
        update: usize,
        loss: f64,
    },
    #[error(transparent)]
    Network(#[from] MlpError),
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(TrainError::Config(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(TrainError::Config(
                "need at least one non-empty hidden layer".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning rate must be > 0".into()));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(TrainError::Config(
                "final learning-rate fraction must lie in (0, 1]".into(),
            ));
        }
        if self.batch_size == 0 || self.target_refresh == 0 {
            return Err(TrainError::Config(
                "batch size and target refresh must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub net: Mlp,
    /// `(epoch, mean batch loss)`.
    pub curve: Vec<(usize, f64)>,
    /// Dataset loss of the final network against its own targets.
    pub final_loss: f64,
}

impl TrainOutcome {
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for (e, l) in &self.curve {
            s.push_str(&format!("{e},{l:e}\n"));
        }
        s
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = B1 * *m + (1.0 - B1) * g;
            *v = B2 * *v + (1.0 - B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + 1e-8);
        }
    }
}

/// Mean squared dynamic-programming error of `net` on `data` with targets
/// from `target`.
pub fn dataset_loss(net: &Mlp, target: &Mlp, data: &RolloutDataset, gamma: f64) -> f64 {
    let n = data.len().max(1) as f64;
    data.transitions
        .iter()
        .map(|t| {
            let y = dp_target(t.h, target.forward(&t.x_next), gamma);
            (net.forward(&t.x) - y).powi(2)
        })
        .sum::<f64>()
        / n
}

/// Fits a fresh network to `data`.
pub fn train(data: &RolloutDataset, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let first = data.transitions.first().ok_or(TrainError::EmptyDataset)?;
    let mut sizes = vec![first.x.len()];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    let mut net = Mlp::new(&sizes, cfg.seed)?;
    net.fit_normalization(data.transitions.iter().map(|t| t.x.as_slice()));
    train_from(net, data, cfg)
}

/// Continues training `net` on `data`.
pub fn train_from(
    mut net: Mlp,
    data: &RolloutDataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut target = net.clone();
    let mut adam = Adam::new(net.params().len());
    let mut grad = vec![0.0; net.params().len()];
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut updates = 0usize;
    let decay = cfg
        .final_lr_fraction
        .powf(1.0 / (cfg.epochs.max(2) - 1) as f64);
    let mut lr = cfg.learning_rate;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let n = batch.len() as f64;
            let mut loss = 0.0;
            for &i in batch {
                let t = &data.transitions[i];
                let y = dp_target(t.h, target.forward(&t.x_next), cfg.gamma);
                net.accumulate_gradient(&t.x, &mut grad, |o| {
                    loss += (o - y) * (o - y) / n;
                    2.0 * (o - y) / n
                });
            }
            if !loss.is_finite() || loss > 1e12 {
                return Err(TrainError::Diverged {
                    epoch,
                    update: updates,
                    loss,
                });
            }
            adam.update(net.params_mut(), &grad, lr);
            updates += 1;
            if updates % cfg.target_refresh == 0 {
                target = net.clone();
            }
            epoch_loss += loss;
            batches += 1;
        }
        curve.push((epoch, epoch_loss / batches as f64));
        lr *= decay;
    }
    let final_loss = dataset_loss(&net, &net, data, cfg.gamma);
    if !final_loss.is_finite() {
        return Err(TrainError::Diverged {
            epoch: cfg.epochs,
            update: updates,
            loss: final_loss,
        });
    }
    Ok(TrainOutcome {
        net,
        curve,
        final_loss,
    })
}

/// `max{h(x), V_theta(x)}`: never below the heuristic.
pub struct LearnedBarrier {
    pub net: Arc<Mlp>,
    pub h: Arc<dyn Heuristic>,
}

impl Heuristic for LearnedBarrier {
    fn value(&self, x: &[f64]) -> f64 {
        self.h.value(x).max(self.net.forward(x))
    }
}

pub fn as_barrier(
    net: Arc<Mlp>,
    h: Arc<dyn Heuristic>,
    decay: f64,
) -> Result<BarrierFunction, CbfError> {
    BarrierFunction::new(
        Arc::new(LearnedBarrier { net, h }),
        decay,
        BarrierSource::Learned,
    )
}

/// Barrier evaluated by rolling a fixed policy forward from each query.
/// Expensive; intended for small systems and tests.
pub struct PolicyValueBarrier<P> {
    pub make_policy: P,
    pub model: Arc<dyn crate::dynamics::Dynamics>,
    pub h: Arc<dyn Heuristic>,
    pub horizon: usize,
}

impl<P, Q> Heuristic for PolicyValueBarrier<P>
where
    P: Fn() -> Q + Send + Sync,
    Q: Policy,
{
    fn value(&self, x: &[f64]) -> f64 {
        let mut pi = (self.make_policy)();
        policy_value_oracle(
            x,
            &mut pi,
            self.model.as_ref(),
            self.h.as_ref(),
            self.horizon,
        )
        .unwrap_or(f64::INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Control, DoubleIntegrator, Dynamics};
    use crate::env::ScalarOracle;

    #[test]
    fn dp_target_examples() {
        assert_eq!(dp_target(0.0, 0.0, 0.9), 0.0);
        assert!((dp_target(-1.0, -1.0, 0.9) + 1.0).abs() < 1e-15);
        assert!((dp_target(-1.0, 2.0, 0.9) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn single_transition_dataset() {
        let env = ScalarOracle::default();
        let cfg = CollectConfig {
            episodes: 1,
            horizon: 1,
            ..CollectConfig::default()
        };
        let d = collect_rollouts(&env, &mut ScalarOracle::policy, &cfg);
        assert_eq!(d.len(), 1);
        let again = collect_rollouts(&env, &mut ScalarOracle::policy, &cfg);
        assert_eq!(d, again);
    }

    struct Braking;

    impl Environment for Braking {
        fn name(&self) -> &str {
            "braking"
        }
        fn dynamics(&self) -> &dyn Dynamics {
            static M: std::sync::OnceLock<DoubleIntegrator> = std::sync::OnceLock::new();
            M.get_or_init(|| DoubleIntegrator::new(0.5, 1.0))
        }
        fn avoid(&self) -> Arc<dyn Heuristic> {
            Arc::new(|x: &[f64]| x[0] - 2.0)
        }
        fn contact(&self, _x: &[f64]) -> Contact {
            Contact::Clear
        }
        fn initial_state(&self) -> State {
            vec![0.0, 1.0]
        }
        fn sample_initial(&self, _rng: &mut dyn rand::RngCore) -> State {
            self.initial_state()
        }
        fn speed(&self, x: &[f64]) -> f64 {
            x[1].abs()
        }
    }

    #[test]
    fn braking_transitions_match_hand_integration() {
        let mut brake = |x: &[f64]| -> Control { vec![if x[1] > 0.0 { -1.0 } else { 0.0 }] };
        let cfg = CollectConfig {
            episodes: 1,
            horizon: 3,
            ..CollectConfig::default()
        };
        let d = collect_rollouts(&Braking, &mut brake, &cfg);
        // dt = 0.5: (0,1) -> (0.5,0.5) -> (0.75,0) -> (0.75,0)
        let xs: Vec<Vec<f64>> = d.transitions.iter().map(|t| t.x.clone()).collect();
        assert_eq!(xs, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![0.75, 0.0]]);
        assert_eq!(d.transitions[2].x_next, vec![0.75, 0.0]);
        assert_eq!(d.transitions[0].h, -2.0);
        let v = policy_value_oracle(
            &[0.0, 1.0],
            &mut brake,
            Braking.dynamics(),
            Braking.avoid().as_ref(),
            10,
        )
        .unwrap();
        assert_eq!(v, 0.75 - 2.0);
    }

    #[test]
    fn constant_target_regression() {
        let data = RolloutDataset {
            transitions: (0..64)
                .map(|i| {
                    let x = -2.0 + 4.0 * i as f64 / 63.0;
                    Transition {
                        x: vec![x],
                        x_next: vec![x],
                        h: 0.0,
                    }
                })
                .collect(),
            episodes: 1,
            ..RolloutDataset::default()
        };
        // with h = 0 and a self-loop, the fixed point is V = 0
        let cfg = TrainConfig {
            gamma: 0.5,
            hidden: vec![8, 8],
            learning_rate: 3e-3,
            batch_size: 16,
            epochs: 300,
            target_refresh: 20,
            final_lr_fraction: 1.0,
            seed: 4,
        };
        let out = train(&data, &cfg).unwrap();
        for t in &data.transitions {
            assert!(out.net.forward(&t.x).abs() < 1e-2);
        }
        let again = train(&data, &cfg).unwrap();
        assert_eq!(out.final_loss, again.final_loss);
        assert_eq!(out.curve.len(), 300);
        assert!(out.curve_csv().starts_with("epoch,loss\n0,"));
    }

    #[test]
    fn divergence_is_reported() {
        let data = RolloutDataset {
            transitions: vec![Transition {
                x: vec![1.0],
                x_next: vec![1.0],
                h: 1e200,
            }],
            episodes: 1,
            ..RolloutDataset::default()
        };
        let cfg = TrainConfig {
            hidden: vec![2],
            epochs: 5,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&data, &cfg),
            Err(TrainError::Diverged { .. })
        ));
        assert!(matches!(
            train(&RolloutDataset::default(), &cfg),
            Err(TrainError::EmptyDataset)
        ));
    }

    #[test]
    fn learned_barrier_dominates_heuristic() {
        let net = Arc::new(Mlp::new(&[1, 4, 1], 2).unwrap());
        let h: Arc<dyn Heuristic> = Arc::new(|x: &[f64]| x[0] - 1.0);
        let b = as_barrier(net.clone(), h.clone(), 0.1).unwrap();
        for i in 0..200 {
            let x = [-5.0 + i as f64 * 0.05];
            let v = b.value(&x);
            assert!(v >= h.value(&x));
            assert_eq!(v, h.value(&x).max(net.forward(&x)));
        }
    }
}
