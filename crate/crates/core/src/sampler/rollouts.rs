//! Ensemble rollouts with optional resampling-based rewiring.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policy::stream_rng;
use super::SamplerError;
use crate::cbf::{BarrierFunction, Heuristic};
use crate::cost::TrajectoryCost;
use crate::dynamics::{ControlSequence, Dynamics, State};

/// Mixed into the seed of the resampling stream so it never coincides with a
/// particle's sampling stream.
const RESAMPLE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Which particles count as safe after a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SafetyPredicate {
    /// Outside the avoid set: `h(x) <= 0`.
    #[default]
    AvoidSet,
    /// Inside the barrier's zero sublevel set: `B(x) <= 0`.
    Barrier,
    /// `B(x) <= 0` and the step satisfied the descent condition.
    BarrierDescent,
}

impl SafetyPredicate {
    pub fn needs_barrier(self) -> bool {
        !matches!(self, SafetyPredicate::AvoidSet)
    }
}

/// Particle `particle` took the history of `source` up to `step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rewire {
    pub step: usize,
    pub particle: usize,
    pub source: usize,
}

/// What the rollout needs besides the samples.
pub struct RolloutContext<'a> {
    pub model: &'a dyn Dynamics,
    pub cost: &'a TrajectoryCost,
    pub avoid: &'a dyn Heuristic,
    pub barrier: Option<&'a BarrierFunction>,
    /// `None` runs plain rollouts.
    pub rbr: Option<SafetyPredicate>,
}

/// Rolled-out ensemble before importance weighting.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble {
    /// Controls as drawn, before any rewiring.
    pub sampled: Vec<ControlSequence>,
    /// Controls actually applied, after rewiring.
    pub controls: Vec<ControlSequence>,
    /// `K + 1` states per particle. A particle whose step failed repeats its
    /// last valid state.
    pub states: Vec<Vec<State>>,
    pub costs: Vec<f64>,
    /// `alive[i][k]` is the particle weight after step `k` (index 0 is the start).
    pub alive: Vec<Vec<bool>>,
    pub rewires: Vec<Rewire>,
    /// Number of safe particles after each step `1..=K`.
    pub safe_counts: Vec<usize>,
    /// Steps at which no particle was safe and nothing was rewired.
    pub degenerate_steps: Vec<usize>,
    /// Step at which a particle's dynamics failed, if any.
    pub failed: Vec<Option<usize>>,
}

impl WeightedEnsemble {
    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.controls.first().map_or(0, |c| c.horizon())
    }

    /// Final particle weights `alive[i][K]` as 0/1.
    pub fn final_alive(&self) -> Vec<f64> {
        self.alive
            .iter()
            .map(|a| if *a.last().unwrap() { 1.0 } else { 0.0 })
            .collect()
    }

    /// Re-applies the final controls from `x0` and checks every stored state
    /// is reproduced exactly.
    pub fn replays(&self, model: &dyn Dynamics) -> bool {
        self.states
            .iter()
            .zip(&self.controls)
            .zip(&self.failed)
            .all(|((traj, u), fail)| {
                let mut x = traj[0].clone();
                let end = fail.unwrap_or(u.horizon());
                for k in 0..end {
                    match model.step(&x, u.step(k)) {
                        Ok(next) => x = next,
                        Err(_) => return false,
                    }
                    if x != traj[k + 1] {
                        return false;
                    }
                }
                if fail.is_some() && model.step(&x, u.step(end)).is_ok() {
                    return false;
                }
                traj[end..].iter().all(|s| *s == x)
            })
    }
}

struct Particle {
    states: Vec<State>,
    controls: ControlSequence,
    cost: f64,
    barrier: f64,
    alive: Vec<bool>,
    failed: Option<usize>,
}

impl Particle {
    fn copy_prefix_from(&mut self, src: &Particle, step: usize) {
        self.states.clear();
        self.states.extend_from_slice(&src.states);
        self.controls.copy_prefix_from(&src.controls, step);
        self.cost = src.cost;
        self.barrier = src.barrier;
        self.alive.clear();
        self.alive.extend_from_slice(&src.alive);
        self.failed = src.failed;
    }
}

/// Steps every particle through the horizon together. With `rbr` set, after
/// each step `j < K` unsafe particles take the state, control prefix, cost
/// and history of a safe particle chosen by systematic resampling, then keep
/// applying their own remaining controls.
pub fn rollout_ensemble(
    x0: &[f64],
    samples: Vec<ControlSequence>,
    ctx: &RolloutContext<'_>,
    seed: u64,
    key: u64,
) -> Result<WeightedEnsemble, SamplerError> {
    let horizon = samples
        .first()
        .ok_or(SamplerError::Invalid("no samples".into()))?
        .horizon();
    if horizon == 0 || samples.iter().any(|s| s.horizon() != horizon) {
        return Err(SamplerError::Invalid(
            "samples must share a horizon >= 1".into(),
        ));
    }
    if ctx.rbr.is_some_and(|p| p.needs_barrier()) && ctx.barrier.is_none() {
        return Err(SamplerError::Invalid(
            "barrier safety predicate needs a barrier".into(),
        ));
    }
    let b0 = ctx.barrier.map_or(0.0, |b| b.value(x0));
    let mut particles: Vec<Particle> = samples
        .iter()
        .map(|u| {
            let mut states = Vec::with_capacity(horizon + 1);
            states.push(x0.to_vec());
            let mut alive = Vec::with_capacity(horizon + 1);
            alive.push(true);
            Particle {
                states,
                controls: u.clone(),
                cost: 0.0,
                barrier: b0,
                alive,
                failed: None,
            }
        })
        .collect();
    let mut rewires = Vec::new();
    let mut safe_counts = Vec::with_capacity(horizon);
    let mut degenerate_steps = Vec::new();

    for k in 0..horizon {
        let step = k + 1;
        particles
            .par_iter_mut()
            .with_min_len(8)
            .for_each(|p| advance(p, k, ctx));
        let safe: Vec<bool> = particles.iter().map(|p| *p.alive.last().unwrap()).collect();
        let safe_idx: Vec<usize> = (0..safe.len()).filter(|i| safe[*i]).collect();
        safe_counts.push(safe_idx.len());
        if ctx.rbr.is_none() || step == horizon {
            continue;
        }
        let unsafe_idx: Vec<usize> = (0..safe.len()).filter(|i| !safe[*i]).collect();
        if unsafe_idx.is_empty() {
            continue;
        }
        if safe_idx.is_empty() {
            degenerate_steps.push(step);
            continue;
        }
        let offset: f64 = stream_rng(seed ^ RESAMPLE_SALT, key, step as u64).random();
        let m = unsafe_idx.len() as f64;
        for (r, &i) in unsafe_idx.iter().enumerate() {
            let pos = (r as f64 + offset) / m;
            let source = safe_idx[((pos * safe_idx.len() as f64) as usize).min(safe_idx.len() - 1)];
            let (dst, src) = pair_mut(&mut particles, i, source);
            dst.copy_prefix_from(src, step);
            rewires.push(Rewire {
                step,
                particle: i,
                source,
            });
        }
    }

    let mut out = WeightedEnsemble {
        sampled: samples,
        controls: Vec::with_capacity(particles.len()),
        states: Vec::with_capacity(particles.len()),
        costs: Vec::with_capacity(particles.len()),
        alive: Vec::with_capacity(particles.len()),
        rewires,
        safe_counts,
        degenerate_steps,
        failed: Vec::with_capacity(particles.len()),
    };
    for p in particles {
        out.controls.push(p.controls);
        out.states.push(p.states);
        out.costs.push(p.cost);
        out.alive.push(p.alive);
        out.failed.push(p.failed);
    }
    Ok(out)
}

fn advance(p: &mut Particle, k: usize, ctx: &RolloutContext<'_>) {
    let x = p.states.last().unwrap().clone();
    if p.failed.is_some() {
        p.states.push(x);
        p.alive.push(false);
        return;
    }
    let next = match ctx.model.step(&x, p.controls.step(k)) {
        Ok(next) => next,
        Err(_) => {
            p.failed = Some(k);
            p.cost = f64::INFINITY;
            p.states.push(x);
            p.alive.push(false);
            return;
        }
    };
    let h = ctx.avoid.value(&next);
    let barrier = ctx.barrier.map(|b| (p.barrier, b.value(&next), b.decay()));
    p.cost += ctx.cost.step_cost(&next, h, barrier);
    let was_alive = *p.alive.last().unwrap();
    let ok = match ctx.rbr.unwrap_or_default() {
        SafetyPredicate::AvoidSet => h <= 0.0,
        SafetyPredicate::Barrier => barrier.is_some_and(|(_, bn, _)| bn <= 0.0),
        SafetyPredicate::BarrierDescent => barrier
            .is_some_and(|(b, bn, a)| bn <= 0.0 && crate::cbf::descent_residual(b, bn, a) <= 0.0),
    };
    if let Some((_, bn, _)) = barrier {
        p.barrier = bn;
    }
    p.states.push(next);
    p.alive.push(was_alive && ok);
}

fn pair_mut<T>(v: &mut [T], dst: usize, src: usize) -> (&mut T, &T) {
    assert_ne!(dst, src);
    if dst < src {
        let (a, b) = v.split_at_mut(src);
        (&mut a[dst], &b[0])
    } else {
        let (a, b) = v.split_at_mut(dst);
        (&mut b[0], &a[src])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::QuadraticCost;
    use crate::dynamics::ScalarLinear;

    fn toy_h(x: &[f64]) -> f64 {
        (-x[0]).max(x[0] - 1.0)
    }

    fn seqs(rows: &[&[f64]]) -> Vec<ControlSequence> {
        rows.iter()
            .map(|r| ControlSequence::from_flat(r.len(), 1, r.to_vec()).unwrap())
            .collect()
    }

    fn run(samples: Vec<ControlSequence>, rbr: bool, key: u64) -> WeightedEnsemble {
        let model = ScalarLinear::new(0.0, 1.0, 1.0);
        let cost = TrajectoryCost::new(QuadraticCost::zero(1)).with_collision(1.0);
        let ctx = RolloutContext {
            model: &model,
            cost: &cost,
            avoid: &toy_h,
            barrier: None,
            rbr: rbr.then_some(SafetyPredicate::AvoidSet),
        };
        rollout_ensemble(&[0.5], samples, &ctx, 3, key).unwrap()
    }

    #[test]
    fn all_safe_matches_plain() {
        let s = seqs(&[&[0.1, 0.2, 0.3], &[0.9, 0.5, 0.0]]);
        let a = run(s.clone(), true, 0);
        let b = run(s, false, 0);
        assert_eq!(a, b);
        assert!(a.rewires.is_empty());
        assert_eq!(a.safe_counts, vec![2, 2, 2]);
    }

    #[test]
    fn unsafe_particle_takes_safe_prefix_and_keeps_tail() {
        let s = seqs(&[&[-0.5, 0.3, 0.7], &[0.2, 0.8, 0.4]]);
        let e = run(s, true, 0);
        assert_eq!(
            e.rewires,
            vec![Rewire {
                step: 1,
                particle: 0,
                source: 1
            }]
        );
        assert_eq!(e.controls[0].as_slice(), &[0.2, 0.3, 0.7]);
        assert_eq!(
            e.states[0],
            vec![vec![0.5], vec![0.2], vec![0.3], vec![0.7]]
        );
        assert_eq!(e.costs[0], 0.0);
        assert!(e.alive[0].iter().all(|a| *a));
        assert!(e.replays(&ScalarLinear::new(0.0, 1.0, 1.0)));
    }

    #[test]
    fn last_step_is_marked_not_rewired() {
        let e = run(seqs(&[&[0.5, -0.5], &[0.5, 0.5]]), true, 0);
        assert!(e.rewires.is_empty());
        assert_eq!(e.final_alive(), vec![0.0, 1.0]);
        assert_eq!(e.safe_counts, vec![2, 1]);
    }

    #[test]
    fn no_safe_particle_is_degenerate() {
        let s = seqs(&[&[-0.5, 0.3, 0.2], &[-0.1, 0.8, 0.4]]);
        let e = run(s.clone(), true, 0);
        let plain = run(s, false, 0);
        assert_eq!(e.degenerate_steps, vec![1, 2]);
        assert!(e.rewires.is_empty());
        assert_eq!(e.states, plain.states);
        assert_eq!(e.controls, plain.controls);
        assert_eq!(e.final_alive(), vec![0.0, 0.0]);
    }

    #[test]
    fn surviving_prefixes_are_nonnegative() {
        // exhaustive over a grid of sign patterns for K = 3, N = 4
        let vals = [-0.7, 0.4];
        let mut count = 0;
        for code in 0..(1u32 << 12) {
            let rows: Vec<Vec<f64>> = (0..4)
                .map(|i| {
                    (0..3)
                        .map(|k| {
                            vals[((code >> (3 * i + k)) & 1) as usize] + 0.01 * (i * 3 + k) as f64
                        })
                        .collect()
                })
                .collect();
            let samples: Vec<ControlSequence> = rows
                .iter()
                .map(|r| ControlSequence::from_flat(3, 1, r.clone()).unwrap())
                .collect();
            let e = run(samples, true, code as u64);
            assert!(e.replays(&ScalarLinear::new(0.0, 1.0, 1.0)));
            for (i, u) in e.controls.iter().enumerate() {
                let degenerate_before_end = e.degenerate_steps.iter().any(|s| *s < 3);
                if !degenerate_before_end {
                    assert!(
                        u.as_slice()[..2].iter().all(|v| *v >= 0.0),
                        "particle {i}: {:?}",
                        u.as_slice()
                    );
                    count += 1;
                }
            }
            // every logged rewire came from a particle that was safe at that step
            for r in &e.rewires {
                assert!(r.step < 3 && r.particle != r.source);
            }
        }
        assert!(count > 0);
    }

    #[test]
    fn failed_step_freezes_particle() {
        struct Wall;
        impl Dynamics for Wall {
            fn state_dim(&self) -> usize {
                1
            }
            fn control_dim(&self) -> usize {
                1
            }
            fn control_bounds(&self) -> &crate::dynamics::ControlBounds {
                unimplemented!()
            }
            fn dt(&self) -> f64 {
                1.0
            }
            fn step(&self, x: &[f64], u: &[f64]) -> Result<State, crate::dynamics::StepError> {
                if u[0] > 0.0 {
                    Ok(vec![x[0] + u[0]])
                } else {
                    Err(crate::dynamics::StepError::NonFinite { what: "state" })
                }
            }
        }
        let cost = TrajectoryCost::new(QuadraticCost::zero(1));
        let ctx = RolloutContext {
            model: &Wall,
            cost: &cost,
            avoid: &|_: &[f64]| -1.0,
            barrier: None,
            rbr: None,
        };
        let e = rollout_ensemble(
            &[0.0],
            seqs(&[&[1.0, -1.0, 1.0], &[1.0, 1.0, 1.0]]),
            &ctx,
            0,
            0,
        )
        .unwrap();
        assert_eq!(e.failed, vec![Some(1), None]);
        assert_eq!(e.costs[0], f64::INFINITY);
        assert_eq!(
            e.states[0],
            vec![vec![0.0], vec![1.0], vec![1.0], vec![1.0]]
        );
        assert!(e.replays(&Wall));
    }

    #[test]
    fn barrier_predicate_requires_barrier() {
        let model = ScalarLinear::new(0.0, 1.0, 1.0);
        let cost = TrajectoryCost::new(QuadraticCost::zero(1));
        let ctx = RolloutContext {
            model: &model,
            cost: &cost,
            avoid: &toy_h,
            barrier: None,
            rbr: Some(SafetyPredicate::Barrier),
        };
        assert!(rollout_ensemble(&[0.0], seqs(&[&[0.1]]), &ctx, 0, 0).is_err());
    }
}
