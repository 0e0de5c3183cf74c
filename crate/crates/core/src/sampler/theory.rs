//! Monte Carlo checks of the estimator's statistical properties on small
//! constructed problems.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::policy::{gaussian_log_density, stream_rng};
use super::rollouts::{rollout_ensemble, RolloutContext, SafetyPredicate};
use super::weights::{ess, mppi_weights, normalize, vi_weights};
use crate::cost::{QuadraticCost, TrajectoryCost};
use crate::dynamics::{ControlSequence, ScalarLinear};

/// Per-coordinate mean and variance of repeated estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub horizon: usize,
    pub samples: usize,
    pub reps: usize,
    pub rbr: bool,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl VarianceReport {
    /// Standard error of the mean estimate per coordinate.
    pub fn standard_error(&self) -> Vec<f64> {
        self.variance
            .iter()
            .map(|v| (v / self.reps as f64).sqrt())
            .collect()
    }
}

/// Variance of the plain importance-sampling estimator on the toy problem.
pub fn plain_variance(horizon: usize, samples: usize) -> f64 {
    (2f64.powi(horizon as i32) / 3.0 - 0.25) / samples as f64
}

/// Ceiling on the rewired estimator's variance on the toy problem.
pub fn rbr_bound(horizon: usize, samples: usize) -> f64 {
    let t = 0.5f64.powi(samples as i32);
    let k = (horizon - 1) as i32;
    1.25 * (1.0 / (1.0 - t)).powi(k) + 0.25 * (1.0 - t).powi(k) - 0.75
}

/// Toy problem: controls uniform on `[-1, 1]^K`, target uniform on
/// `[0, 1]^K`. Runs `reps` independent estimators of the target mean with
/// `samples` particles each and returns their spread.
pub fn variance_experiment(
    horizon: usize,
    samples: usize,
    reps: usize,
    rbr: bool,
    seed: u64,
) -> VarianceReport {
    assert!(horizon >= 1 && samples >= 1 && reps >= 2);
    let mut sum = vec![0.0; horizon];
    let mut sum_sq = vec![0.0; horizon];
    let mut est = vec![0.0; horizon];
    for rep in 0..reps {
        if rbr {
            rbr_estimate(horizon, samples, seed, rep as u64, &mut est);
        } else {
            plain_estimate(horizon, samples, seed, rep as u64, &mut est);
        }
        for k in 0..horizon {
            sum[k] += est[k];
            sum_sq[k] += est[k] * est[k];
        }
    }
    let n = reps as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let variance = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| (sq - n * m * m) / (n - 1.0))
        .collect();
    VarianceReport {
        horizon,
        samples,
        reps,
        rbr,
        mean,
        variance,
    }
}

fn plain_estimate(horizon: usize, samples: usize, seed: u64, rep: u64, out: &mut [f64]) {
    let mut rng = stream_rng(seed, rep, 0);
    let scale = 2f64.powi(horizon as i32);
    let mut u = vec![0.0; horizon];
    out.fill(0.0);
    for _ in 0..samples {
        for v in u.iter_mut() {
            *v = rng.random_range(-1.0..=1.0);
        }
        if u.iter().all(|v| *v >= 0.0) {
            for (o, v) in out.iter_mut().zip(&u) {
                *o += scale * v;
            }
        }
    }
    for o in out.iter_mut() {
        *o /= samples as f64;
    }
}

fn toy_avoid(x: &[f64]) -> f64 {
    (-x[0]).max(x[0] - 1.0)
}

fn rbr_estimate(horizon: usize, samples: usize, seed: u64, rep: u64, out: &mut [f64]) {
    let model = ScalarLinear::new(0.0, 1.0, 1.0);
    let cost = TrajectoryCost::new(QuadraticCost::zero(1));
    let ctx = RolloutContext {
        model: &model,
        cost: &cost,
        avoid: &toy_avoid,
        barrier: None,
        rbr: Some(SafetyPredicate::AvoidSet),
    };
    let draws: Vec<ControlSequence> = (0..samples)
        .map(|i| {
            let mut rng = stream_rng(seed, rep, i as u64);
            let data = (0..horizon).map(|_| rng.random_range(-1.0..=1.0)).collect();
            ControlSequence::from_flat(horizon, 1, data).unwrap()
        })
        .collect();
    let e = rollout_ensemble(&[0.5], draws, &ctx, seed, rep).expect("toy rollout");
    // probability that a particle survives: every resampling step finds a
    // safe particle and the final, unresampled step lands in [0, 1]
    let t = 0.5f64.powi(samples as i32);
    let survive = 0.5 * (1.0 - t).powi(horizon as i32 - 1);
    out.fill(0.0);
    for (u, w) in e.controls.iter().zip(e.final_alive()) {
        if w > 0.0 {
            for (o, v) in out.iter_mut().zip(u.as_slice()) {
                *o += v / survive;
            }
        }
    }
    for o in out.iter_mut() {
        *o /= samples as f64;
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// One-sample Kolmogorov-Smirnov statistic against `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n)
                .abs()
                .max((((i + 1) as f64) / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical value of the KS statistic at level `alpha` for
/// sample sizes `n` and `m` (`m = None` for the one-sample test).
pub fn ks_critical(alpha: f64, n: usize, m: Option<usize>) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    match m {
        Some(m) => c * ((n + m) as f64 / (n * m) as f64).sqrt(),
        None => c / (n as f64).sqrt(),
    }
}

/// Rewiring construction on `U[lo, hi]` with safe interval `[s_lo, s_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewireSetup {
    pub support: (f64, f64),
    pub safe: (f64, f64),
}

impl Default for RewireSetup {
    fn default() -> Self {
        Self {
            support: (-1.0, 1.0),
            safe: (0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalReport {
    /// Draws from the density conditioned on the safe set.
    pub conditional: Vec<f64>,
    /// `b` if it is safe, otherwise the paired conditional draw.
    pub rewired: Vec<f64>,
    /// KS statistic between `conditional` and `rewired`.
    pub ks_paired: f64,
    /// KS statistic between `rewired` and an independent conditional sample.
    pub ks_independent: f64,
    /// KS statistic between `rewired` and the exact conditional CDF.
    pub ks_exact: f64,
    pub critical_two_sample: f64,
    pub critical_one_sample: f64,
    pub rewired_mean: f64,
}

impl MarginalReport {
    pub fn passes(&self) -> bool {
        self.ks_paired < self.critical_two_sample
            && self.ks_independent < self.critical_two_sample
            && self.ks_exact < self.critical_one_sample
    }
}

/// Draws pairs `a ~ f(. | S)`, `b ~ f` and forms the rewired `b~`.
pub fn rewire_marginal_test(setup: RewireSetup, n: usize, seed: u64) -> MarginalReport {
    let (lo, hi) = setup.support;
    let (s_lo, s_hi) = setup.safe;
    let mut rng = stream_rng(seed, 0, 0);
    let mut conditional = Vec::with_capacity(n);
    let mut rewired = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.random_range(s_lo..=s_hi);
        let b = rng.random_range(lo..=hi);
        conditional.push(a);
        rewired.push(if (s_lo..=s_hi).contains(&b) { b } else { a });
    }
    let mut rng = stream_rng(seed, 1, 0);
    let fresh: Vec<f64> = (0..n).map(|_| rng.random_range(s_lo..=s_hi)).collect();
    let cdf = |x: f64| ((x - s_lo) / (s_hi - s_lo)).clamp(0.0, 1.0);
    MarginalReport {
        ks_paired: ks_two_sample(&conditional, &rewired),
        ks_independent: ks_two_sample(&fresh, &rewired),
        ks_exact: ks_one_sample(&rewired, cdf),
        critical_two_sample: ks_critical(0.01, n, Some(n)),
        critical_one_sample: ks_critical(0.01, n, None),
        rewired_mean: rewired.iter().sum::<f64>() / n as f64,
        conditional,
        rewired,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssCheck {
    pub premise: bool,
    pub ess_before: f64,
    pub ess_after: f64,
}

impl EssCheck {
    /// The ordering holds, or the premise does not apply. Allows one part in
    /// 1e12 of rounding.
    pub fn holds(&self) -> bool {
        !self.premise || self.ess_after >= self.ess_before * (1.0 - 1e-12)
    }
}

/// `w` is zero where `c` is nonzero. Compares the ESS of `w` with that of
/// `w + c` when `|c|_1 <= 2 N/(N-1) |w|_2^2 / |w|_1`.
pub fn ess_theorem_check(w: &[f64], c: &[f64]) -> EssCheck {
    assert_eq!(w.len(), c.len());
    let n = w.len() as f64;
    let l1: f64 = w.iter().sum();
    let l2sq: f64 = w.iter().map(|x| x * x).sum();
    let c1: f64 = c.iter().map(|x| x.abs()).sum();
    let premise = n >= 2.0 && c1 <= 2.0 * n / (n - 1.0) * l2sq / l1;
    let after: Vec<f64> = w.iter().zip(c).map(|(a, b)| a + b).collect();
    EssCheck {
        premise,
        ess_before: ess(w).map_or(0.0, |e| e.value),
        ess_after: ess(&after).map_or(0.0, |e| e.value),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialCount {
    pub trials: usize,
    pub premise_held: usize,
    pub violations: usize,
}

/// Random `(w, c)` pairs drawn to satisfy the premise.
pub fn ess_theorem_trials(trials: usize, seed: u64) -> TrialCount {
    let mut out = TrialCount {
        trials,
        premise_held: 0,
        violations: 0,
    };
    for t in 0..trials {
        let mut rng = stream_rng(seed, t as u64, 0);
        let n = rng.random_range(2..=64usize);
        let m = rng.random_range(1..=n);
        let spread = rng.random_range(0.0..4.0);
        let mut w = vec![0.0; n];
        for x in &mut w[..m] {
            *x = (spread * rng.random::<f64>()).exp() * rng.random::<f64>();
        }
        if w.iter().all(|x| *x == 0.0) {
            w[0] = 1.0;
        }
        let l1: f64 = w.iter().sum();
        let l2sq: f64 = w.iter().map(|x| x * x).sum();
        let budget = 2.0 * n as f64 / (n - 1) as f64 * l2sq / l1;
        let mut c = vec![0.0; n];
        for x in &mut c[m..] {
            *x = rng.random::<f64>().powf(rng.random_range(0.2..5.0));
        }
        let c1: f64 = c.iter().sum();
        if c1 > 0.0 {
            let target = budget * rng.random::<f64>().sqrt();
            for x in &mut c {
                *x *= target / c1;
            }
        }
        let r = ess_theorem_check(&w, &c);
        out.premise_held += r.premise as usize;
        out.violations += (!r.holds()) as usize;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub trials: usize,
    /// Trials with no sample in the safe interval.
    pub skipped: usize,
    pub estimate_outside: usize,
    pub exact_outside: usize,
    /// Conditional mean on `[-1, -0.5] U [0.5, 1]` and whether it lies in
    /// that set.
    pub nonconvex_mean: f64,
    pub nonconvex_mean_in_set: bool,
}

/// One-step problem with a uniform proposal on `[-1, 1]` and a target
/// uniform on a random interval `[a, b]`.
pub fn convexity_lemma_test(trials: usize, samples: usize, seed: u64) -> ConvexityReport {
    let mut report = ConvexityReport {
        trials,
        skipped: 0,
        estimate_outside: 0,
        exact_outside: 0,
        nonconvex_mean: 0.0,
        nonconvex_mean_in_set: false,
    };
    for t in 0..trials {
        let mut rng = stream_rng(seed, t as u64, 0);
        let (p, q): (f64, f64) = (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        let (a, b) = (p.min(q), p.max(q));
        let us: Vec<f64> = (0..samples).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let w: Vec<f64> = us
            .iter()
            .map(|u| if (a..=b).contains(u) { 1.0 } else { 0.0 })
            .collect();
        let Ok(w) = normalize(&w) else {
            report.skipped += 1;
            continue;
        };
        let est: f64 = us.iter().zip(&w).map(|(u, w)| u * w).sum();
        report.estimate_outside += !(a..=b).contains(&est) as usize;
        let exact = 0.5 * (a + b);
        report.exact_outside += !(a..=b).contains(&exact) as usize;
    }
    // symmetric two-piece set: by symmetry the mean is 0
    let pieces = [(-1.0, -0.5), (0.5, 1.0)];
    let mass: f64 = pieces.iter().map(|(l, h)| h - l).sum();
    report.nonconvex_mean = pieces
        .iter()
        .map(|(l, h)| 0.5 * (h * h - l * l))
        .sum::<f64>()
        / mass;
    report.nonconvex_mean_in_set = pieces
        .iter()
        .any(|(l, h)| (*l..=*h).contains(&report.nonconvex_mean));
    report
}

/// Largest relative difference between normalized weights from the general
/// formula (zero-mean prior, proposal centred on the sampling mean) and the
/// MPPI formula, over random instances.
pub fn mppi_reduction_check(instances: usize, seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..instances {
        let mut rng = stream_rng(seed, t as u64, 0);
        let horizon = rng.random_range(1..=6usize);
        let dim = rng.random_range(1..=3usize);
        let n = rng.random_range(2..=32usize);
        let temperature = rng.random_range(0.2..5.0);
        let variance: Vec<f64> = (0..dim).map(|_| rng.random_range(0.25..4.0)).collect();
        let mean_data: Vec<f64> = (0..horizon * dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let mean = ControlSequence::from_flat(horizon, dim, mean_data).unwrap();
        let controls: Vec<ControlSequence> = (0..n)
            .map(|_| {
                let data = mean
                    .as_slice()
                    .iter()
                    .enumerate()
                    .map(|(j, m)| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + variance[j % dim].sqrt() * z
                    })
                    .collect();
                ControlSequence::from_flat(horizon, dim, data).unwrap()
            })
            .collect();
        let costs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let zero = vec![0.0; horizon * dim];
        let lp: Vec<f64> = controls
            .iter()
            .map(|u| gaussian_log_density(u.as_slice(), &zero, &variance))
            .collect();
        let lr: Vec<f64> = controls
            .iter()
            .map(|u| gaussian_log_density(u.as_slice(), mean.as_slice(), &variance))
            .collect();
        let general = normalize(&vi_weights(&costs, &lp, &lr, temperature)).unwrap();
        let special = normalize(&mppi_weights(
            &costs,
            &controls,
            &mean,
            &variance,
            temperature,
        ))
        .unwrap();
        for (g, s) in general.iter().zip(&special) {
            let scale = g.abs().max(s.abs());
            if scale > 0.0 {
                worst = worst.max((g - s).abs() / scale);
            }
        }
    }
    worst
}
