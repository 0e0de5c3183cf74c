//! Statistical and safety property checks run by the `check` subcommand.

use std::sync::Arc;

use rand::Rng;

use crate::cbf::{check_forward_invariance, BarrierFunction, QuadraticBarrier};
use crate::dynamics::{Control, DoubleIntegrator};
use crate::env::ScalarOracle;
use crate::sampler::ess;
use crate::sampler::stream_rng;
use crate::sampler::theory::{
    convexity_lemma_test, ess_theorem_trials, mppi_reduction_check, plain_variance, rbr_bound,
    rewire_marginal_test, variance_experiment, RewireSetup,
};
use crate::valuefn::policy_value_oracle;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

/// Worst relative error of the plain estimator's variance against its closed
/// form, for each horizon.
pub fn variance_law(
    horizons: &[usize],
    samples: usize,
    reps: usize,
    seed: u64,
) -> Vec<(usize, f64)> {
    horizons
        .iter()
        .map(|&k| {
            let r = variance_experiment(k, samples, reps, false, seed);
            let exact = plain_variance(k, samples);
            let worst = r
                .variance
                .iter()
                .map(|v| (v - exact).abs() / exact)
                .fold(0.0, f64::max);
            (k, worst)
        })
        .collect()
}

/// Largest `|B(x_k) - bound_k|` excess and the worst descent residual of the
/// double integrator under its quadratic barrier, from a start on `B = -0.2`.
pub fn double_integrator_invariance(steps: usize) -> (bool, bool, f64) {
    let q = QuadraticBarrier::for_double_integrator(0.1, [1.0, 2.0], 0.1).expect("stable gains");
    let qv = q.clone();
    let barrier = BarrierFunction::from_heuristic(Arc::new(move |x: &[f64]| qv.value(x)), 0.1)
        .expect("valid decay");
    let dir = [0.6, -0.8];
    let r = (0.8 / (q.value(&dir) + 1.0)).sqrt();
    let x0 = [dir[0] * r, dir[1] * r];
    let mut policy = move |x: &[f64]| -> Control { vec![q.control(x)] };
    let rep = check_forward_invariance(
        &x0,
        &mut policy,
        &barrier,
        &DoubleIntegrator::new(0.1, 1e9),
        steps,
        1e-12,
    )
    .expect("start is safe");
    let worst = rep
        .residuals
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (rep.bound_holds, rep.stays_safe, worst)
}

/// Counts violations of `V(x) >= h(x)` and `V(x) >= V(f(x))` for the oracle
/// system's finite-horizon policy value, on `states` random states.
pub fn value_function_properties(states: usize, horizon: usize, seed: u64) -> (usize, usize) {
    let env = ScalarOracle::default();
    let h = |x: &[f64]| ScalarOracle::heuristic(x);
    let mut rng = stream_rng(seed, 0, 0);
    let (mut above_h, mut monotone) = (0, 0);
    for _ in 0..states {
        let x = [rng.random_range(env.range.0..=env.range.1)];
        let v = policy_value_oracle(&x, &mut ScalarOracle::policy, &env.model, &h, horizon)
            .expect("stable system");
        let next = crate::dynamics::Dynamics::step(&env.model, &x, &ScalarOracle::policy(&x))
            .expect("stable system");
        let v_next = policy_value_oracle(
            &next,
            &mut ScalarOracle::policy,
            &env.model,
            &h,
            horizon - 1,
        )
        .expect("stable system");
        above_h += (v < h(&x)) as usize;
        monotone += (v < v_next) as usize;
    }
    (above_h, monotone)
}

/// Every property check at its default size.
pub fn theorem_checks(seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();

    let law = variance_law(&[2, 4, 6], 1000, 20_000, seed);
    let worst = law.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    out.push(outcome(
        "variance-law",
        worst < 0.1,
        format!("worst relative error {worst:.4} (tolerance 0.1)"),
    ));

    let (k, n) = (10, 16);
    let rbr = variance_experiment(k, n, 20_000, true, seed);
    let bound = rbr_bound(k, n);
    let plain = plain_variance(k, n);
    let var = rbr.variance.iter().copied().fold(0.0, f64::max);
    out.push(outcome(
        "rbr-variance",
        var <= bound && var <= plain / 10.0,
        format!("max variance {var:.4}, bound {bound:.4}, plain {plain:.4}"),
    ));

    let rbr = variance_experiment(k, n, 10_000, true, seed.wrapping_add(1));
    let z = rbr
        .mean
        .iter()
        .zip(rbr.standard_error())
        .map(|(m, se)| (m - 0.5).abs() / se)
        .fold(0.0, f64::max);
    out.push(outcome(
        "rbr-unbiased",
        z <= 4.0,
        format!("max |z| {z:.3} (tolerance 4)"),
    ));

    let m = rewire_marginal_test(RewireSetup::default(), 100_000, seed);
    out.push(outcome(
        "rewire-marginal",
        m.passes(),
        format!(
            "KS paired {:.5}, independent {:.5} (critical {:.5}); exact {:.5} (critical {:.5})",
            m.ks_paired, m.ks_independent, m.critical_two_sample, m.ks_exact, m.critical_one_sample
        ),
    ));

    let t = ess_theorem_trials(10_000, seed);
    let uniform = ess(&[0.125; 8]).map(|e| e.value).unwrap_or(0.0);
    let one_hot = ess(&[0.0, 0.0, 1.0, 0.0]).map(|e| e.value).unwrap_or(0.0);
    out.push(outcome(
        "ess-ordering",
        t.violations == 0 && t.premise_held == t.trials && uniform == 8.0 && one_hot == 1.0,
        format!(
            "{} violations in {} instances ({} met the premise); uniform {uniform}, one-hot {one_hot}",
            t.violations, t.trials, t.premise_held
        ),
    ));

    let err = mppi_reduction_check(1000, seed);
    out.push(outcome(
        "mppi-reduction",
        err < 1e-10,
        format!("max relative error {err:.3e}"),
    ));

    let (bound_holds, safe, worst) = double_integrator_invariance(200);
    out.push(outcome(
        "forward-invariance",
        bound_holds && safe && worst <= 0.0,
        format!("bound holds {bound_holds}, stays safe {safe}, worst residual {worst:.3e}"),
    ));

    let c = convexity_lemma_test(1000, 200, seed);
    out.push(outcome(
        "convexity",
        c.estimate_outside == 0 && c.exact_outside == 0 && !c.nonconvex_mean_in_set,
        format!(
            "{} estimates and {} exact means outside the convex set; two-piece mean {} in set: {}",
            c.estimate_outside, c.exact_outside, c.nonconvex_mean, c.nonconvex_mean_in_set
        ),
    ));

    let (p1, p2) = value_function_properties(1000, 60, seed);
    out.push(outcome(
        "value-function",
        p1 == 0 && p2 == 0,
        format!("{p1} states below h, {p2} states below their successor"),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_properties_hold_exactly() {
        assert_eq!(value_function_properties(200, 30, 1), (0, 0));
    }

    #[test]
    fn invariance_construction_holds() {
        let (bound, safe, worst) = double_integrator_invariance(200);
        assert!(bound && safe && worst <= 0.0);
    }
}
