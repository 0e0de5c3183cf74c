//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test --release --test acceptance`.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;

use shield_vimpc::cbf::Heuristic;
use shield_vimpc::config::{ScenarioConfig, SweepParameter, Variant};
use shield_vimpc::env::ScalarOracle;
use shield_vimpc::experiments::checks::{
    double_integrator_invariance, value_function_properties, variance_law,
};
use shield_vimpc::experiments::metrics::timing_report;
use shield_vimpc::experiments::sweep::{run_sweep, SweepSpec, SweepTable};
use shield_vimpc::experiments::{Scenario, TrialResult};
use shield_vimpc::sampler::theory::{
    ess_theorem_trials, mppi_reduction_check, plain_variance, rbr_bound, rewire_marginal_test,
    variance_experiment, RewireSetup,
};
use shield_vimpc::sampler::{ess, stream_rng, Algorithm};
use shield_vimpc::valuefn::{model_file, LearnedBarrier, Mlp};

const SEED: u64 = 0;

struct Outcome {
    passed: bool,
    detail: String,
    /// Exact record of what was computed, compared across reruns.
    artifact: String,
}

fn variant(algorithm: Algorithm, rbr: bool) -> Variant {
    Variant::new(algorithm, rbr)
}

fn variance_law_criterion() -> Outcome {
    let started = Instant::now();
    let law = variance_law(&[2, 4, 6], 1000, 20_000, SEED);
    let secs = started.elapsed().as_secs_f64();
    let worst = law.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Outcome {
        passed: worst < 0.1 && secs < 60.0,
        detail: format!("worst relative error {worst:.4} over K=2,4,6 in {secs:.1}s"),
        artifact: format!("{law:?}"),
    }
}

fn rbr_variance_criterion() -> Outcome {
    let started = Instant::now();
    let r = variance_experiment(10, 16, 20_000, true, SEED);
    let secs = started.elapsed().as_secs_f64();
    let (bound, plain) = (rbr_bound(10, 16), plain_variance(10, 16));
    let worst = r.variance.iter().copied().fold(0.0, f64::max);
    Outcome {
        passed: worst <= bound && worst <= plain / 10.0 && secs < 60.0,
        detail: format!(
            "max variance {worst:.5}, bound {bound:.5}, plain/10 {:.5}, {secs:.1}s",
            plain / 10.0
        ),
        artifact: format!("{r:?}"),
    }
}

fn rbr_unbiased_criterion() -> Outcome {
    let r = variance_experiment(10, 16, 10_000, true, SEED + 1);
    let z = r
        .mean
        .iter()
        .zip(r.standard_error())
        .map(|(m, se)| (m - 0.5).abs() / se)
        .fold(0.0, f64::max);
    Outcome {
        passed: z <= 4.0,
        detail: format!("max |mean - 0.5| / se = {z:.3}"),
        artifact: format!("{r:?}"),
    }
}

fn rewire_marginal_criterion() -> Outcome {
    let m = rewire_marginal_test(RewireSetup::default(), 100_000, SEED);
    Outcome {
        passed: m.passes(),
        detail: format!(
            "KS {:.5} vs 1% critical {:.5}; one-sample {:.5} vs {:.5}",
            m.ks_paired, m.critical_two_sample, m.ks_exact, m.critical_one_sample
        ),
        artifact: format!("{m:?}"),
    }
}

fn ess_criterion() -> Outcome {
    let t = ess_theorem_trials(10_000, SEED);
    let n = 64;
    let uniform = ess(&vec![1.0 / n as f64; n]).unwrap().value;
    let mut one_hot = vec![0.0; n];
    one_hot[17] = 1.0;
    let one_hot = ess(&one_hot).unwrap().value;
    Outcome {
        passed: t.violations == 0
            && t.premise_held == t.trials
            && uniform == n as f64
            && one_hot == 1.0,
        detail: format!(
            "{} violations in {} instances; uniform ESS {uniform} (N={n}), one-hot ESS {one_hot}",
            t.violations, t.trials
        ),
        artifact: format!("{t:?} {uniform:?} {one_hot:?}"),
    }
}

fn mppi_reduction_criterion() -> Outcome {
    let err = mppi_reduction_check(1000, SEED);
    Outcome {
        passed: err < 1e-10,
        detail: format!("max relative error {err:.3e} over 1000 instances"),
        artifact: format!("{err:?}"),
    }
}

fn forward_invariance_criterion() -> Outcome {
    let (bound_holds, safe, worst) = double_integrator_invariance(200);
    Outcome {
        passed: bound_holds && safe && worst <= 0.0,
        detail: format!(
            "decay bound holds {bound_holds}, stays safe {safe}, worst residual {worst:.3e}"
        ),
        artifact: format!("{bound_holds} {safe} {worst:?}"),
    }
}

/// `|a - fd| / |a|` over the parameter gradient, with central differences.
fn gradient_error(net: &Mlp, x: &[f64]) -> f64 {
    let mut grad = vec![0.0; net.params().len()];
    net.accumulate_gradient(x, &mut grad, |_| 1.0);
    let h = 1e-5;
    let (mut diff, mut norm) = (0.0, 0.0);
    for (i, g) in grad.iter().enumerate() {
        let mut p = net.clone();
        p.params_mut()[i] += h;
        let up = p.forward(x);
        p.params_mut()[i] -= 2.0 * h;
        let fd = (up - p.forward(x)) / (2.0 * h);
        diff += (fd - g) * (fd - g);
        norm += g * g;
    }
    (diff / norm).sqrt()
}

fn training_criterion() -> Outcome {
    let scenario = Scenario::new(ScenarioConfig::oracle()).unwrap();
    let report = scenario.train_barrier().unwrap();
    let sup = report.oracle_error.unwrap();
    let net = Arc::new(report.outcome.net);
    let wrapper = LearnedBarrier {
        net: net.clone(),
        h: Arc::new(|x: &[f64]| ScalarOracle::heuristic(x)),
    };
    let mut rng = stream_rng(SEED, 8, 0);
    let mut below = 0;
    for _ in 0..10_000 {
        let x = [rng.random_range(-6.0..6.0)];
        below += (wrapper.value(&x) < ScalarOracle::heuristic(&x)) as usize;
    }
    let grad = (0..20)
        .map(|_| gradient_error(&net, &[rng.random_range(-3.0..3.0)]))
        .fold(0.0, f64::max);
    Outcome {
        passed: sup < 0.1 && below == 0 && grad < 1e-5,
        detail: format!("sup error {sup:.4}, {below} of 10000 states with B < h, gradient relative error {grad:.2e}"),
        artifact: format!("{:?} {sup:?}", model_file::to_bytes(&net)),
    }
}

fn value_function_criterion() -> Outcome {
    let (p1, p2) = value_function_properties(1000, 60, SEED);
    Outcome {
        passed: p1 == 0 && p2 == 0,
        detail: format!("{p1} states with V < h, {p2} states with V below its successor's value"),
        artifact: format!("{p1} {p2}"),
    }
}

fn algorithm_sweep(scenario: &Scenario, variants: Vec<Variant>, trials: usize) -> SweepTable {
    let spec = SweepSpec {
        parameter: SweepParameter::Algorithm,
        values: Vec::new(),
        variants,
        trials,
        seed: SEED,
    };
    run_sweep(scenario, &spec).unwrap()
}

fn crash_rate(table: &SweepTable, v: Variant) -> f64 {
    table.row(&v.to_string(), v).unwrap().crash_rate
}

fn safety_criterion(vehicle: &Scenario, drone: &Scenario) -> Outcome {
    let (mppi, shield, ns) = (
        variant(Algorithm::Mppi, false),
        variant(Algorithm::ShieldMppi, false),
        variant(Algorithm::NsMppi, false),
    );
    let track = algorithm_sweep(vehicle, vec![mppi, shield, ns], 20);
    let (m, s, n) = (
        crash_rate(&track, mppi),
        crash_rate(&track, shield),
        crash_rate(&track, ns),
    );
    let corridor = algorithm_sweep(drone, vec![mppi, ns], 20);
    let (dm, dn) = (crash_rate(&corridor, mppi), crash_rate(&corridor, ns));
    Outcome {
        passed: n <= s && s <= m && n == 0.0 && dn == 0.0 && dm > 0.0,
        detail: format!(
            "track crash rates MPPI {m}, S-MPPI {s}, NS-MPPI {n}; corridor MPPI {dm}, NS-MPPI {dn}"
        ),
        artifact: format!("{}{}", track.trials_csv(), corridor.trials_csv()),
    }
}

fn slalom_config() -> ScenarioConfig {
    ScenarioConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/vehicle_slalom.toml"))
        .unwrap()
}

fn collisions(cfg: &ScenarioConfig, samples: usize, v: Variant, trials: u64) -> Vec<TrialResult> {
    let mut cfg = cfg.clone();
    cfg.controller.samples = samples;
    let scenario = Scenario::new(cfg).unwrap();
    (0..trials)
        .map(|i| scenario.run_trial(v, SEED + i))
        .collect()
}

/// Every trial field except the wall-clock step times.
fn trial_record(trials: &[TrialResult]) -> String {
    trials
        .iter()
        .map(|t| {
            format!(
                "{} {} {} {} {} {} {:?} {:?} {} {:?}\n",
                t.variant, t.seed, t.crash, t.collision, t.collision_steps, t.steps, t.mean_velocity, t.ess, t.reached_goal, t.cause
            )
        })
        .collect()
}

fn efficiency_criterion() -> Outcome {
    let cfg = slalom_config();
    let rbr = collisions(&cfg, 50, variant(Algorithm::ShieldMppi, true), 50);
    let plain = collisions(&cfg, 200, variant(Algorithm::ShieldMppi, false), 50);
    let rate = |t: &[TrialResult]| t.iter().filter(|r| r.collision).count() as f64 / t.len() as f64;
    let (a, b) = (rate(&rbr), rate(&plain));
    Outcome {
        passed: a <= b,
        detail: format!("slalom collision rate S-MPPI+RBR N=50 {a}, S-MPPI N=200 {b}"),
        artifact: trial_record(&rbr) + &trial_record(&plain),
    }
}

fn timing_criterion(vehicle: &Scenario) -> Outcome {
    let rows = timing_report(
        vehicle,
        &[
            variant(Algorithm::Mppi, false),
            variant(Algorithm::NsMppi, false),
        ],
        100,
        10,
        SEED,
    )
    .unwrap();
    let (m, n) = (rows[0].rate(), rows[1].rate());
    Outcome {
        passed: m >= n,
        detail: format!("mean control rate MPPI {m:.1} Hz, NS-MPPI {n:.1} Hz"),
        // wall-clock times are not reproducible; the step counts are
        artifact: format!("{} {}", rows[0].steps, rows[1].steps),
    }
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn all_criteria<'a>(vehicle: &'a Scenario, drone: &'a Scenario) -> Vec<Criterion<'a>> {
    vec![
        ("variance law", Box::new(variance_law_criterion)),
        ("rbr variance reduction", Box::new(rbr_variance_criterion)),
        ("rbr unbiasedness", Box::new(rbr_unbiased_criterion)),
        ("rewiring marginal", Box::new(rewire_marginal_criterion)),
        ("ess ordering", Box::new(ess_criterion)),
        ("mppi as vi reduction", Box::new(mppi_reduction_criterion)),
        ("forward invariance", Box::new(forward_invariance_criterion)),
        ("barrier training", Box::new(training_criterion)),
        (
            "value function properties",
            Box::new(value_function_criterion),
        ),
        (
            "safety ordering",
            Box::new(|| safety_criterion(vehicle, drone)),
        ),
        ("sample efficiency", Box::new(efficiency_criterion)),
        ("timing ordering", Box::new(|| timing_criterion(vehicle))),
    ]
}

fn main() {
    let vehicle = Scenario::new(ScenarioConfig::vehicle()).unwrap();
    let drone = Scenario::new(ScenarioConfig::drone()).unwrap();

    let criteria = all_criteria(&vehicle, &drone);

    let mut failed = 0;
    let mut report = |i: usize, name: &str, passed: bool, detail: &str, secs: f64| {
        failed += !passed as usize;
        println!(
            "[{}] {:>2} {name}: {detail} ({secs:.1}s)",
            if passed { "PASS" } else { "FAIL" },
            i
        );
    };
    let mut artifacts = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let o = run();
        report(
            i + 1,
            name,
            o.passed,
            &o.detail,
            started.elapsed().as_secs_f64(),
        );
        artifacts.push(o.artifact);
    }

    // Fresh scenarios so nothing cached from the first pass is reused.
    let started = Instant::now();
    let vehicle = Scenario::new(ScenarioConfig::vehicle()).unwrap();
    let drone = Scenario::new(ScenarioConfig::drone()).unwrap();
    let rerun = all_criteria(&vehicle, &drone);
    let differing: Vec<&str> = rerun
        .iter()
        .zip(&artifacts)
        .filter(|((_, run), first)| run().artifact != **first)
        .map(|((name, _), _)| *name)
        .collect();
    let detail = if differing.is_empty() {
        "all 12 artifacts regenerated bit-identically".to_string()
    } else {
        format!("artifacts differ on rerun: {}", differing.join(", "))
    };
    report(
        13,
        "determinism",
        differing.is_empty(),
        &detail,
        started.elapsed().as_secs_f64(),
    );

    if failed > 0 {
        println!("{failed} of 13 criteria failed");
        std::process::exit(1);
    }
    println!("all 13 criteria passed");
}
