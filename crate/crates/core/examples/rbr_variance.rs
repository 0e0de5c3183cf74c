//! Variance of the plain and resampled estimators on the uniform toy problem.

use shield_vimpc::sampler::theory::{plain_variance, rbr_bound, variance_experiment};

fn main() {
    let samples = 16;
    println!("{:>3} {:>12} {:>12} {:>12} {:>12}", "K", "plain", "closed form", "rbr", "rbr bound");
    for horizon in [2, 4, 6, 8, 10] {
        let plain = variance_experiment(horizon, samples, 5_000, false, 1);
        let rbr = variance_experiment(horizon, samples, 5_000, true, 1);
        let worst = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        println!(
            "{horizon:>3} {:>12.5} {:>12.5} {:>12.5} {:>12.5}",
            worst(&plain.variance),
            plain_variance(horizon, samples),
            worst(&rbr.variance),
            rbr_bound(horizon, samples)
        );
    }
}
