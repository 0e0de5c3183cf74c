//! Normalized effective sample size of MPPI updates with and without
//! resampling-based rollouts.

use shield_vimpc::config::{ScenarioConfig, Variant};
use shield_vimpc::experiments::metrics::{ess_histogram, histogram_csv};
use shield_vimpc::experiments::Scenario;
use shield_vimpc::sampler::Algorithm;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ScenarioConfig::vehicle();
    cfg.controller.samples = 50;
    let scenario = Scenario::new(cfg)?;
    let variants = [Variant::new(Algorithm::ShieldMppi, false), Variant::new(Algorithm::ShieldMppi, true)];
    let hists = ess_histogram(&scenario, &variants, 200, 10, 0)?;
    print!("{}", histogram_csv(&hists));
    for h in &hists {
        let mean = h.normalized.iter().sum::<f64>() / h.normalized.len() as f64;
        println!("{}: mean ESS/N {mean:.3}", h.variant);
    }
    Ok(())
}
