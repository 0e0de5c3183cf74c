//! MPPI against Shield-MPPI on the built-in circuit at 10 m/s.

use shield_vimpc::config::{ScenarioConfig, Variant};
use shield_vimpc::experiments::Scenario;
use shield_vimpc::sampler::Algorithm;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ScenarioConfig::vehicle();
    cfg.experiment.episode_steps = 400;
    let scenario = Scenario::new(cfg)?;
    for variant in [Variant::new(Algorithm::Mppi, false), Variant::new(Algorithm::ShieldMppi, false)] {
        for seed in 0..3 {
            let r = scenario.run_trial(variant, seed);
            println!(
                "{variant:<12} seed {seed}  steps {:>3}  crash {:<5}  off-track steps {:>3}  mean v {:.2}",
                r.steps, r.crash, r.collision_steps, r.mean_velocity
            );
        }
    }
    Ok(())
}
