//! Trains the drone barrier in-process, then flies MPPI and NS-MPPI through
//! the two-block corridor.

use shield_vimpc::config::{ScenarioConfig, Variant};
use shield_vimpc::experiments::Scenario;
use shield_vimpc::sampler::Algorithm;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::new(ScenarioConfig::drone())?;
    let report = scenario.train_barrier()?;
    println!("barrier trained on {} transitions", report.transitions);
    let scenario = scenario.with_learned(std::sync::Arc::new(report.outcome.net));
    for variant in [Variant::new(Algorithm::Mppi, false), Variant::new(Algorithm::NsMppi, false)] {
        let runs: Vec<_> = (0..5).map(|seed| scenario.run_trial(variant, seed)).collect();
        let crashes = runs.iter().filter(|r| r.crash).count();
        let goals = runs.iter().filter(|r| r.reached_goal).count();
        println!("{variant:<8} crashes {crashes}/5  reached goal {goals}/5");
    }
    Ok(())
}
