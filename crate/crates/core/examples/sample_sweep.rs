//! Collision rate against sample count on the slalom scenario.

use std::path::Path;

use shield_vimpc::config::ScenarioConfig;
use shield_vimpc::experiments::sweep::{run_sweep, SweepSpec};
use shield_vimpc::experiments::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ScenarioConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/vehicle_slalom.toml"))?;
    cfg.experiment.trials = 5;
    let scenario = Scenario::new(cfg)?;
    let table = run_sweep(&scenario, &SweepSpec::from_config(scenario.config()))?;
    print!("{}", table.summary_csv());
    Ok(())
}
