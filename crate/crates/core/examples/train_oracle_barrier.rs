//! Fits the value barrier on the scalar system and compares it with the
//! tabulated value function.

use shield_vimpc::config::ScenarioConfig;
use shield_vimpc::experiments::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig::oracle();
    let gamma = cfg.training.fit.gamma;
    let scenario = Scenario::new(cfg)?;
    let report = scenario.train_barrier()?;
    println!("{} transitions, final loss {:.3e}", report.transitions, report.outcome.final_loss);

    let grid = scenario.oracle_grid(gamma);
    for x in [-3.0, -2.0, -1.0, 0.0, 0.5, 1.0, 2.0, 3.0] {
        println!("x {x:+.1}  learned {:+.4}  grid {:+.4}", report.outcome.net.forward(&[x]), grid.eval(x));
    }
    println!("sup error {:.4}", report.oracle_error.unwrap_or(f64::NAN));
    Ok(())
}
