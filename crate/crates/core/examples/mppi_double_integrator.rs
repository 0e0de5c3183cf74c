//! Plain MPPI parking a double integrator at the origin.

use std::sync::Arc;

use shield_vimpc::cost::{QuadraticCost, TrajectoryCost};
use shield_vimpc::dynamics::{DoubleIntegrator, Dynamics};
use shield_vimpc::sampler::{Algorithm, Controller, ControllerSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = Arc::new(DoubleIntegrator::new(0.1, 2.0));
    let cost = TrajectoryCost::new(QuadraticCost::new(vec![1.0, 0.2], vec![0.0, 0.0])?).with_collision(100.0);
    // nothing to avoid: h is always negative
    let avoid = Arc::new(|_: &[f64]| -1.0);
    let mut spec = ControllerSpec::new(Algorithm::Mppi, 20, 200, vec![1.0]);
    spec.temperature = 0.5;
    let mut controller = Controller::new(spec, model.clone(), cost, avoid, None)?;

    let mut x = vec![3.0, 0.0];
    for k in 0..60 {
        let (u, diag) = controller.step(&x)?;
        x = model.step(&x, &u)?;
        if k % 10 == 0 {
            println!("step {k:>2}  pos {:+.3}  vel {:+.3}  u {:+.3}  ess {:.1}", x[0], x[1], u[0], diag.ess);
        }
    }
    println!("final position {:+.4}", x[0]);
    Ok(())
}
