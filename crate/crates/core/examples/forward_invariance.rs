//! A quadratic barrier keeping a double integrator inside its safe ellipse.

use shield_vimpc::experiments::checks::double_integrator_invariance;

fn main() {
    for steps in [10, 50, 200] {
        let (bound_holds, stays_safe, worst) = double_integrator_invariance(steps);
        println!("{steps:>3} steps: decay bound {bound_holds}, safe {stays_safe}, worst residual {worst:.3e}");
    }
}
