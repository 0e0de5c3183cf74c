use super::{check_input, ControlBounds, Dynamics, State, StepError};

/// Position/velocity double integrator with a bounded scalar acceleration.
#[derive(Debug, Clone)]
pub struct DoubleIntegrator {
    dt: f64,
    bounds: ControlBounds,
}

impl DoubleIntegrator {
    pub fn new(dt: f64, u_max: f64) -> Self {
        Self {
            dt,
            bounds: ControlBounds::symmetric(&[u_max]),
        }
    }
}

impl Dynamics for DoubleIntegrator {
    fn state_dim(&self) -> usize {
        2
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn control_bounds(&self) -> &ControlBounds {
        &self.bounds
    }
    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&self, x: &[f64], u: &[f64]) -> Result<State, StepError> {
        check_input(x, u, 2, 1)?;
        let a = self.bounds.clamped(u)[0];
        Ok(vec![x[0] + x[1] * self.dt, x[1] + a * self.dt])
    }
}

/// Scalar linear system `x' = a x + b u`.
#[derive(Debug, Clone)]
pub struct ScalarLinear {
    pub a: f64,
    pub b: f64,
    bounds: ControlBounds,
}

impl ScalarLinear {
    pub fn new(a: f64, b: f64, u_max: f64) -> Self {
        Self {
            a,
            b,
            bounds: ControlBounds::symmetric(&[u_max]),
        }
    }
}

impl Dynamics for ScalarLinear {
    fn state_dim(&self) -> usize {
        1
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn control_bounds(&self) -> &ControlBounds {
        &self.bounds
    }
    fn dt(&self) -> f64 {
        1.0
    }

    fn step(&self, x: &[f64], u: &[f64]) -> Result<State, StepError> {
        check_input(x, u, 1, 1)?;
        let u = self.bounds.clamped(u)[0];
        Ok(vec![self.a * x[0] + self.b * u])
    }
}
