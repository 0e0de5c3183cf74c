//! Ground-truth value functions for small systems.

use crate::cbf::Heuristic;
use crate::dynamics::{Dynamics, Policy, RolloutError};

/// `max_{k <= horizon} h(x_k)` along the closed loop from `x0`.
pub fn policy_value_oracle(
    x0: &[f64],
    policy: &mut dyn Policy,
    model: &dyn Dynamics,
    h: &dyn Heuristic,
    horizon: usize,
) -> Result<f64, RolloutError> {
    let mut x = x0.to_vec();
    let mut best = h.value(&x);
    for k in 0..horizon {
        let u = policy.act(&x);
        x = model
            .step(&x, &u)
            .map_err(|source| RolloutError::Step { step: k, source })?;
        best = best.max(h.value(&x));
    }
    Ok(best)
}

/// Discounted value of a closed-loop trajectory by backward recursion,
/// bootstrapping the last state with its own heuristic value.
pub fn discounted_unrolled(
    x0: f64,
    step: impl Fn(f64) -> f64,
    h: impl Fn(f64) -> f64,
    gamma: f64,
    horizon: usize,
) -> f64 {
    let mut xs = Vec::with_capacity(horizon + 1);
    xs.push(x0);
    for k in 0..horizon {
        xs.push(step(xs[k]));
    }
    let mut v = h(xs[horizon]);
    for x in xs[..horizon].iter().rev() {
        let hx = h(*x);
        v = hx.max((1.0 - gamma) * hx + gamma * v);
    }
    v
}

/// Discounted value function of a 1-D closed loop tabulated on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOracle {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm difference of the last two iterates.
    pub last_delta: f64,
}

impl GridOracle {
    /// Iterates `V <- max(h, (1 - gamma) h + gamma V(f(x)))` with linear
    /// interpolation until successive iterates differ by less than `tol`.
    pub fn iterate(
        step: impl Fn(f64) -> f64,
        h: impl Fn(f64) -> f64,
        (lo, hi): (f64, f64),
        points: usize,
        gamma: f64,
        tol: f64,
        max_iter: usize,
    ) -> Self {
        assert!(points >= 2 && hi > lo);
        let dx = (hi - lo) / (points - 1) as f64;
        let xs: Vec<f64> = (0..points).map(|i| lo + i as f64 * dx).collect();
        let hs: Vec<f64> = xs.iter().map(|x| h(*x)).collect();
        let nexts: Vec<f64> = xs.iter().map(|x| step(*x).clamp(lo, hi)).collect();
        let mut grid = Self {
            lo,
            hi,
            values: hs.clone(),
            iterations: 0,
            last_delta: f64::INFINITY,
        };
        while grid.iterations < max_iter {
            let new: Vec<f64> = hs
                .iter()
                .zip(&nexts)
                .map(|(hx, xn)| hx.max((1.0 - gamma) * hx + gamma * grid.eval(*xn)))
                .collect();
            grid.last_delta = new
                .iter()
                .zip(&grid.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            grid.values = new;
            grid.iterations += 1;
            if grid.last_delta < tol {
                break;
            }
        }
        grid
    }

    pub fn points(&self) -> Vec<f64> {
        let n = self.values.len();
        let dx = (self.hi - self.lo) / (n - 1) as f64;
        (0..n).map(|i| self.lo + i as f64 * dx).collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let t = ((x - self.lo) / (self.hi - self.lo) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}
