//! Importance weights, self-normalization and the SNIS estimate.

use super::SamplerError;
use crate::dynamics::ControlSequence;

/// `exp(-(J/lambda + sum_k u_k^T Sigma^-1 v_k))`, shifted so the largest
/// weight is 1. Non-finite costs get weight 0.
pub fn mppi_weights(
    costs: &[f64],
    controls: &[ControlSequence],
    mean: &ControlSequence,
    variance: &[f64],
    temperature: f64,
) -> Vec<f64> {
    let exponents: Vec<f64> = costs
        .iter()
        .zip(controls)
        .map(|(j, u)| {
            if !j.is_finite() {
                return f64::INFINITY;
            }
            let cross: f64 = u
                .as_slice()
                .iter()
                .zip(mean.as_slice())
                .enumerate()
                .map(|(idx, (ui, vi))| ui * vi / variance[idx % variance.len()])
                .sum();
            j / temperature + cross
        })
        .collect();
    exp_neg_shifted(&exponents)
}

/// General weight `p(o | u) p0(u) / r(u)` with `p(o | u) = exp(-J / lambda)`,
/// given log densities of the prior and the proposal.
pub fn vi_weights(
    costs: &[f64],
    log_prior: &[f64],
    log_proposal: &[f64],
    temperature: f64,
) -> Vec<f64> {
    let exponents: Vec<f64> = costs
        .iter()
        .zip(log_prior.iter().zip(log_proposal))
        .map(|(j, (lp, lr))| {
            if j.is_finite() {
                j / temperature - lp + lr
            } else {
                f64::INFINITY
            }
        })
        .collect();
    exp_neg_shifted(&exponents)
}

/// `exp(-(e - min e))`, with non-finite exponents mapped to 0.
fn exp_neg_shifted(exponents: &[f64]) -> Vec<f64> {
    let min = exponents
        .iter()
        .copied()
        .filter(|e| e.is_finite())
        .fold(f64::INFINITY, f64::min);
    exponents
        .iter()
        .map(|e| {
            if e.is_finite() {
                (-(e - min)).exp()
            } else {
                0.0
            }
        })
        .collect()
}

/// Weight 1 for the `elite` lowest costs, ties going to the lower index.
pub fn cem_weights(costs: &[f64], elite: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..costs.len()).filter(|i| !costs[*i].is_nan()).collect();
    order.sort_by(|a, b| costs[*a].total_cmp(&costs[*b]).then(a.cmp(b)));
    let mut w = vec![0.0; costs.len()];
    for &i in order.iter().take(elite) {
        if costs[i].is_finite() {
            w[i] = 1.0;
        }
    }
    w
}

/// Divides by the weight sum.
pub fn normalize(weights: &[f64]) -> Result<Vec<f64>, SamplerError> {
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(SamplerError::DegenerateEnsemble);
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

/// `sum_i w_i u^i` for normalized weights.
pub fn snis_estimate(
    controls: &[ControlSequence],
    normalized: &[f64],
) -> Result<ControlSequence, SamplerError> {
    let first = controls.first().ok_or(SamplerError::DegenerateEnsemble)?;
    let mut out = ControlSequence::zeros(first.horizon(), first.dim());
    for (u, w) in controls.iter().zip(normalized) {
        if *w == 0.0 {
            continue;
        }
        for (o, x) in out.as_mut_slice().iter_mut().zip(u.as_slice()) {
            *o += w * x;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ess {
    pub value: f64,
    /// The input did not sum to one and was normalized first.
    pub renormalized: bool,
}

/// `1 / sum w^2` over normalized weights.
pub fn ess(weights: &[f64]) -> Result<Ess, SamplerError> {
    let sum: f64 = weights.iter().sum();
    let renormalized = (sum - 1.0).abs() > 1e-12;
    let w = if renormalized {
        normalize(weights)?
    } else {
        weights.to_vec()
    };
    let sq: f64 = w.iter().map(|x| x * x).sum();
    Ok(Ess {
        value: 1.0 / sq,
        renormalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::policy::gaussian_log_density;

    fn seq(v: &[f64]) -> ControlSequence {
        ControlSequence::from_flat(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn snis_examples() {
        let us = vec![seq(&[1.0, 2.0]), seq(&[3.0, -2.0])];
        let w = normalize(&mppi_weights(
            &[5.0, 5.0],
            &us,
            &seq(&[0.0, 0.0]),
            &[1.0],
            1.0,
        ))
        .unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
        assert_eq!(snis_estimate(&us, &w).unwrap().as_slice(), &[2.0, 0.0]);
        let one = snis_estimate(&us, &[0.0, 1.0]).unwrap();
        assert_eq!(one.as_slice(), &[3.0, -2.0]);
        assert!(matches!(
            normalize(&[0.0, 0.0]),
            Err(SamplerError::DegenerateEnsemble)
        ));
    }

    #[test]
    fn cem_examples() {
        assert_eq!(cem_weights(&[3.0, 1.0, 2.0], 2), vec![0.0, 1.0, 1.0]);
        assert_eq!(cem_weights(&[1.0, 1.0, 1.0], 1), vec![1.0, 0.0, 0.0]);
        assert_eq!(cem_weights(&[3.0, 1.0, 2.0], 3), vec![1.0, 1.0, 1.0]);
        assert_eq!(cem_weights(&[f64::INFINITY, 1.0], 2), vec![0.0, 1.0]);
    }

    #[test]
    fn ess_examples() {
        assert_eq!(ess(&[0.25; 4]).unwrap().value, 4.0);
        assert_eq!(ess(&[0.0, 1.0, 0.0]).unwrap().value, 1.0);
        assert_eq!(ess(&[0.5, 0.5, 0.0, 0.0]).unwrap().value, 2.0);
        let r = ess(&[2.0, 2.0]).unwrap();
        assert!(r.renormalized && r.value == 2.0);
    }

    #[test]
    fn zero_mean_drops_cross_term() {
        let us = vec![seq(&[5.0]), seq(&[-1.0])];
        let w = mppi_weights(&[1.0, 2.0], &us, &seq(&[0.0]), &[1.0], 1.0);
        assert_eq!(w[0], 1.0);
        assert!((w[1] - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn non_finite_cost_gets_zero_weight() {
        let us = vec![seq(&[0.0]), seq(&[0.0])];
        let w = mppi_weights(&[f64::INFINITY, 1e9], &us, &seq(&[0.0]), &[1.0], 1.0);
        assert_eq!(w, vec![0.0, 1.0]);
    }

    #[test]
    fn general_formula_matches_mppi() {
        let mean = ControlSequence::from_rows(&[vec![0.3, -1.0], vec![0.7, 0.2]]).unwrap();
        let var = [0.5, 2.0];
        let us = vec![
            ControlSequence::from_rows(&[vec![0.1, -0.4], vec![1.2, 0.9]]).unwrap(),
            ControlSequence::from_rows(&[vec![0.9, -2.0], vec![0.0, 0.0]]).unwrap(),
            ControlSequence::from_rows(&[vec![-0.5, 0.3], vec![0.5, -1.1]]).unwrap(),
        ];
        let costs = [1.0, 2.5, 0.3];
        let zero = ControlSequence::zeros(2, 2);
        let lp: Vec<f64> = us
            .iter()
            .map(|u| gaussian_log_density(u.as_slice(), zero.as_slice(), &var))
            .collect();
        let lr: Vec<f64> = us
            .iter()
            .map(|u| gaussian_log_density(u.as_slice(), mean.as_slice(), &var))
            .collect();
        let a = normalize(&vi_weights(&costs, &lp, &lr, 1.0)).unwrap();
        let b = normalize(&mppi_weights(&costs, &us, &mean, &var, 1.0)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(*y), "{x} vs {y}");
        }
    }
}
