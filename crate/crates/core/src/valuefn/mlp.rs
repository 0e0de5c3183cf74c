use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlpError {
    #[error("layer sizes must be [n_in, hidden.., 1] with all sizes >= 1, got {0:?}")]
    Shape(Vec<usize>),
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("normalization vectors must have length {0}")]
    Normalization(usize),
}

/// Fully connected tanh network with a scalar linear output and a stored
/// per-input affine normalization `(x - shift) / scale`.
///
/// Parameters are kept in one flat vector, layer by layer: the weight matrix
/// row-major (`out x in`) followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    shift: Vec<f64>,
    scale: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

fn check_shape(sizes: &[usize]) -> Result<(), MlpError> {
    if sizes.len() < 3 || sizes.iter().any(|s| *s == 0) || *sizes.last().unwrap() != 1 {
        return Err(MlpError::Shape(sizes.to_vec()));
    }
    Ok(())
}

impl Mlp {
    /// Glorot-uniform weights, zero biases, identity normalization.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self, MlpError> {
        check_shape(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            for _ in 0..n_in * n_out {
                params.push(rng.random_range(-limit..limit));
            }
            params.extend(std::iter::repeat_n(0.0, n_out));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
            shift: vec![0.0; sizes[0]],
            scale: vec![1.0; sizes[0]],
        })
    }

    pub fn from_parts(
        sizes: Vec<usize>,
        params: Vec<f64>,
        shift: Vec<f64>,
        scale: Vec<f64>,
    ) -> Result<Self, MlpError> {
        check_shape(&sizes)?;
        let expected = param_count(&sizes);
        if params.len() != expected {
            return Err(MlpError::ParamCount {
                expected,
                got: params.len(),
            });
        }
        if shift.len() != sizes[0] || scale.len() != sizes[0] {
            return Err(MlpError::Normalization(sizes[0]));
        }
        Ok(Self {
            sizes,
            params,
            shift,
            scale,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Sets the normalization to the per-dimension mean and standard
    /// deviation of `inputs`. Near-constant dimensions keep unit scale.
    pub fn fit_normalization<'a>(&mut self, inputs: impl Iterator<Item = &'a [f64]> + Clone) {
        let n_in = self.input_dim();
        let mut mean = vec![0.0; n_in];
        let mut count = 0.0;
        for x in inputs.clone() {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
            count += 1.0;
        }
        if count == 0.0 {
            return;
        }
        for m in &mut mean {
            *m /= count;
        }
        let mut var = vec![0.0; n_in];
        for x in inputs {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        self.scale = var
            .iter()
            .map(|s| {
                let sd = (s / count).sqrt();
                if sd > 1e-6 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        self.shift = mean;
    }

    fn normalized(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut a = self.normalized(x);
        let mut next = Vec::new();
        let mut off = 0;
        let last = self.sizes.len() - 2;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[off..off + n_in * n_out];
            let bias = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            next.clear();
            for (row, b) in weights.chunks_exact(n_in).zip(bias) {
                let z = b + row.iter().zip(&a).map(|(wi, ai)| wi * ai).sum::<f64>();
                next.push(if l < last { z.tanh() } else { z });
            }
            std::mem::swap(&mut a, &mut next);
            off += n_in * n_out + n_out;
        }
        a[0]
    }

    /// Returns the output and adds `coeff * d(output)/d(params)` into `grad`.
    pub fn accumulate_gradient(
        &self,
        x: &[f64],
        grad: &mut [f64],
        coeff: impl FnOnce(f64) -> f64,
    ) -> f64 {
        let n_layers = self.sizes.len() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        acts.push(self.normalized(x));
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            offsets.push(off);
            let weights = &self.params[off..off + n_in * n_out];
            let bias = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let a = &acts[l];
            let out: Vec<f64> = weights
                .chunks_exact(n_in)
                .zip(bias)
                .map(|(row, b)| {
                    let z = b + row.iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>();
                    if l + 1 < n_layers {
                        z.tanh()
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
            off += n_in * n_out + n_out;
        }
        let output = acts[n_layers][0];
        let mut delta = vec![coeff(output)];
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let a_in = &acts[l];
            for (j, d) in delta.iter().enumerate() {
                let row = &mut grad[off + j * n_in..off + (j + 1) * n_in];
                for (g, a) in row.iter_mut().zip(a_in) {
                    *g += d * a;
                }
                grad[off + n_in * n_out + j] += d;
            }
            if l > 0 {
                let weights = &self.params[off..off + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for (row, d) in weights.chunks_exact(n_in).zip(&delta) {
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                for (p, a) in prev.iter_mut().zip(a_in) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
        output
    }
}
