use rand::Rng;

use super::tensor::Tensor;
use super::uniform_init;
use crate::error::{Error, Result};
use crate::features::EdgeInputs;

/// Edge weight estimator: `w = sigmoid(W2 · relu(W1 · z + b1) + b2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeEstimator {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EstimatorPass {
    /// `relu(W1 · z + b1)` per edge, row-major.
    pub hidden: Vec<f64>,
    pub weights: Vec<f64>,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl EdgeEstimator {
    pub fn new<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        EdgeEstimator {
            w1: uniform_init(&[input_dim, hidden], input_dim, rng),
            b1: uniform_init(&[hidden], input_dim, rng),
            w2: uniform_init(&[hidden, 1], hidden, rng),
            b2: uniform_init(&[1], hidden, rng),
        }
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        EdgeEstimator {
            w1: Tensor::zeros(&[input_dim, hidden]),
            b1: Tensor::zeros(&[hidden]),
            w2: Tensor::zeros(&[hidden, 1]),
            b2: Tensor::zeros(&[1]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn forward(&self, inputs: &EdgeInputs) -> Result<EstimatorPass> {
        if inputs.dim != self.input_dim() {
            return Err(Error::FeatureDim {
                expected: self.input_dim(),
                found: inputs.dim,
                context: "edge estimator input".into(),
            });
        }
        let (d, h) = (inputs.dim, self.hidden_dim());
        let (w1, b1, w2) = (&self.w1.values, &self.b1.values, &self.w2.values);
        let b2 = self.b2.values[0];
        let n = inputs.rows();
        let mut hidden = vec![0.0; n * h];
        let mut weights = Vec::with_capacity(n);
        if h > 0 {
            for (z, hid) in inputs.values.chunks_exact(d.max(1)).zip(hidden.chunks_exact_mut(h)) {
                hid.copy_from_slice(b1);
                for (&zv, wrow) in z.iter().zip(w1.chunks_exact(h)) {
                    for (a, &wv) in hid.iter_mut().zip(wrow) {
                        *a += zv * wv;
                    }
                }
                let mut score = b2;
                for (a, &wv) in hid.iter_mut().zip(w2) {
                    *a = a.max(0.0);
                    score += *a * wv;
                }
                weights.push(sigmoid(score));
            }
        } else {
            weights.resize(n, sigmoid(b2));
        }
        Ok(EstimatorPass { hidden, weights })
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    /// Accumulate parameter gradients given `dL/dw` for every edge.
    pub fn backward(&mut self, inputs: &EdgeInputs, pass: &EstimatorPass, d_weights: &[f64]) {
        debug_assert_eq!(d_weights.len(), pass.weights.len());
        let (d, h) = (inputs.dim, self.hidden_dim());
        let mut g_w1 = vec![0.0; d * h];
        let mut g_b1 = vec![0.0; h];
        let mut g_w2 = vec![0.0; h];
        let mut g_b2 = 0.0;
        let w2 = &self.w2.values;
        let mut d_pre = vec![0.0; h];
        for (k, (&w, &g)) in pass.weights.iter().zip(d_weights).enumerate() {
            let ds = g * w * (1.0 - w);
            if ds == 0.0 {
                continue;
            }
            g_b2 += ds;
            let hid = &pass.hidden[k * h..(k + 1) * h];
            for j in 0..h {
                g_w2[j] += ds * hid[j];
                d_pre[j] = if hid[j] > 0.0 { ds * w2[j] } else { 0.0 };
                g_b1[j] += d_pre[j];
            }
            for (&zv, grow) in inputs.values[k * d..(k + 1) * d]
                .iter()
                .zip(g_w1.chunks_exact_mut(h.max(1)))
            {
                if zv == 0.0 {
                    continue;
                }
                for (gv, &dp) in grow.iter_mut().zip(&d_pre) {
                    *gv += zv * dp;
                }
            }
        }
        self.w1.accumulate_grad(&g_w1);
        self.b1.accumulate_grad(&g_b1);
        self.w2.accumulate_grad(&g_w2);
        self.b2.accumulate_grad(&[g_b2]);
    }

    pub fn params_mut(&mut self) -> [(&'static str, &mut Tensor); 4] {
        [
            ("estimator.w1", &mut self.w1),
            ("estimator.b1", &mut self.b1),
            ("estimator.w2", &mut self.w2),
            ("estimator.b2", &mut self.b2),
        ]
    }

    pub fn params(&self) -> [(&'static str, &Tensor); 4] {
        [
            ("estimator.w1", &self.w1),
            ("estimator.b1", &self.b1),
            ("estimator.w2", &self.w2),
            ("estimator.b2", &self.b2),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_give_half() {
        let f = EdgeEstimator::zeros(4, 16);
        let inputs = EdgeInputs {
            dim: 4,
            values: vec![0.3, 0.1, 0.9, 0.0, 1.0, 1.0, 1.0, 1.0],
        };
        let pass = f.forward(&inputs).unwrap();
        assert_eq!(pass.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn dimension_mismatch_errors() {
        let f = EdgeEstimator::zeros(4, 16);
        let inputs = EdgeInputs {
            dim: 2,
            values: vec![0.0, 0.0],
        };
        assert!(matches!(f.forward(&inputs), Err(Error::FeatureDim { .. })));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0) < 1e-300);
        assert_eq!(sigmoid(800.0), 1.0);
    }
}
