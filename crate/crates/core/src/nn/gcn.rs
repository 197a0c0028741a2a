use rand::Rng;

use super::tensor::Tensor;
use super::uniform_init;
use crate::error::{Error, Result};

/// `D̃^{-1/2} (W + I) D̃^{-1/2}` over a sparse undirected edge list.
///
/// `weights[k]` is the weight of `edges[k] = (i, j)` and of its mirror
/// `(j, i)`. The dense matrix is never formed.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    n: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
    /// `1 / sqrt(1 + Σ_j w_ij)`.
    inv_sqrt_deg: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn new(n: usize, edges: &[(usize, usize)], weights: &[f64]) -> Result<Self> {
        if edges.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} edges but {} weights",
                edges.len(),
                weights.len()
            )));
        }
        let mut deg = vec![1.0; n];
        for (&(i, j), &w) in edges.iter().zip(weights) {
            if i >= n || j >= n || i == j {
                return Err(Error::Shape(format!("invalid edge ({i}, {j}) for {n} nodes")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Shape(format!("edge weight {w} must be finite and >= 0")));
            }
            deg[i] += w;
            deg[j] += w;
        }
        Ok(NormalizedAdjacency {
            n,
            edges: edges.to_vec(),
            weights: weights.to_vec(),
            inv_sqrt_deg: deg.iter().map(|d| 1.0 / d.sqrt()).collect(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// `Â · m`.
    pub fn propagate(&self, m: &Tensor) -> Tensor {
        assert_eq!(m.rows(), self.n, "propagate rows");
        let c = m.cols();
        let s = &self.inv_sqrt_deg;
        let mut out = Tensor::zeros(&[self.n, c]);
        for i in 0..self.n {
            let coef = s[i] * s[i];
            for (o, v) in out.row_mut(i).iter_mut().zip(m.row(i)) {
                *o = coef * v;
            }
        }
        for (&(i, j), &w) in self.edges.iter().zip(&self.weights) {
            let coef = w * s[i] * s[j];
            if coef == 0.0 {
                continue;
            }
            for k in 0..c {
                let (mi, mj) = (m.values[i * c + k], m.values[j * c + k]);
                out.values[i * c + k] += coef * mj;
                out.values[j * c + k] += coef * mi;
            }
        }
        out
    }

    /// Given `g = dL/d(Â·m)`, return `(dL/dm, dL/dw)`. The weight gradient
    /// includes the path through the degree normalization.
    pub fn backward(&self, m: &Tensor, g: &Tensor) -> (Tensor, Vec<f64>) {
        (self.propagate(g), self.weight_grad(m, g))
    }

    /// The `dL/dw` half of [`NormalizedAdjacency::backward`].
    pub fn weight_grad(&self, m: &Tensor, g: &Tensor) -> Vec<f64> {
        let c = m.cols();
        let s = &self.inv_sqrt_deg;
        let dot = |a: usize, b: usize| -> f64 {
            g.values[a * c..(a + 1) * c]
                .iter()
                .zip(&m.values[b * c..(b + 1) * c])
                .map(|(x, y)| x * y)
                .sum()
        };

        // dL/ds_k from every entry Â_ij = a_ij s_i s_j that involves s_k.
        let mut d_s: Vec<f64> = (0..self.n).map(|k| 2.0 * dot(k, k) * s[k]).collect();
        let mut cross = Vec::with_capacity(self.edges.len());
        for (&(i, j), &w) in self.edges.iter().zip(&self.weights) {
            let q = dot(i, j) + dot(j, i);
            d_s[i] += w * s[j] * q;
            d_s[j] += w * s[i] * q;
            cross.push(q);
        }
        // s = d^{-1/2}  ⇒  ds/dd = -s³/2.
        let d_deg: Vec<f64> = d_s
            .iter()
            .zip(s)
            .map(|(ds, sk)| -0.5 * ds * sk * sk * sk)
            .collect();
        self.edges
            .iter()
            .zip(&cross)
            .map(|(&(i, j), q)| q * s[i] * s[j] + d_deg[i] + d_deg[j])
            .collect()
    }
}

/// Two-layer GCN: `logits = Â · relu(Â X Θ1 + b1) Θ2 + b2`.
///
/// The first layer computes `(Â X) Θ1` or `Â (X Θ1)`, whichever propagates
/// the narrower matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnClassifier {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

#[derive(Debug, Clone)]
pub struct GcnPass {
    /// `Â X` when propagating first, `X Θ1` otherwise.
    first: Tensor,
    propagate_first: bool,
    pre: Tensor,
    hidden: Tensor,
    hw2: Tensor,
    pub logits: Tensor,
}

impl GcnClassifier {
    pub fn new<R: Rng>(input_dim: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        GcnClassifier {
            w1: uniform_init(&[input_dim, hidden], input_dim, rng),
            b1: uniform_init(&[hidden], input_dim, rng),
            w2: uniform_init(&[hidden, classes], hidden, rng),
            b2: uniform_init(&[classes], hidden, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn forward(&self, adj: &NormalizedAdjacency, x: &Tensor) -> Result<GcnPass> {
        if x.cols() != self.input_dim() || x.rows() != adj.num_nodes() {
            return Err(Error::FeatureDim {
                expected: self.input_dim(),
                found: x.cols(),
                context: format!("node features for {} nodes", adj.num_nodes()),
            });
        }
        let propagate_first = x.cols() <= self.w1.cols();
        let (first, mut pre) = if propagate_first {
            let ax = adj.propagate(x);
            let pre = ax.matmul(&self.w1);
            (ax, pre)
        } else {
            let xw = x.matmul(&self.w1);
            let pre = adj.propagate(&xw);
            (xw, pre)
        };
        pre.add_row(&self.b1.values);
        let hidden = pre.map(|v| v.max(0.0));
        let hw2 = hidden.matmul(&self.w2);
        let mut logits = adj.propagate(&hw2);
        logits.add_row(&self.b2.values);
        Ok(GcnPass {
            first,
            propagate_first,
            pre,
            hidden,
            hw2,
            logits,
        })
    }

    /// Accumulate parameter gradients from `dL/dlogits` and return `dL/dw`
    /// for the adjacency weights.
    pub fn backward(
        &mut self,
        adj: &NormalizedAdjacency,
        x: &Tensor,
        pass: &GcnPass,
        d_logits: &Tensor,
    ) -> Vec<f64> {
        self.b2.accumulate_grad(&d_logits.sum_rows());
        let d_hw2 = adj.propagate(d_logits);
        let mut d_w = adj.weight_grad(&pass.hw2, d_logits);
        self.w2.accumulate_grad(&pass.hidden.t_matmul(&d_hw2).values);

        let mut d_pre = d_hw2.matmul_t(&self.w2);
        for (d, &p) in d_pre.values.iter_mut().zip(&pass.pre.values) {
            if p <= 0.0 {
                *d = 0.0;
            }
        }
        self.b1.accumulate_grad(&d_pre.sum_rows());
        let d_w1 = if pass.propagate_first {
            self.w1.accumulate_grad(&pass.first.t_matmul(&d_pre).values);
            let d_ax = d_pre.matmul_t(&self.w1);
            adj.weight_grad(x, &d_ax)
        } else {
            let d_xw = adj.propagate(&d_pre);
            self.w1.accumulate_grad(&x.t_matmul(&d_xw).values);
            adj.weight_grad(&pass.first, &d_pre)
        };

        for (a, b) in d_w.iter_mut().zip(d_w1) {
            *a += b;
        }
        d_w
    }

    pub fn params_mut(&mut self) -> [(&'static str, &mut Tensor); 4] {
        [
            ("classifier.w1", &mut self.w1),
            ("classifier.b1", &mut self.b1),
            ("classifier.w2", &mut self.w2),
            ("classifier.b2", &mut self.b2),
        ]
    }

    pub fn params(&self) -> [(&'static str, &Tensor); 4] {
        [
            ("classifier.w1", &self.w1),
            ("classifier.b1", &self.b1),
            ("classifier.w2", &self.w2),
            ("classifier.b2", &self.b2),
        ]
    }
}
