//! Small dense neural building blocks with hand-written reverse passes:
//! the edge weight estimator, a two-layer GCN, the training losses and Adam.
//!
//! Everything is `f64` and single-threaded per model instance.

mod adam;
mod checkpoint;
mod estimator;
mod gcn;
mod loss;
mod tensor;

use rand::Rng;

pub use adam::Adam;
pub use checkpoint::Checkpoint;
pub use estimator::{sigmoid, EdgeEstimator, EstimatorPass};
pub use gcn::{GcnClassifier, GcnPass, NormalizedAdjacency};
pub use loss::{bc_loss, ce_loss, ranking_loss, softmax, PairLoss, Reduction};
pub use tensor::Tensor;

use crate::error::Result;

/// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub(crate) fn uniform_init<R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n = shape.iter().product();
    let values = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::from_vec(shape, values).expect("init shape")
}

/// Layer widths of both networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub edge_input: usize,
    pub edge_hidden: usize,
    pub node_input: usize,
    pub node_hidden: usize,
    pub classes: usize,
}

impl Architecture {
    pub fn new(edge_input: usize, node_input: usize) -> Self {
        Architecture {
            edge_input,
            edge_hidden: 16,
            node_input,
            node_hidden: 64,
            classes: 2,
        }
    }
}

/// Estimator and classifier parameters with their shared optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub estimator: EdgeEstimator,
    pub classifier: GcnClassifier,
    pub adam: Adam,
}

impl ModelParams {
    pub fn init<R: Rng>(arch: Architecture, lr: f64, rng: &mut R) -> Self {
        let estimator = EdgeEstimator::new(arch.edge_input, arch.edge_hidden, rng);
        let classifier = GcnClassifier::new(arch.node_input, arch.node_hidden, arch.classes, rng);
        ModelParams {
            estimator,
            classifier,
            adam: Adam::new(lr),
        }
    }

    pub fn named_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut out: Vec<(&'static str, &mut Tensor)> = Vec::with_capacity(8);
        out.extend(self.estimator.params_mut());
        out.extend(self.classifier.params_mut());
        out
    }

    pub fn named(&self) -> Vec<(&'static str, &Tensor)> {
        let mut out: Vec<(&'static str, &Tensor)> = Vec::with_capacity(8);
        out.extend(self.estimator.params());
        out.extend(self.classifier.params());
        out
    }

    pub fn zero_grad(&mut self) {
        for (_, p) in self.named_mut() {
            p.zero_grad();
        }
    }

    pub fn adam_step(&mut self) -> Result<()> {
        let mut adam = std::mem::replace(&mut self.adam, Adam::new(0.0));
        let result = adam.step(&mut self.named_mut());
        self.adam = adam;
        result
    }

    pub fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.all_finite())
    }
}
