use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    /// First and second moments, one buffer per parameter in step order.
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    /// Apply one update from each parameter's accumulated gradient. A missing
    /// gradient counts as zero. Nothing is modified if any gradient is
    /// non-finite.
    pub fn step(&mut self, params: &mut [(&str, &mut Tensor)]) -> Result<()> {
        for (name, p) in params.iter() {
            if let Some(g) = &p.grad {
                if g.len() != p.values.len() {
                    return Err(Error::Shape(format!("gradient of `{name}` has wrong length")));
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteGradient(name.to_string()));
                }
            }
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|(_, p)| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len()
            || self.first.iter().zip(params.iter()).any(|(m, (_, p))| m.len() != p.len())
        {
            return Err(Error::Shape("optimizer state does not match parameters".into()));
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((_, p), (m, v)) in params
            .iter_mut()
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            let Some(g) = &p.grad else { continue };
            for (((x, &gi), mi), vi) in p
                .values
                .iter_mut()
                .zip(g.iter())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *x -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
