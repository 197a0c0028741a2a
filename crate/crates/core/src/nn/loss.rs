use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::model::Label;

/// A loss value with its gradient(s).
#[derive(Debug, Clone, PartialEq)]
pub struct PairLoss {
    pub value: f64,
    pub d_clean: Vec<f64>,
    pub d_noisy: Vec<f64>,
}

/// Pairwise hinge ranking loss:
/// `1/(Kc·Kn) · Σ_i Σ_j max(0, margin − (clean_i − noisy_j))`.
///
/// All `Kc × Kn` pairs are evaluated.
pub fn ranking_loss(clean: &[f64], noisy: &[f64], margin: f64) -> Result<PairLoss> {
    if clean.is_empty() || noisy.is_empty() {
        return Err(Error::Empty("ranking loss needs clean and noisy weights".into()));
    }
    let scale = 1.0 / (clean.len() * noisy.len()) as f64;
    let mut d_clean = vec![0.0; clean.len()];
    let mut d_noisy = vec![0.0; noisy.len()];
    let mut total = 0.0;
    for (c, dc) in clean.iter().zip(d_clean.iter_mut()) {
        let shifted = margin - c;
        let mut row = 0.0;
        let mut active = 0usize;
        for (n, dn) in noisy.iter().zip(d_noisy.iter_mut()) {
            let h = shifted + n;
            if h > 0.0 {
                row += h;
                active += 1;
                *dn += scale;
            }
        }
        total += row;
        *dc = -(active as f64) * scale;
    }
    Ok(PairLoss {
        value: total * scale,
        d_clean,
        d_noisy,
    })
}

const BCE_EPS: f64 = 1e-12;

/// Mean binary cross-entropy with clean targets 1 and noisy targets 0.
/// Weights are clamped to `[1e-12, 1 − 1e-12]` inside the logarithm.
pub fn bc_loss(clean: &[f64], noisy: &[f64]) -> Result<PairLoss> {
    let n = clean.len() + noisy.len();
    if n == 0 {
        return Err(Error::Empty("binary edge loss needs at least one weight".into()));
    }
    let inv = 1.0 / n as f64;
    let clamp = |w: f64| w.clamp(BCE_EPS, 1.0 - BCE_EPS);
    let mut value = 0.0;
    let d_clean = clean
        .iter()
        .map(|&w| {
            let p = clamp(w);
            value -= p.ln();
            if p == w {
                -inv / p
            } else {
                0.0
            }
        })
        .collect();
    let d_noisy = noisy
        .iter()
        .map(|&w| {
            let p = clamp(w);
            value -= (1.0 - p).ln();
            if p == w {
                inv / (1.0 - p)
            } else {
                0.0
            }
        })
        .collect();
    Ok(PairLoss {
        value: value * inv,
        d_clean,
        d_noisy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

impl std::str::FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sum" => Ok(Reduction::Sum),
            "mean" => Ok(Reduction::Mean),
            other => Err(Error::Config(format!("unknown reduction `{other}` (expected sum or mean)"))),
        }
    }
}

/// Row-wise softmax.
pub fn softmax(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    out.grad = None;
    let c = out.cols();
    for row in out.values.chunks_mut(c) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Cross-entropy of `softmax(logits)` against the labels of the nodes in
/// `index`, with the gradient taken with respect to the logits.
pub fn ce_loss(
    logits: &Tensor,
    labels: &[Option<Label>],
    index: &[usize],
    reduction: Reduction,
) -> Result<(f64, Tensor)> {
    let probs = softmax(logits);
    let mut grad = Tensor::zeros(&[logits.rows(), logits.cols()]);
    let scale = match reduction {
        Reduction::Sum => 1.0,
        Reduction::Mean if index.is_empty() => 0.0,
        Reduction::Mean => 1.0 / index.len() as f64,
    };
    let mut loss = 0.0;
    for &n in index {
        let y = labels
            .get(n)
            .copied()
            .flatten()
            .ok_or_else(|| Error::Unlabeled(format!("node #{n}")))?
            .index();
        let row = logits.row(n);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        let g = grad.row_mut(n);
        for (k, (gk, pk)) in g.iter_mut().zip(probs.row(n)).enumerate() {
            *gk = scale * (pk - if k == y { 1.0 } else { 0.0 });
        }
    }
    Ok((loss * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_examples() {
        assert_eq!(ranking_loss(&[0.9], &[0.2], 0.1).unwrap().value, 0.0);
        let l = ranking_loss(&[0.3], &[0.5], 0.1).unwrap();
        assert!((l.value - 0.3).abs() < 1e-15);
        assert_eq!(l.d_clean, vec![-1.0]);
        assert_eq!(l.d_noisy, vec![1.0]);
        assert!(ranking_loss(&[], &[0.5], 0.1).is_err());
    }

    #[test]
    fn bc_examples() {
        let l = bc_loss(&[0.5], &[0.5]).unwrap();
        assert!((l.value - std::f64::consts::LN_2).abs() < 1e-15);
        let small = bc_loss(&[1.0 - 1e-9], &[1e-9]).unwrap();
        assert!(small.value < 1e-8);
    }

    #[test]
    fn ce_examples() {
        let labels = [Some(Label::Fake), Some(Label::Real), None];
        let uniform = Tensor::zeros(&[3, 2]);
        let (l, _) = ce_loss(&uniform, &labels, &[0, 1], Reduction::Sum).unwrap();
        assert!((l - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        let (l, _) = ce_loss(&uniform, &labels, &[0, 1], Reduction::Mean).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);

        let confident = Tensor::matrix(2, 2, vec![-800.0, 800.0, 800.0, -800.0]);
        let (l, _) = ce_loss(&confident, &labels[..2], &[0, 1], Reduction::Sum).unwrap();
        assert_eq!(l, 0.0);

        assert!(matches!(
            ce_loss(&uniform, &labels, &[2], Reduction::Sum),
            Err(Error::Unlabeled(_))
        ));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = softmax(&Tensor::matrix(2, 2, vec![3.0, -1.0, 1000.0, 999.0]));
        for r in 0..2 {
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
