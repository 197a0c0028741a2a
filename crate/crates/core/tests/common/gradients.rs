//! Finite-difference checks for every hand-written backward pass.

use earlybird::features::EdgeInputs;
use earlybird::nn::{
    bc_loss, ce_loss, ranking_loss, EdgeEstimator, GcnClassifier, NormalizedAdjacency, Reduction,
    Tensor,
};
use earlybird::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{central_difference, check_tensors, close, random_vec};

fn grads(named: Vec<(&'static str, &Tensor)>) -> Vec<(&'static str, Vec<f64>)> {
    named
        .into_iter()
        .map(|(n, t)| (n, t.grad.clone().unwrap_or_else(|| vec![0.0; t.len()])))
        .collect()
}

fn check_vector(
    name: &str,
    x: &[f64],
    analytic: &[f64],
    f: impl Fn(&[f64]) -> f64,
) -> Result<(), String> {
    let mut x = x.to_vec();
    for k in 0..x.len() {
        let numeric = central_difference(&mut x, k, &f);
        if !close(analytic[k], numeric) {
            return Err(format!("{name}[{k}]: analytic {} vs numeric {numeric}", analytic[k]));
        }
    }
    Ok(())
}

/// `L = Σ c_k w_k` through the edge estimator.
pub fn estimator(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = EdgeEstimator::new(4, 16, &mut rng);
    let rows = 9;
    let inputs = EdgeInputs {
        dim: 4,
        values: (0..rows * 4).map(|_| rng.random_range(0.0..1.0)).collect(),
    };
    let c = random_vec(&mut rng, rows);
    let loss = |m: &EdgeEstimator| -> f64 {
        let w = m.forward(&inputs).unwrap().weights;
        w.iter().zip(&c).map(|(a, b)| a * b).sum()
    };
    for (_, p) in model.params_mut() {
        p.zero_grad();
    }
    let pass = model.forward(&inputs).map_err(|e| e.to_string())?;
    model.backward(&inputs, &pass, &c);
    let analytic = grads(model.params().to_vec());
    check_tensors(&model, |m| m.params_mut().into_iter().collect(), &analytic, loss).map(|_| ())
}

/// `L = Σ R ⊙ logits` through a two-layer GCN on a 6-node weighted graph,
/// checked against both the parameters and the edge weights. Inputs both
/// narrower and wider than the hidden layer are covered.
pub fn gcn(seed: u64) -> Result<(), String> {
    gcn_shape(seed, 3, 5)?;
    gcn_shape(seed, 7, 4)
}

fn gcn_shape(seed: u64, input: usize, hidden: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 6;
    let edges = vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 4), (3, 4), (3, 5), (4, 5)];
    let weights: Vec<f64> = (0..edges.len()).map(|_| rng.random_range(0.1..1.0)).collect();
    let x = Tensor::matrix(n, input, random_vec(&mut rng, n * input));
    let r = Tensor::matrix(n, 2, random_vec(&mut rng, n * 2));
    let mut model = GcnClassifier::new(input, hidden, 2, &mut rng);

    let objective = |m: &GcnClassifier, w: &[f64]| -> f64 {
        let adj = NormalizedAdjacency::new(n, &edges, w).unwrap();
        let logits = m.forward(&adj, &x).unwrap().logits;
        logits.values.iter().zip(&r.values).map(|(a, b)| a * b).sum()
    };
    for (_, p) in model.params_mut() {
        p.zero_grad();
    }
    let adj = NormalizedAdjacency::new(n, &edges, &weights).map_err(|e| e.to_string())?;
    let pass = model.forward(&adj, &x).map_err(|e| e.to_string())?;
    let d_w = model.backward(&adj, &x, &pass, &r);
    let analytic = grads(model.params().to_vec());
    check_tensors(
        &model,
        |m| m.params_mut().into_iter().collect(),
        &analytic,
        |m| objective(m, &weights),
    )?;
    check_vector("edge weight", &weights, &d_w, |w| objective(&model, w))
}

/// Weights kept away from the hinge so the loss is smooth at the probe.
fn weights_off_kinks(rng: &mut ChaCha8Rng, clean: usize, noisy: usize, margin: f64) -> (Vec<f64>, Vec<f64>) {
    loop {
        let c: Vec<f64> = (0..clean).map(|_| rng.random_range(0.01..0.99)).collect();
        let n: Vec<f64> = (0..noisy).map(|_| rng.random_range(0.01..0.99)).collect();
        let smooth = c
            .iter()
            .all(|a| n.iter().all(|b| (margin - a + b).abs() > 1e-3));
        if smooth {
            return (c, n);
        }
    }
}

pub fn ranking(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = 0.1;
    let (c, n) = weights_off_kinks(&mut rng, 7, 5, margin);
    let l = ranking_loss(&c, &n, margin).map_err(|e| e.to_string())?;
    check_vector("clean", &c, &l.d_clean, |v| ranking_loss(v, &n, margin).unwrap().value)?;
    check_vector("noisy", &n, &l.d_noisy, |v| ranking_loss(&c, v, margin).unwrap().value)
}

pub fn binary(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..6).map(|_| rng.random_range(0.05..0.95)).collect();
    let n: Vec<f64> = (0..4).map(|_| rng.random_range(0.05..0.95)).collect();
    let l = bc_loss(&c, &n).map_err(|e| e.to_string())?;
    check_vector("clean", &c, &l.d_clean, |v| bc_loss(v, &n).unwrap().value)?;
    check_vector("noisy", &n, &l.d_noisy, |v| bc_loss(&c, v).unwrap().value)
}

pub fn cross_entropy(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = 7;
    let logits = random_vec(&mut rng, rows * 2)
        .into_iter()
        .map(|v| 3.0 * v)
        .collect::<Vec<_>>();
    let labels: Vec<Option<Label>> = (0..rows)
        .map(|_| Some(if rng.random_bool(0.5) { Label::Fake } else { Label::Real }))
        .collect();
    // Node 6 is left out of the index and must get no gradient.
    let index: Vec<usize> = (0..rows - 1).collect();
    for reduction in [Reduction::Sum, Reduction::Mean] {
        let t = Tensor::matrix(rows, 2, logits.clone());
        let (_, d) = ce_loss(&t, &labels, &index, reduction).map_err(|e| e.to_string())?;
        check_vector("logits", &logits, &d.values, |v| {
            ce_loss(&Tensor::matrix(rows, 2, v.to_vec()), &labels, &index, reduction)
                .unwrap()
                .0
        })?;
        if d.row(rows - 1).iter().any(|&g| g != 0.0) {
            return Err("gradient leaked to a node outside the index".into());
        }
    }
    Ok(())
}
