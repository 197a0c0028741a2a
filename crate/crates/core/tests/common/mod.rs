//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

pub mod checks;
pub mod gradients;

use std::collections::{BTreeMap, BTreeSet};

use earlybird::nn::Tensor;
use earlybird::split::{BandKind, TemporalSplit};
use earlybird::{Article, Dataset, EarlinessConfig, Engagement, Label};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random dataset with repeated engagements, unlabeled articles,
/// publish-time ties and a few engagements that predate their article.
pub fn random_dataset(seed: u64, max_articles: usize, max_users: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_articles = rng.random_range(4..=max_articles.max(4));
    let n_users = rng.random_range(1..=max_users.max(1));
    let articles: Vec<Article> = (0..n_articles)
        .map(|i| Article {
            id: format!("p{i:02}"),
            publish_time: rng.random_range(0..200) * 10,
            label: match rng.random_range(0..10) {
                0 => None,
                1..=4 => Some(Label::Real),
                _ => Some(Label::Fake),
            },
            features: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        })
        .collect();
    let mut engagements = Vec::new();
    for u in 0..n_users {
        for _ in 0..rng.random_range(0..8) {
            let a = &articles[rng.random_range(0..n_articles)];
            engagements.push(Engagement {
                user: format!("u{u:02}"),
                article: a.id.clone(),
                time: a.publish_time + rng.random_range(-5..400),
            });
        }
    }
    let mut d = Dataset::new(articles, engagements, 2);
    d.sort_articles();
    d
}

/// Users with at least `m` engagements at or before `cut`.
pub fn active_at(dataset: &Dataset, cut: i64, m: usize) -> BTreeSet<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in dataset.engagements.iter().filter(|e| e.time <= cut) {
        *counts.entry(&e.user).or_default() += 1;
    }
    counts
        .into_iter()
        .filter(|&(_, c)| c >= m)
        .map(|(u, _)| u.to_string())
        .collect()
}

/// Dense `EᵀE` with a zero diagonal, rows and columns in band order.
pub fn dense_cooccurrence(dataset: &Dataset, split: &TemporalSplit, kind: BandKind) -> Vec<Vec<u64>> {
    let band = split.band(kind);
    let ids: Vec<&str> = band
        .articles
        .iter()
        .map(|&i| dataset.articles[i].id.as_str())
        .collect();
    let users: Vec<String> = active_at(dataset, band.cut, split.min_engagements)
        .into_iter()
        .collect();
    let mut e = vec![vec![0u64; ids.len()]; users.len()];
    for eng in dataset.engagements.iter().filter(|e| e.time <= band.cut) {
        let (Some(u), Some(a)) = (
            users.iter().position(|u| *u == eng.user),
            ids.iter().position(|id| *id == eng.article),
        ) else {
            continue;
        };
        e[u][a] += 1;
    }
    let n = ids.len();
    let mut a = vec![vec![0u64; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a[i][j] = (0..users.len()).map(|u| e[u][i] * e[u][j]).sum();
            }
        }
    }
    a
}

/// Group counts `(EE, EL, LE, LL)` for the edge between articles `i` and
/// `j`, enumerated straight from the raw log.
pub fn enumerate_group_counts(
    dataset: &Dataset,
    split: &TemporalSplit,
    kind: BandKind,
    config: &EarlinessConfig,
    i: &str,
    j: &str,
) -> [u64; 4] {
    let cut = split.band(kind).cut;
    let publish: BTreeMap<&str, i64> = dataset
        .articles
        .iter()
        .map(|a| (a.id.as_str(), a.publish_time))
        .collect();
    let log: Vec<&Engagement> = dataset.engagements.iter().filter(|e| e.time <= cut).collect();
    let early = |e: &Engagement| e.time - publish[e.article.as_str()] < config.deadline_seconds;
    let active = active_at(dataset, cut, config.min_engagements);

    let mut out = [0u64; 4];
    for user in &active {
        let mine: Vec<&&Engagement> = log.iter().filter(|e| &e.user == user).collect();
        let touches = |id: &str| mine.iter().any(|e| e.article == id);
        if !(touches(i) && touches(j)) {
            continue;
        }
        let ue = mine.iter().filter(|e| early(e)).count() as f64 / mine.len() as f64;
        let early_user = ue > config.user_threshold;
        for e in mine.iter().filter(|e| e.article == i || e.article == j) {
            let slot = match (early_user, early(e)) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => 3,
            };
            out[slot] += 1;
        }
    }
    out
}

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOL: f64 = 1e-4;

/// Central difference of `f` at `x[k]`.
pub fn central_difference(x: &mut [f64], k: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[k];
    x[k] = orig + FD_STEP;
    let up = f(x);
    x[k] = orig - FD_STEP;
    let down = f(x);
    x[k] = orig;
    (up - down) / (2.0 * FD_STEP)
}

/// `|a - n| <= tol * max(|a|, |n|)`, with a tiny absolute floor for
/// entries that are zero analytically.
pub fn close(analytic: f64, numeric: f64) -> bool {
    let scale = analytic.abs().max(numeric.abs());
    (analytic - numeric).abs() <= FD_TOL * scale + 1e-8
}

/// Compare analytic gradients of a model's named tensors against central
/// differences of `loss`. Returns the worst relative error seen.
pub fn check_tensors<M: Clone>(
    model: &M,
    tensors: impl Fn(&mut M) -> Vec<(&'static str, &mut Tensor)>,
    analytic: &[(&'static str, Vec<f64>)],
    loss: impl Fn(&M) -> f64,
) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    for (t, (name, grad)) in analytic.iter().enumerate() {
        let len = tensors(&mut probe)[t].1.values.len();
        for k in 0..len {
            let eval = |delta: f64| {
                let mut m = model.clone();
                tensors(&mut m)[t].1.values[k] += delta;
                loss(&m)
            };
            let numeric = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
            let a = grad[k];
            if !close(a, numeric) {
                return Err(format!("{name}[{k}]: analytic {a} vs numeric {numeric}"));
            }
            let scale = a.abs().max(numeric.abs());
            if scale > 1e-8 {
                worst = worst.max((a - numeric).abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// Pseudo-random vector in `[-1, 1)`.
pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}
