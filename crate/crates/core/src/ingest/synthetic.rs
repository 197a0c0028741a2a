use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Article, Dataset, Engagement, Label};
use crate::rng::{stream, Stream};

/// Parameters of the synthetic engagement generator.
///
/// Every user prefers one veracity class. Each of their engagements is early
/// with the user's own propensity (drawn uniformly from `[0, 1]`), and lands
/// on an article of the preferred class with probability `early_bias` when
/// early and `late_bias` when late.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_articles: usize,
    pub fake_fraction: f64,
    pub n_users: usize,
    /// Mean engagements per user.
    pub engagements_mean: f64,
    /// Gamma-Poisson dispersion; 0 gives a plain Poisson count.
    pub engagements_dispersion: f64,
    pub early_bias: f64,
    pub late_bias: f64,
    pub deadline_seconds: i64,
    /// Late engagements land uniformly in `[deadline, deadline * (1 + late_span))`.
    pub late_span: f64,
    /// Publish times are uniform over `[start_time, start_time + horizon_seconds)`.
    pub horizon_seconds: i64,
    pub start_time: i64,
    pub feature_dim: usize,
    /// Distance between the two class means in feature space; noise is unit variance.
    pub feature_separation: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_articles: 600,
            fake_fraction: 0.5,
            n_users: 2000,
            engagements_mean: 8.0,
            engagements_dispersion: 0.5,
            early_bias: 0.95,
            late_bias: 0.55,
            deadline_seconds: 48 * 3600,
            late_span: 4.0,
            horizon_seconds: 365 * 24 * 3600,
            start_time: 1_500_000_000,
            feature_dim: 16,
            feature_separation: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_articles == 0 || self.n_users == 0 {
            return bad("n_articles and n_users must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.fake_fraction) {
            return bad(format!("fake_fraction {} outside [0, 1]", self.fake_fraction));
        }
        if !(0.0 <= self.late_bias && self.late_bias <= self.early_bias && self.early_bias <= 1.0) {
            return bad(format!(
                "need 0 <= late_bias ({}) <= early_bias ({}) <= 1",
                self.late_bias, self.early_bias
            ));
        }
        if self.deadline_seconds <= 0 || self.horizon_seconds <= 0 {
            return bad("deadline_seconds and horizon_seconds must be positive".into());
        }
        if !(self.engagements_mean > 0.0) || !(self.engagements_dispersion >= 0.0) {
            return bad("engagements_mean must be positive and dispersion non-negative".into());
        }
        if !(self.late_span > 0.0) || !self.feature_separation.is_finite() {
            return bad("late_span must be positive and feature_separation finite".into());
        }
        Ok(())
    }
}

/// Deterministic for a fixed spec. Articles are sorted by `(publish_time, id)`
/// and engagements by `(time, user, article)`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.check()?;
    let mut rng = stream(spec.seed, Stream::Generation);
    let n = spec.n_articles;

    let n_fake = (spec.fake_fraction * n as f64).round() as usize;
    let mut labels: Vec<Label> = (0..n)
        .map(|i| if i < n_fake { Label::Fake } else { Label::Real })
        .collect();
    labels.shuffle(&mut rng);

    // Class means sit at +/- separation/2 along a random unit direction.
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut direction: Vec<f64> = (0..spec.feature_dim).map(|_| unit.sample(&mut rng)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        direction.iter_mut().for_each(|v| *v /= norm);
    }

    let width = n.to_string().len();
    let mut articles: Vec<Article> = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let publish_time = spec.start_time + rng.random_range(0..spec.horizon_seconds);
            let sign = if label.is_fake() { 0.5 } else { -0.5 };
            let features = direction
                .iter()
                .map(|d| sign * spec.feature_separation * d + unit.sample(&mut rng))
                .collect();
            Article {
                id: format!("a{i:0width$}"),
                publish_time,
                label: Some(label),
                features,
            }
        })
        .collect();

    let by_class: [Vec<usize>; 2] = [Label::Real, Label::Fake].map(|c| {
        articles
            .iter()
            .enumerate()
            .filter(|(_, a)| a.label == Some(c))
            .map(|(i, _)| i)
            .collect()
    });

    let counts = EngagementCount::new(spec.engagements_mean, spec.engagements_dispersion)?;
    let late_extra = (spec.deadline_seconds as f64 * spec.late_span).max(1.0) as i64;
    let uwidth = spec.n_users.to_string().len();
    let mut engagements = Vec::new();
    for u in 0..spec.n_users {
        let user = format!("u{u:0uwidth$}");
        let preferred = if rng.random_bool(spec.fake_fraction) {
            Label::Fake
        } else {
            Label::Real
        };
        let early_rate: f64 = rng.random();
        let k = counts.sample(&mut rng);
        for _ in 0..k {
            let early = rng.random_bool(early_rate);
            let bias = if early { spec.early_bias } else { spec.late_bias };
            let mut class = if rng.random_bool(bias) {
                preferred
            } else {
                other(preferred)
            };
            if by_class[class.index()].is_empty() {
                class = other(class);
            }
            let pool = &by_class[class.index()];
            let target = pool[rng.random_range(0..pool.len())];
            let delay = if early {
                rng.random_range(0..spec.deadline_seconds)
            } else {
                spec.deadline_seconds + rng.random_range(0..late_extra)
            };
            engagements.push(Engagement {
                user: user.clone(),
                article: articles[target].id.clone(),
                time: articles[target].publish_time + delay,
            });
        }
    }

    articles.sort_by(|a, b| (a.publish_time, &a.id).cmp(&(b.publish_time, &b.id)));
    engagements.sort_by(|a, b| (a.time, &a.user, &a.article).cmp(&(b.time, &b.user, &b.article)));
    Ok(Dataset::new(articles, engagements, spec.feature_dim))
}

fn other(label: Label) -> Label {
    match label {
        Label::Real => Label::Fake,
        Label::Fake => Label::Real,
    }
}

/// Per-user engagement count: Gamma-Poisson mixture, floored at one.
enum EngagementCount {
    Poisson(Poisson<f64>),
    Mixture(Gamma<f64>),
}

impl EngagementCount {
    fn new(mean: f64, dispersion: f64) -> Result<Self> {
        let err = |e: &dyn std::fmt::Display| Error::Config(format!("engagement distribution: {e}"));
        if dispersion == 0.0 {
            Ok(EngagementCount::Poisson(Poisson::new(mean).map_err(|e| err(&e))?))
        } else {
            Ok(EngagementCount::Mixture(
                Gamma::new(1.0 / dispersion, mean * dispersion).map_err(|e| err(&e))?,
            ))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let k = match self {
            EngagementCount::Poisson(p) => p.sample(rng),
            EngagementCount::Mixture(g) => {
                let lambda = g.sample(rng);
                if lambda > 0.0 {
                    Poisson::new(lambda).map(|p| p.sample(rng)).unwrap_or(0.0)
                } else {
                    0.0
                }
            }
        };
        (k as usize).max(1)
    }
}
