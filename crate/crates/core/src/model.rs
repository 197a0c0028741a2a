//! Domain types shared by every stage: articles, engagements, datasets and
//! the earliness thresholds.
//!
//! Timestamps are integer epoch seconds. Loaders truncate fractional seconds
//! and reject non-finite values, so every `i64` held here is a valid instant.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Veracity of an article. The numeric encoding is fixed: real = 0, fake = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Real = 0,
    Fake = 1,
}

impl Label {
    pub fn from_index(value: u8) -> Option<Label> {
        match value {
            0 => Some(Label::Real),
            1 => Some(Label::Fake),
            _ => None,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_fake(self) -> bool {
        self == Label::Fake
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub publish_time: i64,
    pub label: Option<Label>,
    pub features: Vec<f64>,
}

/// One repost of `article` by `user` at `time`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Engagement {
    pub user: String,
    pub article: String,
    pub time: i64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub articles: Vec<Article>,
    pub engagements: Vec<Engagement>,
    pub feature_dim: usize,
}

impl Dataset {
    pub fn new(articles: Vec<Article>, engagements: Vec<Engagement>, feature_dim: usize) -> Self {
        Dataset {
            articles,
            engagements,
            feature_dim,
        }
    }

    /// Article id → position in `articles`. Later duplicates shadow earlier ones.
    pub fn article_index(&self) -> HashMap<&str, usize> {
        self.articles
            .iter()
            .enumerate()
            .map(|(i, a)| (a.id.as_str(), i))
            .collect()
    }

    pub fn article_map(&self) -> HashMap<&str, &Article> {
        self.articles.iter().map(|a| (a.id.as_str(), a)).collect()
    }

    /// Distinct users, sorted.
    pub fn users(&self) -> Vec<&str> {
        let mut users: Vec<&str> = self
            .engagements
            .iter()
            .map(|e| e.user.as_str())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        users.sort_unstable();
        users
    }

    pub fn validate(&self) -> ValidationReport {
        validate_dataset(self)
    }

    /// Sort articles by `(publish_time, id)`, the canonical order used by loaders.
    pub fn sort_articles(&mut self) {
        self.articles
            .sort_by(|a, b| (a.publish_time, &a.id).cmp(&(b.publish_time, &b.id)));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    DuplicateArticleId {
        id: String,
        occurrences: usize,
    },
    DanglingReference {
        engagement: usize,
        article: String,
    },
    FeatureLength {
        article: String,
        expected: usize,
        found: usize,
    },
    NonFiniteFeature {
        article: String,
    },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::DuplicateArticleId { id, occurrences } => {
                write!(f, "article id `{id}` appears {occurrences} times")
            }
            ValidationIssue::DanglingReference { engagement, article } => {
                write!(f, "engagement #{engagement} references unknown article `{article}`")
            }
            ValidationIssue::FeatureLength {
                article,
                expected,
                found,
            } => write!(
                f,
                "article `{article}` has {found} features, expected {expected}"
            ),
            ValidationIssue::NonFiniteFeature { article } => {
                write!(f, "article `{article}` has a non-finite feature value")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let msg = self
            .issues
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidDataset(msg))
    }
}

/// Collect every structural problem in `dataset` without modifying it.
pub fn validate_dataset(dataset: &Dataset) -> ValidationReport {
    let mut issues = Vec::new();

    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut order = Vec::new();
    for a in &dataset.articles {
        let count = seen.entry(a.id.as_str()).or_insert(0);
        if *count == 0 {
            order.push(a.id.as_str());
        }
        *count += 1;
    }
    for id in order {
        let occurrences = seen[id];
        if occurrences > 1 {
            issues.push(ValidationIssue::DuplicateArticleId {
                id: id.to_string(),
                occurrences,
            });
        }
    }

    for a in &dataset.articles {
        if a.features.len() != dataset.feature_dim {
            issues.push(ValidationIssue::FeatureLength {
                article: a.id.clone(),
                expected: dataset.feature_dim,
                found: a.features.len(),
            });
        } else if a.features.iter().any(|v| !v.is_finite()) {
            issues.push(ValidationIssue::NonFiniteFeature {
                article: a.id.clone(),
            });
        }
    }

    for (row, e) in dataset.engagements.iter().enumerate() {
        if !seen.contains_key(e.article.as_str()) {
            issues.push(ValidationIssue::DanglingReference {
                engagement: row,
                article: e.article.clone(),
            });
        }
    }

    ValidationReport { issues }
}

/// Thresholds that decide which engagements and users count as early.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlinessConfig {
    /// An engagement is early iff it happens strictly less than this many
    /// seconds after the article was published.
    pub deadline_seconds: i64,
    /// A user is early iff their earliness score is strictly greater than this.
    pub user_threshold: f64,
    /// Minimum engagements for a user to be active.
    pub min_engagements: usize,
}

impl EarlinessConfig {
    pub fn new(deadline_seconds: i64, user_threshold: f64, min_engagements: usize) -> Result<Self> {
        let cfg = EarlinessConfig {
            deadline_seconds,
            user_threshold,
            min_engagements,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.deadline_seconds <= 0 {
            return Err(Error::Config(format!(
                "deadline_seconds must be positive, got {}",
                self.deadline_seconds
            )));
        }
        if !(0.0..=1.0).contains(&self.user_threshold) {
            return Err(Error::Config(format!(
                "user_threshold must lie in [0, 1], got {}",
                self.user_threshold
            )));
        }
        if self.min_engagements == 0 {
            return Err(Error::Config("min_engagements must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn article(id: &str, t: i64) -> Article {
        Article {
            id: id.into(),
            publish_time: t,
            label: Some(Label::Real),
            features: vec![0.0, 1.0],
        }
    }

    fn engagement(user: &str, article: &str, time: i64) -> Engagement {
        Engagement {
            user: user.into(),
            article: article.into(),
            time,
        }
    }

    #[test]
    fn empty_dataset_is_valid() {
        let d = Dataset::new(vec![], vec![], 2);
        assert!(validate_dataset(&d).is_valid());
    }

    #[test]
    fn dangling_reference_reported_once() {
        let d = Dataset::new(
            vec![article("a", 1)],
            vec![engagement("u", "a", 2), engagement("u", "zz", 3)],
            2,
        );
        let report = validate_dataset(&d);
        assert_eq!(
            report.issues,
            vec![ValidationIssue::DanglingReference {
                engagement: 1,
                article: "zz".into()
            }]
        );
    }

    #[test]
    fn duplicate_ids_reported_once() {
        let d = Dataset::new(vec![article("a", 1), article("a", 2)], vec![], 2);
        let report = validate_dataset(&d);
        assert_eq!(
            report.issues,
            vec![ValidationIssue::DuplicateArticleId {
                id: "a".into(),
                occurrences: 2
            }]
        );
    }

    #[test]
    fn feature_problems_reported() {
        let mut bad = article("b", 1);
        bad.features = vec![1.0];
        let mut nan = article("c", 1);
        nan.features = vec![f64::NAN, 0.0];
        let d = Dataset::new(vec![article("a", 1), bad, nan], vec![], 2);
        let report = validate_dataset(&d);
        assert_eq!(report.issues.len(), 2);
        assert!(matches!(
            report.issues[0],
            ValidationIssue::FeatureLength { found: 1, .. }
        ));
        assert!(matches!(
            report.issues[1],
            ValidationIssue::NonFiniteFeature { .. }
        ));
        assert!(report.into_result().is_err());
    }

    #[test]
    fn validation_is_idempotent_and_pure() {
        let d = Dataset::new(
            vec![article("a", 1), article("a", 2)],
            vec![engagement("u", "x", 3)],
            2,
        );
        let before = d.clone();
        let r1 = validate_dataset(&d);
        let r2 = validate_dataset(&d);
        assert_eq!(r1, r2);
        assert_eq!(d, before);
    }

    #[test]
    fn earliness_config_bounds() {
        assert!(EarlinessConfig::new(60, 0.5, 3).is_ok());
        assert!(EarlinessConfig::new(0, 0.5, 3).is_err());
        assert!(EarlinessConfig::new(60, 1.5, 3).is_err());
        assert!(EarlinessConfig::new(60, 0.5, 0).is_err());
    }
}
