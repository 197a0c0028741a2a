//! Temporality-aware train/validation/test splits.
//!
//! Article bands are disjoint time windows. Engagement sets are cumulative:
//! each band sees every engagement up to its cut, regardless of which article
//! it targets. Active users are those with at least `m` engagements in the
//! band's engagement set.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Article, Dataset, Engagement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BandKind {
    Train,
    Val,
    Test,
}

impl BandKind {
    pub const ALL: [BandKind; 3] = [BandKind::Train, BandKind::Val, BandKind::Test];

    pub fn name(self) -> &'static str {
        match self {
            BandKind::Train => "train",
            BandKind::Val => "val",
            BandKind::Test => "test",
        }
    }
}

impl fmt::Display for BandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cuts {
    pub train: i64,
    pub val: i64,
    pub test: i64,
}

impl Cuts {
    pub fn get(&self, band: BandKind) -> i64 {
        match band {
            BandKind::Train => self.train,
            BandKind::Val => self.val,
            BandKind::Test => self.test,
        }
    }
}

/// One slice of the split. Indices point into the source dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Band {
    pub kind: BandKind,
    pub cut: i64,
    /// Article indices, ordered by `(publish_time, id)`.
    pub articles: Vec<usize>,
    /// Engagement indices with `time <= cut`, in log order.
    pub engagements: Vec<usize>,
    /// Active users, sorted.
    pub users: Vec<String>,
}

impl Band {
    pub fn article_refs<'d>(&self, dataset: &'d Dataset) -> Vec<&'d Article> {
        self.articles.iter().map(|&i| &dataset.articles[i]).collect()
    }

    pub fn engagement_refs<'d>(&self, dataset: &'d Dataset) -> Vec<&'d Engagement> {
        self.engagements
            .iter()
            .map(|&i| &dataset.engagements[i])
            .collect()
    }

    pub fn article_ids(&self, dataset: &Dataset) -> Vec<String> {
        self.articles
            .iter()
            .map(|&i| dataset.articles[i].id.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalSplit {
    pub cuts: Cuts,
    pub min_engagements: usize,
    pub train: Band,
    pub val: Band,
    pub test: Band,
}

impl TemporalSplit {
    pub fn band(&self, kind: BandKind) -> &Band {
        match kind {
            BandKind::Train => &self.train,
            BandKind::Val => &self.val,
            BandKind::Test => &self.test,
        }
    }

    pub fn bands(&self) -> [&Band; 3] {
        [&self.train, &self.val, &self.test]
    }
}

fn chronological(dataset: &Dataset) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dataset.articles.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&dataset.articles[a], &dataset.articles[b]);
        (x.publish_time, &x.id).cmp(&(y.publish_time, &y.id))
    });
    order
}

/// Split so that the earliest `ceil(f_train * n)` articles train, the next
/// `ceil(f_val * n)` validate and the rest test. Articles sharing a publish
/// time at a boundary are ordered by id.
///
/// `t_train` and `t_val` are the publish times of the last article in their
/// bands; `t_test` is the latest timestamp anywhere in the dataset, so the
/// test band sees the full log.
pub fn split_by_fraction(
    dataset: &Dataset,
    fractions: (f64, f64, f64),
    min_engagements: usize,
) -> Result<TemporalSplit> {
    let (f_tr, f_va, f_te) = fractions;
    if [f_tr, f_va, f_te].iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
        return Err(Error::Config(format!(
            "split fractions must be positive, got {fractions:?}"
        )));
    }
    if (f_tr + f_va + f_te - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "split fractions must sum to 1, got {fractions:?}"
        )));
    }
    let n = dataset.articles.len();
    let take = |f: f64| (f * n as f64 - 1e-9).ceil().max(0.0) as usize;
    let n_tr = take(f_tr);
    let n_va = take(f_va);
    if n_tr == 0 || n_va == 0 || n_tr + n_va >= n {
        return Err(Error::Split(format!(
            "{n} articles are too few for fractions {fractions:?}"
        )));
    }

    let order = chronological(dataset);
    let time = |i: usize| dataset.articles[order[i]].publish_time;
    let last_event = dataset.engagements.iter().map(|e| e.time).max();
    let cuts = Cuts {
        train: time(n_tr - 1),
        val: time(n_tr + n_va - 1),
        test: last_event.map_or(time(n - 1), |t| t.max(time(n - 1))),
    };
    if !(cuts.train < cuts.val && cuts.val < cuts.test) {
        return Err(Error::Split(format!(
            "publish-time ties make the cuts non-increasing: {cuts:?}"
        )));
    }

    let groups = [
        order[..n_tr].to_vec(),
        order[n_tr..n_tr + n_va].to_vec(),
        order[n_tr + n_va..].to_vec(),
    ];
    assemble(dataset, cuts, groups, min_engagements)
}

/// Split at explicit cut timestamps using the set-builder definitions:
/// `P_train = {t <= t_train}`, `P_val = {t_train < t <= t_val}`,
/// `P_test = {t_val < t <= t_test}`.
pub fn split_by_timestamps(
    dataset: &Dataset,
    t_train: i64,
    t_val: i64,
    t_test: i64,
    min_engagements: usize,
) -> Result<TemporalSplit> {
    if !(t_train < t_val && t_val < t_test) {
        return Err(Error::Config(format!(
            "cuts must satisfy t_train < t_val < t_test, got {t_train}, {t_val}, {t_test}"
        )));
    }
    let cuts = Cuts {
        train: t_train,
        val: t_val,
        test: t_test,
    };
    let mut groups: [Vec<usize>; 3] = Default::default();
    for i in chronological(dataset) {
        let t = dataset.articles[i].publish_time;
        if t <= t_train {
            groups[0].push(i);
        } else if t <= t_val {
            groups[1].push(i);
        } else if t <= t_test {
            groups[2].push(i);
        }
    }
    if groups[0].is_empty() {
        return Err(Error::Split("no article published before t_train".into()));
    }
    if groups[0]
        .iter()
        .all(|&i| dataset.articles[i].label.is_none())
    {
        return Err(Error::Split("training band has no labeled article".into()));
    }
    assemble(dataset, cuts, groups, min_engagements)
}

fn assemble(
    dataset: &Dataset,
    cuts: Cuts,
    groups: [Vec<usize>; 3],
    min_engagements: usize,
) -> Result<TemporalSplit> {
    if min_engagements == 0 {
        return Err(Error::Config("min_engagements must be at least 1".into()));
    }
    let [p_tr, p_va, p_te] = groups;
    let make = |kind: BandKind, articles: Vec<usize>| {
        let cut = cuts.get(kind);
        let engagements: Vec<usize> = dataset
            .engagements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.time <= cut)
            .map(|(i, _)| i)
            .collect();
        let users = active_users(
            engagements.iter().map(|&i| &dataset.engagements[i]),
            min_engagements,
        );
        Band {
            kind,
            cut,
            articles,
            engagements,
            users,
        }
    };
    Ok(TemporalSplit {
        cuts,
        min_engagements,
        train: make(BandKind::Train, p_tr),
        val: make(BandKind::Val, p_va),
        test: make(BandKind::Test, p_te),
    })
}

/// Users with at least `m` engagements in `log`, sorted.
pub fn active_users<'a>(log: impl IntoIterator<Item = &'a Engagement>, m: usize) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for e in log {
        *counts.entry(e.user.as_str()).or_insert(0) += 1;
    }
    let mut users: Vec<String> = counts
        .into_iter()
        .filter(|&(_, c)| c >= m)
        .map(|(u, _)| u.to_string())
        .collect();
    users.sort_unstable();
    users
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Label;

    fn dataset(times: &[i64], log: &[(&str, i64)]) -> Dataset {
        let articles = times
            .iter()
            .enumerate()
            .map(|(i, &t)| Article {
                id: format!("p{i:02}"),
                publish_time: t,
                label: Some(if i % 2 == 0 { Label::Real } else { Label::Fake }),
                features: vec![],
            })
            .collect();
        let engagements = log
            .iter()
            .map(|&(u, t)| Engagement {
                user: u.into(),
                article: "p00".into(),
                time: t,
            })
            .collect();
        Dataset::new(articles, engagements, 0)
    }

    #[test]
    fn ten_articles_seventy_ten_twenty() {
        let d = dataset(&(1..=10).collect::<Vec<_>>(), &[]);
        let s = split_by_fraction(&d, (0.7, 0.1, 0.2), 3).unwrap();
        assert_eq!(s.train.articles.len(), 7);
        assert_eq!(s.val.articles.len(), 1);
        assert_eq!(s.test.articles.len(), 2);
        assert_eq!((s.cuts.train, s.cuts.val, s.cuts.test), (7, 8, 10));
    }

    #[test]
    fn early_user_active_everywhere() {
        let d = dataset(
            &(1..=10).collect::<Vec<_>>(),
            &[("u", 1), ("u", 2), ("u", 3)],
        );
        let s = split_by_fraction(&d, (0.7, 0.1, 0.2), 3).unwrap();
        for band in s.bands() {
            assert_eq!(band.users, vec!["u".to_string()]);
        }
    }

    #[test]
    fn straddling_user_joins_later_bands() {
        // Cuts are 7, 8, 10: two engagements before t_train, one at t = 8.
        let d = dataset(
            &(1..=10).collect::<Vec<_>>(),
            &[("u", 2), ("u", 5), ("u", 8)],
        );
        let s = split_by_fraction(&d, (0.7, 0.1, 0.2), 3).unwrap();
        assert!(s.train.users.is_empty());
        assert_eq!(s.val.users, vec!["u".to_string()]);
        assert_eq!(s.test.users, vec!["u".to_string()]);
    }

    #[test]
    fn too_small_dataset_errors() {
        let d = dataset(&[1, 2], &[]);
        assert!(matches!(
            split_by_fraction(&d, (0.7, 0.1, 0.2), 1),
            Err(Error::Split(_))
        ));
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let d = dataset(&(1..=10).collect::<Vec<_>>(), &[]);
        assert!(split_by_fraction(&d, (0.5, 0.1, 0.2), 1).is_err());
        assert!(split_by_fraction(&d, (0.9, 0.0, 0.1), 1).is_err());
    }

    #[test]
    fn tie_at_cut_goes_to_training() {
        let d = dataset(&[1, 2, 5, 5, 9], &[]);
        let s = split_by_timestamps(&d, 5, 8, 10, 1).unwrap();
        assert_eq!(s.train.articles.len(), 4);
        assert!(s.val.articles.is_empty());
        assert_eq!(s.test.articles.len(), 1);
    }

    #[test]
    fn explicit_cuts_validate() {
        let d = dataset(&[5, 6, 7], &[]);
        assert!(split_by_timestamps(&d, 6, 6, 9, 1).is_err());
        assert!(matches!(
            split_by_timestamps(&d, 1, 6, 9, 1),
            Err(Error::Split(_))
        ));
        let mut unlabeled = d.clone();
        unlabeled.articles[0].label = None;
        assert!(matches!(
            split_by_timestamps(&unlabeled, 5, 6, 9, 1),
            Err(Error::Split(_))
        ));
    }

    #[test]
    fn identical_publish_times_broken_by_id() {
        let mut d = dataset(&[3, 3, 3, 3, 3, 3, 3, 4, 5, 6], &[]);
        d.articles.reverse();
        let s = split_by_fraction(&d, (0.7, 0.1, 0.2), 1).unwrap();
        let ids = s.train.article_ids(&d);
        assert_eq!(ids, ["p00", "p01", "p02", "p03", "p04", "p05", "p06"]);
    }
}
