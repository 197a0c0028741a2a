//! Engagement and user earliness, fake-news affinity, and the histogram
//! tables used to inspect them.
//!
//! All functions take an engagement log as a slice of references and return
//! per-engagement results aligned with that slice. Per-user results are keyed
//! by user id in a `BTreeMap` so iteration order is stable.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{Article, EarlinessConfig, Engagement};

pub type ArticleLookup<'a> = HashMap<&'a str, &'a Article>;

/// Joint (user class, engagement class) group of one engagement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    /// Early user, early engagement.
    EE = 0,
    /// Early user, late engagement.
    EL = 1,
    /// Late user, early engagement.
    LE = 2,
    /// Late user, late engagement.
    LL = 3,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::EE, Group::EL, Group::LE, Group::LL];

    pub fn new(early_user: bool, early_engagement: bool) -> Group {
        match (early_user, early_engagement) {
            (true, true) => Group::EE,
            (true, false) => Group::EL,
            (false, true) => Group::LE,
            (false, false) => Group::LL,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn early_user(self) -> bool {
        matches!(self, Group::EE | Group::EL)
    }

    pub fn early_engagement(self) -> bool {
        matches!(self, Group::EE | Group::LE)
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Group::EE => "EE",
            Group::EL => "EL",
            Group::LE => "LE",
            Group::LL => "LL",
        };
        f.write_str(s)
    }
}

fn lookup<'a>(articles: &ArticleLookup<'a>, e: &Engagement) -> Result<&'a Article> {
    articles.get(e.article.as_str()).copied().ok_or_else(|| {
        Error::InvalidDataset(format!(
            "engagement by `{}` references unknown article `{}`",
            e.user, e.article
        ))
    })
}

/// Per-engagement early flags plus the positions whose engagement predates
/// its article (clock skew). Skewed engagements are classified early.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EngagementEarliness {
    pub early: Vec<bool>,
    pub skewed: Vec<usize>,
}

/// Early iff `time - publish_time < deadline`.
pub fn classify_engagements(
    log: &[&Engagement],
    articles: &ArticleLookup<'_>,
    deadline_seconds: i64,
) -> Result<EngagementEarliness> {
    let mut out = EngagementEarliness {
        early: Vec::with_capacity(log.len()),
        skewed: Vec::new(),
    };
    for (i, e) in log.iter().enumerate() {
        let delta = e.time - lookup(articles, e)?.publish_time;
        if delta < 0 {
            out.skewed.push(i);
        }
        out.early.push(delta < deadline_seconds);
    }
    Ok(out)
}

fn engagement_counts<'a>(log: &[&'a Engagement]) -> HashMap<&'a str, usize> {
    let mut counts = HashMap::new();
    for e in log {
        *counts.entry(e.user.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Fake-news affinity per active user.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FnaScores {
    pub scores: BTreeMap<String, f64>,
    /// Positions in the log whose article carries no label; they are left out
    /// of every ratio.
    pub unlabeled: Vec<usize>,
}

/// FNA(u) = fake engagements / labeled engagements, for users with at least
/// `m` engagements in `log`.
pub fn fna_scores(
    log: &[&Engagement],
    articles: &ArticleLookup<'_>,
    min_engagements: usize,
) -> Result<FnaScores> {
    fna_over(log, articles, min_engagements, |_| true)
}

/// FNA restricted to the engagements accepted by `keep`. Activity is still
/// judged over the whole log; the denominator counts only kept, labeled
/// engagements, and users with none are omitted.
pub fn fna_over(
    log: &[&Engagement],
    articles: &ArticleLookup<'_>,
    min_engagements: usize,
    keep: impl Fn(usize) -> bool,
) -> Result<FnaScores> {
    let activity = engagement_counts(log);
    let mut tally: HashMap<&str, (usize, usize)> = HashMap::new();
    let mut unlabeled = Vec::new();
    for (i, e) in log.iter().enumerate() {
        let article = lookup(articles, e)?;
        let Some(label) = article.label else {
            unlabeled.push(i);
            continue;
        };
        if activity[e.user.as_str()] < min_engagements || !keep(i) {
            continue;
        }
        let t = tally.entry(e.user.as_str()).or_insert((0, 0));
        t.0 += usize::from(label.is_fake());
        t.1 += 1;
    }
    let scores = tally
        .into_iter()
        .map(|(u, (fake, all))| (u.to_string(), fake as f64 / all as f64))
        .collect();
    Ok(FnaScores { scores, unlabeled })
}

/// UE(u) = early engagements / all engagements, for users with at least `m`
/// engagements in `log`.
pub fn user_earliness(
    log: &[&Engagement],
    articles: &ArticleLookup<'_>,
    deadline_seconds: i64,
    min_engagements: usize,
) -> Result<BTreeMap<String, f64>> {
    let classes = classify_engagements(log, articles, deadline_seconds)?;
    Ok(user_earliness_from(log, &classes.early, min_engagements))
}

fn user_earliness_from(log: &[&Engagement], early: &[bool], m: usize) -> BTreeMap<String, f64> {
    let mut tally: HashMap<&str, (usize, usize)> = HashMap::new();
    for (e, &is_early) in log.iter().zip(early) {
        let t = tally.entry(e.user.as_str()).or_insert((0, 0));
        t.0 += usize::from(is_early);
        t.1 += 1;
    }
    tally
        .into_iter()
        .filter(|&(_, (_, all))| all >= m)
        .map(|(u, (early, all))| (u.to_string(), early as f64 / all as f64))
        .collect()
}

/// Early user iff UE strictly exceeds the threshold.
#[inline]
pub fn is_early_user(ue: f64, user_threshold: f64) -> bool {
    ue > user_threshold
}

/// Joint group of each engagement; `None` for engagements by users below the
/// activity threshold.
pub fn joint_groups(
    log: &[&Engagement],
    articles: &ArticleLookup<'_>,
    config: &EarlinessConfig,
) -> Result<Vec<Option<Group>>> {
    Ok(EarlinessLabels::compute(log, articles, config)?.groups)
}

/// Everything earliness-related about one engagement log.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EarlinessLabels {
    /// Aligned with the log.
    pub early: Vec<bool>,
    /// Aligned with the log; `None` for inactive users.
    pub groups: Vec<Option<Group>>,
    pub skewed: Vec<usize>,
    /// UE per active user.
    pub user_earliness: BTreeMap<String, f64>,
    /// Filled only by [`EarlinessLabels::with_fna`]; feature building never
    /// needs labels.
    pub fna: Option<BTreeMap<String, f64>>,
    pub user_threshold: f64,
}

impl EarlinessLabels {
    pub fn compute(
        log: &[&Engagement],
        articles: &ArticleLookup<'_>,
        config: &EarlinessConfig,
    ) -> Result<Self> {
        config.check()?;
        let classes = classify_engagements(log, articles, config.deadline_seconds)?;
        let ue = user_earliness_from(log, &classes.early, config.min_engagements);
        let groups = log
            .iter()
            .zip(&classes.early)
            .map(|(e, &early)| {
                ue.get(&e.user)
                    .map(|&score| Group::new(is_early_user(score, config.user_threshold), early))
            })
            .collect();
        Ok(EarlinessLabels {
            early: classes.early,
            groups,
            skewed: classes.skewed,
            user_earliness: ue,
            fna: None,
            user_threshold: config.user_threshold,
        })
    }

    pub fn with_fna(
        mut self,
        log: &[&Engagement],
        articles: &ArticleLookup<'_>,
        min_engagements: usize,
    ) -> Result<Self> {
        self.fna = Some(fna_scores(log, articles, min_engagements)?.scores);
        Ok(self)
    }

    pub fn is_early_user(&self, user: &str) -> Option<bool> {
        self.user_earliness
            .get(user)
            .map(|&ue| is_early_user(ue, self.user_threshold))
    }

    pub fn group_sizes(&self) -> [usize; 4] {
        let mut sizes = [0; 4];
        for g in self.groups.iter().flatten() {
            sizes[g.index()] += 1;
        }
        sizes
    }
}

/// Equal-width histogram over `[0, 1]`; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn edges(&self, k: usize) -> (f64, f64) {
        let n = self.bins() as f64;
        (k as f64 / n, (k + 1) as f64 / n)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn fna_histogram(scores: impl IntoIterator<Item = f64>, bins: usize) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::Config(format!("histogram needs at least 2 bins, got {bins}")));
    }
    let mut counts = vec![0u64; bins];
    for s in scores {
        let k = ((s.clamp(0.0, 1.0) * bins as f64).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(Histogram { counts })
}

/// Twice the mean distance from 0.5: 1 when every score is 0 or 1, 0 when
/// every score is 0.5. Empty input gives 0.
pub fn skewness(scores: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = scores
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + (x - 0.5).abs(), n + 1));
    if n == 0 {
        0.0
    } else {
        2.0 * sum / n as f64
    }
}

/// Rows `bin_lo bin_hi count group` with a header line.
pub fn write_histograms<W: Write>(mut w: W, groups: &[(String, Histogram)]) -> std::io::Result<()> {
    writeln!(w, "bin_lo\tbin_hi\tcount\tgroup")?;
    for (name, hist) in groups {
        for (k, &c) in hist.counts.iter().enumerate() {
            let (lo, hi) = hist.edges(k);
            writeln!(w, "{lo}\t{hi}\t{c}\t{name}")?;
        }
    }
    Ok(())
}

/// FNA distributions overall and split by engagement class, user class, and
/// joint group.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlinessAnalysis {
    pub overall: BTreeMap<String, f64>,
    pub by_engagement: [(String, BTreeMap<String, f64>); 2],
    pub by_user: [(String, BTreeMap<String, f64>); 2],
    pub joint: [(String, BTreeMap<String, f64>); 4],
    pub labels: EarlinessLabels,
    pub unlabeled: usize,
}

impl EarlinessAnalysis {
    pub fn run(
        log: &[&Engagement],
        articles: &ArticleLookup<'_>,
        config: &EarlinessConfig,
    ) -> Result<Self> {
        let m = config.min_engagements;
        let labels = EarlinessLabels::compute(log, articles, config)?;
        let all = fna_scores(log, articles, m)?;
        let sel = |pred: &dyn Fn(usize) -> bool| fna_over(log, articles, m, pred).map(|s| s.scores);

        let early = &labels.early;
        let groups = &labels.groups;
        let by_engagement = [
            ("early".to_string(), sel(&|i| early[i])?),
            ("late".to_string(), sel(&|i| !early[i])?),
        ];
        let by_user = [
            (
                "early_user".to_string(),
                sel(&|i| groups[i].is_some_and(Group::early_user))?,
            ),
            (
                "late_user".to_string(),
                sel(&|i| groups[i].is_some_and(|g| !g.early_user()))?,
            ),
        ];
        let joint = Group::ALL.map(|g| (g.to_string(), sel(&|i| groups[i] == Some(g))));
        let joint = {
            let [a, b, c, d] = joint;
            [
                (a.0, a.1?),
                (b.0, b.1?),
                (c.0, c.1?),
                (d.0, d.1?),
            ]
        };
        Ok(EarlinessAnalysis {
            overall: all.scores,
            by_engagement,
            by_user,
            joint,
            labels,
            unlabeled: all.unlabeled.len(),
        })
    }

    pub fn histograms(
        groups: &[(String, BTreeMap<String, f64>)],
        bins: usize,
    ) -> Result<Vec<(String, Histogram)>> {
        groups
            .iter()
            .map(|(name, scores)| Ok((name.clone(), fna_histogram(scores.values().copied(), bins)?)))
            .collect()
    }
}
