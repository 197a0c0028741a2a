//! Oracle comparisons shared by the focused tests and the acceptance run.

use std::collections::BTreeSet;

use earlybird::earliness::EarlinessLabels;
use earlybird::features::build_edge_features;
use earlybird::graph::build_band_graph;
use earlybird::nn::ranking_loss;
use earlybird::split::{split_by_fraction, split_by_timestamps, BandKind, TemporalSplit};
use earlybird::{Dataset, EarlinessConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{active_at, dense_cooccurrence, enumerate_group_counts, random_dataset};

pub const BANDS: [BandKind; 3] = [BandKind::Train, BandKind::Val, BandKind::Test];

pub fn small_config() -> EarlinessConfig {
    EarlinessConfig::new(60, 0.4, 2).unwrap()
}

/// A dataset with at most 20 articles and 30 users, split at cuts that vary
/// with the seed. `None` when the cuts leave the training band empty.
pub fn small_split(seed: u64) -> Option<(Dataset, TemporalSplit)> {
    let d = random_dataset(seed, 20, 30);
    let cut_a = 700 + (seed as i64 % 5) * 10;
    split_by_timestamps(&d, cut_a, cut_a + 600, 3000, small_config().min_engagements)
        .ok()
        .map(|s| (d, s))
}

/// Sparse co-engagement weights against a dense `EᵀE` with the diagonal
/// zeroed, for every band of `seeds`. Returns the number of bands checked.
pub fn graphs_match_dense(seeds: std::ops::Range<u64>) -> Result<usize, String> {
    let mut checked = 0;
    for seed in seeds {
        let Some((d, split)) = small_split(seed) else { continue };
        for kind in BANDS {
            let (_, g) = build_band_graph(&d, &split, kind).map_err(|e| e.to_string())?;
            let dense = dense_cooccurrence(&d, &split, kind);
            if dense.len() != g.num_nodes() {
                return Err(format!("seed {seed} {kind}: {} nodes vs {}", g.num_nodes(), dense.len()));
            }
            for (i, row) in dense.iter().enumerate() {
                for (j, &want) in row.iter().enumerate() {
                    if g.weight(i, j) != want {
                        return Err(format!("seed {seed} {kind} ({i}, {j}): {} vs {want}", g.weight(i, j)));
                    }
                }
            }
            let nonzero = dense.iter().flatten().filter(|&&v| v > 0).count();
            if g.edges.len() * 2 != nonzero {
                return Err(format!("seed {seed} {kind}: {} edges vs {nonzero} nonzero", g.edges.len()));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Every edge's group counts against a direct walk over the raw log.
/// Returns the number of edges checked.
pub fn edge_features_match_enumeration(seeds: std::ops::Range<u64>) -> Result<usize, String> {
    let cfg = small_config();
    let mut checked = 0;
    for seed in seeds {
        let Some((d, split)) = small_split(seed) else { continue };
        let lookup = d.article_map();
        for kind in BANDS {
            let (matrix, g) = build_band_graph(&d, &split, kind).map_err(|e| e.to_string())?;
            let log = split.band(kind).engagement_refs(&d);
            let labels = EarlinessLabels::compute(&log, &lookup, &cfg).map_err(|e| e.to_string())?;
            let table = build_edge_features(&g, &matrix, &log, &labels).map_err(|e| e.to_string())?;
            for (e, raw) in g.edges.iter().zip(&table.raw) {
                let want =
                    enumerate_group_counts(&d, &split, kind, &cfg, &g.nodes[e.src].id, &g.nodes[e.dst].id);
                if *raw != want {
                    return Err(format!("seed {seed} {kind} edge {e:?}: {raw:?} vs {want:?}"));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

fn brute_force_ranking(clean: &[f64], noisy: &[f64], margin: f64) -> f64 {
    let mut total = 0.0;
    for c in clean {
        for n in noisy {
            total += f64::max(0.0, -(c - n) + margin);
        }
    }
    total / (clean.len() * noisy.len()) as f64
}

/// Largest gap between the ranking loss and a K x K double loop.
pub fn ranking_matches_double_loop() -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for k in [1usize, 10, 100] {
        for margin in [0.0, 0.1, 0.5] {
            let c: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
            let n: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
            let got = ranking_loss(&c, &n, margin).map_err(|e| e.to_string())?.value;
            let want = brute_force_ranking(&c, &n, margin);
            let gap = (got - want).abs();
            if gap > 1e-12 {
                return Err(format!("K={k} margin={margin}: {got} vs {want}"));
            }
            worst = worst.max(gap);
        }
    }
    Ok(worst)
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Band membership, engagement prefixes, nesting and the active-user filter.
/// `strict` also requires each non-train article to be published after the
/// previous cut; fraction splits may place boundary ties on either side.
pub fn check_split(d: &Dataset, s: &TemporalSplit, strict: bool) -> Result<(), String> {
    let c = s.cuts;
    ensure!(c.train < c.val && c.val < c.test, "cuts not increasing: {c:?}");

    let mut seen = BTreeSet::new();
    for (band, lo, hi) in [
        (&s.train, i64::MIN, c.train),
        (&s.val, c.train, c.val),
        (&s.test, c.val, c.test),
    ] {
        for &i in &band.articles {
            ensure!(seen.insert(i), "article {i} in two bands");
            let t = d.articles[i].publish_time;
            ensure!(t <= hi, "article {i} at {t} after the {} cut {hi}", band.kind);
            if band.kind != BandKind::Train {
                let after = if strict { t > lo } else { t >= lo };
                ensure!(after, "article {i} at {t} before the {} window {lo}", band.kind);
            }
        }
    }

    let mut previous: BTreeSet<usize> = BTreeSet::new();
    for band in s.bands() {
        let set: BTreeSet<usize> = band.engagements.iter().copied().collect();
        let want: BTreeSet<usize> = d
            .engagements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.time <= band.cut)
            .map(|(i, _)| i)
            .collect();
        ensure!(set == want, "{} engagements are not the prefix up to {}", band.kind, band.cut);
        ensure!(previous.is_subset(&set), "{} engagements do not contain the previous band's", band.kind);
        previous = set;

        let users: BTreeSet<String> = band.users.iter().cloned().collect();
        ensure!(
            users == active_at(d, band.cut, s.min_engagements),
            "{} active users differ from a recount",
            band.kind
        );
    }
    Ok(())
}

/// Every article inside the test window lands in the band the window names.
pub fn check_timestamp_membership(d: &Dataset, s: &TemporalSplit) -> Result<(), String> {
    for (i, art) in d.articles.iter().enumerate() {
        let t = art.publish_time;
        let band = if t <= s.cuts.train {
            &s.train
        } else if t <= s.cuts.val {
            &s.val
        } else if t <= s.cuts.test {
            &s.test
        } else {
            continue;
        };
        ensure!(band.articles.contains(&i), "article {i} at {t} missing from {}", band.kind);
    }
    Ok(())
}

/// Sizes follow `ceil(f * n)` and the bands cover every article.
pub fn check_fraction_sizes(d: &Dataset, s: &TemporalSplit, f_train: f64) -> Result<(), String> {
    let n = d.articles.len();
    let total = s.train.articles.len() + s.val.articles.len() + s.test.articles.len();
    ensure!(total == n, "bands hold {total} of {n} articles");
    let want = (f_train * n as f64 - 1e-9).ceil() as usize;
    ensure!(s.train.articles.len() == want, "train holds {} articles, want {want}", s.train.articles.len());
    Ok(())
}

/// Timestamp and fraction splits over `count` random datasets. Returns the
/// number of splits checked.
pub fn split_suite(count: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut checked = 0;
    for seed in 0..count {
        let d = random_dataset(seed, 20, 30);
        let m = rng.random_range(1..4);
        let a = rng.random_range(0..1500);
        let gap = rng.random_range(1..1000);
        if let Ok(s) = split_by_timestamps(&d, a, a + gap, a + gap + 800, m) {
            check_split(&d, &s, true).map_err(|e| format!("seed {seed} cuts: {e}"))?;
            check_timestamp_membership(&d, &s).map_err(|e| format!("seed {seed} cuts: {e}"))?;
            checked += 1;
        }
        if let Ok(s) = split_by_fraction(&d, (0.7, 0.1, 0.2), m) {
            check_split(&d, &s, false).map_err(|e| format!("seed {seed} fractions: {e}"))?;
            check_fraction_sizes(&d, &s, 0.7).map_err(|e| format!("seed {seed} fractions: {e}"))?;
            checked += 1;
        }
    }
    Ok(checked)
}
