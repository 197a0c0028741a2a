//! Per-edge earliness features.
//!
//! For an edge `(p_i, p_j)` the contributing engagements are those made on
//! `p_i` or `p_j` by users who engaged with both. Each one is counted in its
//! joint group, giving the raw vector `(EE, EL, LE, LL)`.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::earliness::EarlinessLabels;
use crate::error::{Error, Result};
use crate::graph::{EngagementMatrix, SocialGraph};
use crate::model::Engagement;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFeatureTable {
    /// Raw group counts, aligned with `graph.edges`.
    pub raw: Vec<[u64; 4]>,
    /// Column-normalized counts in `[0, 1]`.
    pub normalized: Vec<[f64; 4]>,
}

/// Count contributing engagements per edge and group.
///
/// `log` must be the slice `labels` was computed from. Engagements by users
/// outside the matrix or on articles outside the graph are ignored.
pub fn build_edge_features(
    graph: &SocialGraph,
    matrix: &EngagementMatrix,
    log: &[&Engagement],
    labels: &EarlinessLabels,
) -> Result<EdgeFeatureTable> {
    if labels.groups.len() != log.len() {
        return Err(Error::Shape(format!(
            "earliness labels cover {} engagements, log has {}",
            labels.groups.len(),
            log.len()
        )));
    }
    let users = matrix.user_index();
    let cols = matrix.article_index();

    // Group counts per (user, article), over the user's non-zero columns.
    let mut per_user: Vec<HashMap<usize, [u64; 4]>> = vec![HashMap::new(); matrix.users.len()];
    for (e, group) in log.iter().zip(&labels.groups) {
        let (Some(&u), Some(&c), Some(g)) =
            (users.get(e.user.as_str()), cols.get(e.article.as_str()), group)
        else {
            continue;
        };
        per_user[u].entry(c).or_insert([0; 4])[g.index()] += 1;
    }

    let edge_index: HashMap<(usize, usize), usize> = graph
        .edges
        .iter()
        .enumerate()
        .map(|(k, e)| ((e.src, e.dst), k))
        .collect();
    let mut raw = vec![[0u64; 4]; graph.edges.len()];
    for counts in per_user {
        let mut cells: Vec<(usize, [u64; 4])> = counts.into_iter().collect();
        cells.sort_unstable_by_key(|&(c, _)| c);
        for (a, (i, zi)) in cells.iter().enumerate() {
            for (j, zj) in &cells[a + 1..] {
                let k = *edge_index.get(&(*i, *j)).ok_or_else(|| {
                    Error::Shape("engagement matrix does not match graph edges".into())
                })?;
                for g in 0..4 {
                    raw[k][g] += zi[g] + zj[g];
                }
            }
        }
    }
    let normalized = normalize_columns(&raw);
    Ok(EdgeFeatureTable { raw, normalized })
}

pub fn column_max(raw: &[[u64; 4]]) -> [u64; 4] {
    let mut max = [0u64; 4];
    for row in raw {
        for g in 0..4 {
            max[g] = max[g].max(row[g]);
        }
    }
    max
}

/// Divide each column by its maximum; all-zero columns stay zero.
pub fn normalize_columns(raw: &[[u64; 4]]) -> Vec<[f64; 4]> {
    normalize_with(raw, &column_max(raw))
}

/// Scale by externally supplied column maxima, clamping to `[0, 1]`.
pub fn normalize_with(raw: &[[u64; 4]], max: &[u64; 4]) -> Vec<[f64; 4]> {
    raw.iter()
        .map(|row| {
            std::array::from_fn(|g| {
                if max[g] == 0 {
                    0.0
                } else {
                    (row[g] as f64 / max[g] as f64).min(1.0)
                }
            })
        })
        .collect()
}

/// Edge feature encodings compared in the ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureVariant {
    /// Normalized `(EE, EL, LE, LL)`.
    Joint,
    /// Uniform noise in `[0, 1]^4`.
    Rand,
    /// `(early, late)` engagement counts, ignoring user class.
    NoUser,
    /// `(early-user, late-user)` engagement counts, ignoring engagement class.
    NoEng,
    /// Group shares `z / sum(z)`.
    Ratio,
    /// Concatenated endpoint node features.
    NodeFeat,
}

impl FeatureVariant {
    pub fn name(self) -> &'static str {
        match self {
            FeatureVariant::Joint => "joint",
            FeatureVariant::Rand => "rand",
            FeatureVariant::NoUser => "no-user",
            FeatureVariant::NoEng => "no-eng",
            FeatureVariant::Ratio => "ratio",
            FeatureVariant::NodeFeat => "node-feat",
        }
    }

    pub fn dim(self, node_feature_dim: usize) -> usize {
        match self {
            FeatureVariant::Joint | FeatureVariant::Rand | FeatureVariant::Ratio => 4,
            FeatureVariant::NoUser | FeatureVariant::NoEng => 2,
            FeatureVariant::NodeFeat => 2 * node_feature_dim,
        }
    }

    /// Whether the encoding is a count that needs column scaling before use.
    pub fn is_count(self) -> bool {
        matches!(
            self,
            FeatureVariant::Joint | FeatureVariant::NoUser | FeatureVariant::NoEng
        )
    }
}

impl fmt::Display for FeatureVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "joint" | "full" => FeatureVariant::Joint,
            "rand" | "random" => FeatureVariant::Rand,
            "no-user" => FeatureVariant::NoUser,
            "no-eng" => FeatureVariant::NoEng,
            "ratio" => FeatureVariant::Ratio,
            "node-feat" | "nf" => FeatureVariant::NodeFeat,
            _ => return Err(Error::UnknownVariant(s.to_string())),
        })
    }
}

/// Dense row-major edge inputs for the weight estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeInputs {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl EdgeInputs {
    pub fn rows(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.values.len() / self.dim
        }
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn column_max(&self) -> Vec<f64> {
        let mut max = vec![0.0f64; self.dim];
        for row in self.values.chunks(self.dim.max(1)) {
            for (m, &v) in max.iter_mut().zip(row) {
                *m = m.max(v);
            }
        }
        max
    }

    /// Divide columns by `max` (zero maxima leave the column untouched),
    /// clamping the result to at most 1.
    pub fn scale_columns(&mut self, max: &[f64]) {
        for row in self.values.chunks_mut(self.dim.max(1)) {
            for (v, &m) in row.iter_mut().zip(max) {
                if m > 0.0 {
                    *v = (*v / m).min(1.0);
                }
            }
        }
    }
}

/// Encode the table under `variant`. Count-valued variants come back as raw
/// counts; `Rand` draws from `rng`.
pub fn feature_variant<R: Rng>(
    table: &EdgeFeatureTable,
    graph: &SocialGraph,
    variant: FeatureVariant,
    rng: &mut R,
) -> Result<EdgeInputs> {
    let dim = variant.dim(graph.feature_dim());
    let mut values = Vec::with_capacity(table.raw.len() * dim);
    match variant {
        FeatureVariant::Joint => {
            for z in &table.raw {
                values.extend(z.iter().map(|&c| c as f64));
            }
        }
        FeatureVariant::Rand => {
            values.extend((0..table.raw.len() * dim).map(|_| rng.random::<f64>()));
        }
        FeatureVariant::NoUser => {
            for [ee, el, le, ll] in &table.raw {
                values.extend([(ee + le) as f64, (el + ll) as f64]);
            }
        }
        FeatureVariant::NoEng => {
            for [ee, el, le, ll] in &table.raw {
                values.extend([(ee + el) as f64, (le + ll) as f64]);
            }
        }
        FeatureVariant::Ratio => {
            for z in &table.raw {
                let sum: u64 = z.iter().sum();
                if sum == 0 {
                    values.extend([0.25; 4]);
                } else {
                    values.extend(z.iter().map(|&c| c as f64 / sum as f64));
                }
            }
        }
        FeatureVariant::NodeFeat => {
            if graph.nodes.iter().any(|n| n.features.len() * 2 != dim) {
                return Err(Error::FeatureDim {
                    expected: dim / 2,
                    found: graph
                        .nodes
                        .iter()
                        .map(|n| n.features.len())
                        .find(|&l| l * 2 != dim)
                        .unwrap_or(0),
                    context: "node features for edge inputs".into(),
                });
            }
            for e in &graph.edges {
                values.extend_from_slice(&graph.nodes[e.src].features);
                values.extend_from_slice(&graph.nodes[e.dst].features);
            }
        }
    }
    if graph.edges.len() != table.raw.len() {
        return Err(Error::Shape("feature table does not match graph".into()));
    }
    Ok(EdgeInputs { dim, values })
}

/// `src_id dst_id ee el le ll n_ee n_el n_le n_ll` with a header row.
pub fn write_edge_features<W: Write>(
    mut w: W,
    graph: &SocialGraph,
    table: &EdgeFeatureTable,
) -> std::io::Result<()> {
    writeln!(w, "src_id\tdst_id\tee\tel\tle\tll\tn_ee\tn_el\tn_le\tn_ll")?;
    for ((e, z), n) in graph.edges.iter().zip(&table.raw).zip(&table.normalized) {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            graph.nodes[e.src].id,
            graph.nodes[e.dst].id,
            z[0],
            z[1],
            z[2],
            z[3],
            n[0],
            n[1],
            n[2],
            n[3]
        )?;
    }
    Ok(())
}
