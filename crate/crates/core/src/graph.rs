//! Engagement matrices and the article co-engagement graph built from them.
//!
//! The adjacency `A = EᵀE` (diagonal dropped) is accumulated user by user
//! over each user's non-zero columns, so memory scales with the number of
//! co-engaged pairs rather than with `|P|²`.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{Article, Dataset, Engagement, Label};
use crate::split::{BandKind, TemporalSplit};

/// User × article counts. Rows are sparse and sorted by column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngagementMatrix {
    pub users: Vec<String>,
    pub articles: Vec<String>,
    pub rows: Vec<Vec<(usize, u64)>>,
}

impl EngagementMatrix {
    pub fn get(&self, user: usize, article: usize) -> u64 {
        let row = &self.rows[user];
        row.binary_search_by_key(&article, |&(c, _)| c)
            .map_or(0, |k| row[k].1)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().flatten().map(|&(_, c)| c).sum()
    }

    pub fn user_index(&self) -> HashMap<&str, usize> {
        index_of(&self.users)
    }

    pub fn article_index(&self) -> HashMap<&str, usize> {
        index_of(&self.articles)
    }
}

fn index_of(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
}

/// Count engagements whose user is in `users` and whose article is in `articles`.
pub fn build_engagement_matrix<'a>(
    articles: &[String],
    users: &[String],
    engagements: impl IntoIterator<Item = &'a Engagement>,
) -> EngagementMatrix {
    let col = index_of(articles);
    let row = index_of(users);
    let mut acc: Vec<HashMap<usize, u64>> = vec![HashMap::new(); users.len()];
    for e in engagements {
        if let (Some(&r), Some(&c)) = (row.get(e.user.as_str()), col.get(e.article.as_str())) {
            *acc[r].entry(c).or_insert(0) += 1;
        }
    }
    let rows = acc
        .into_iter()
        .map(|m| {
            let mut r: Vec<(usize, u64)> = m.into_iter().collect();
            r.sort_unstable();
            r
        })
        .collect();
    EngagementMatrix {
        users: users.to_vec(),
        articles: articles.to_vec(),
        rows,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub label: Option<Label>,
    pub publish_time: i64,
    pub features: Vec<f64>,
}

impl From<&Article> for Node {
    fn from(a: &Article) -> Self {
        Node {
            id: a.id.clone(),
            label: a.label,
            publish_time: a.publish_time,
            features: a.features.clone(),
        }
    }
}

/// Undirected edge with `src < dst`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: u64,
}

/// Article graph. The adjacency is held only as the canonical upper-triangle
/// edge list, sorted by `(src, dst)`; it is symmetric with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl SocialGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// `A[i][j]`, symmetric, zero on the diagonal and for absent pairs.
    pub fn weight(&self, i: usize, j: usize) -> u64 {
        if i == j {
            return 0;
        }
        let (src, dst) = if i < j { (i, j) } else { (j, i) };
        self.edges
            .binary_search_by(|e| (e.src, e.dst).cmp(&(src, dst)))
            .map_or(0, |k| self.edges[k].weight)
    }

    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.src, e.dst)).collect()
    }

    pub fn labels(&self) -> Vec<Option<Label>> {
        self.nodes.iter().map(|n| n.label).collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.features.len())
    }

    /// `src_id dst_id weight` per line.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.edges {
            writeln!(w, "{} {} {}", self.nodes[e.src].id, self.nodes[e.dst].id, e.weight)?;
        }
        Ok(())
    }

    /// `id label publish_time` per line; unknown labels are written as `-`.
    pub fn write_node_table<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for n in &self.nodes {
            let label = n.label.map_or_else(|| "-".to_string(), |l| l.to_string());
            writeln!(w, "{} {} {}", n.id, label, n.publish_time)?;
        }
        Ok(())
    }
}

/// Co-engagement graph over the columns of `matrix`. `nodes` must list the
/// matrix's articles in column order.
pub fn build_social_graph(matrix: &EngagementMatrix, nodes: Vec<Node>) -> Result<SocialGraph> {
    if nodes.len() != matrix.articles.len()
        || nodes.iter().zip(&matrix.articles).any(|(n, id)| &n.id != id)
    {
        return Err(Error::Shape(
            "graph nodes must match the engagement matrix columns".into(),
        ));
    }
    Ok(SocialGraph {
        nodes,
        edges: co_engagement_edges(matrix),
    })
}

/// Off-diagonal entries of `EᵀE` as a sorted upper-triangle edge list.
pub fn co_engagement_edges(matrix: &EngagementMatrix) -> Vec<Edge> {
    let mut acc: HashMap<(usize, usize), u64> = HashMap::new();
    for row in &matrix.rows {
        for (a, &(i, ci)) in row.iter().enumerate() {
            for &(j, cj) in &row[a + 1..] {
                *acc.entry((i, j)).or_insert(0) += ci * cj;
            }
        }
    }
    let mut edges: Vec<Edge> = acc
        .into_iter()
        .map(|((src, dst), weight)| Edge { src, dst, weight })
        .collect();
    edges.sort_unstable();
    edges
}

/// Engagement matrix and co-engagement graph for one band of a split.
pub fn build_band_graph(
    dataset: &Dataset,
    split: &TemporalSplit,
    kind: BandKind,
) -> Result<(EngagementMatrix, SocialGraph)> {
    let band = split.band(kind);
    let articles = band.article_ids(dataset);
    let matrix = build_engagement_matrix(
        &articles,
        &band.users,
        band.engagements.iter().map(|&i| &dataset.engagements[i]),
    );
    let nodes = band
        .articles
        .iter()
        .map(|&i| Node::from(&dataset.articles[i]))
        .collect();
    let graph = build_social_graph(&matrix, nodes)?;
    Ok((matrix, graph))
}
