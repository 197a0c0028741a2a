//! Joint training of the edge weight estimator and the GCN classifier,
//! validation-based model selection, test-time reweighting, and ablations.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::earliness::EarlinessLabels;
use crate::error::{Error, Result};
use crate::features::{build_edge_features, feature_variant, EdgeFeatureTable, EdgeInputs, FeatureVariant};
use crate::graph::{build_band_graph, SocialGraph};
use crate::metrics::{classification_metrics, homophily_ratio, EvalReport};
use crate::model::{Dataset, EarlinessConfig, Label};
use crate::nn::{
    bc_loss, ce_loss, ranking_loss, softmax, Architecture, ModelParams, NormalizedAdjacency,
    Reduction, Tensor,
};
use crate::rng::{stream, Stream};
use crate::split::{split_by_fraction, BandKind, TemporalSplit};

/// Regularizer applied to the estimated edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossVariant {
    Rank,
    None,
    Bc,
}

impl FromStr for LossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rank" => Ok(LossVariant::Rank),
            "none" => Ok(LossVariant::None),
            "bc" => Ok(LossVariant::Bc),
            _ => Err(Error::UnknownVariant(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Weight of the edge regularizer in the total loss.
    pub alpha: f64,
    /// Clean and noisy edges drawn per epoch (each).
    pub k: usize,
    pub margin: f64,
    pub seed: u64,
    pub feature_variant: FeatureVariant,
    pub loss_variant: LossVariant,
    pub earliness: EarlinessConfig,
    /// Scale val/test edge features by the training band's column maxima
    /// instead of their own.
    pub normalization_reuse: bool,
    pub reduction: Reduction,
}

impl TrainConfig {
    /// Defaults tuned for the PolitiFact benchmark.
    pub fn politifact() -> Self {
        TrainConfig {
            epochs: 1000,
            lr: 0.001,
            alpha: 0.1,
            k: 1000,
            margin: 0.1,
            seed: 0,
            feature_variant: FeatureVariant::Joint,
            loss_variant: LossVariant::Rank,
            earliness: EarlinessConfig {
                deadline_seconds: 48 * 3600,
                user_threshold: 0.3,
                min_engagements: 3,
            },
            normalization_reuse: false,
            reduction: Reduction::Sum,
        }
    }

    /// Defaults tuned for the GossipCop benchmark.
    pub fn gossipcop() -> Self {
        TrainConfig {
            alpha: 0.3,
            k: 10_000,
            margin: 0.0,
            earliness: EarlinessConfig {
                deadline_seconds: 12 * 3600,
                user_threshold: 0.7,
                min_engagements: 3,
            },
            ..TrainConfig::politifact()
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(self.alpha >= 0.0) || !(self.margin >= 0.0) {
            return bad("alpha and margin must be non-negative");
        }
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        self.earliness.check()
    }

    fn regularized(&self) -> bool {
        self.loss_variant != LossVariant::None && self.alpha > 0.0
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::politifact()
    }
}

/// Edge indices grouped by endpoint-label agreement.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgePartition {
    pub clean: Vec<usize>,
    pub noisy: Vec<usize>,
    pub unlabeled: Vec<usize>,
}

impl EdgePartition {
    /// Error if any edge touches an unlabeled node.
    pub fn require_labeled(&self, graph: &SocialGraph) -> Result<()> {
        match self.unlabeled.first() {
            None => Ok(()),
            Some(&k) => {
                let e = graph.edges[k];
                let node = if graph.nodes[e.src].label.is_none() {
                    e.src
                } else {
                    e.dst
                };
                Err(Error::Unlabeled(graph.nodes[node].id.clone()))
            }
        }
    }
}

pub fn partition_edges(graph: &SocialGraph) -> EdgePartition {
    let mut p = EdgePartition::default();
    for (k, e) in graph.edges.iter().enumerate() {
        match (graph.nodes[e.src].label, graph.nodes[e.dst].label) {
            (Some(a), Some(b)) if a == b => p.clean.push(k),
            (Some(_), Some(_)) => p.noisy.push(k),
            _ => p.unlabeled.push(k),
        }
    }
    p
}

/// Everything the models consume for one band.
#[derive(Debug, Clone)]
pub struct BandData {
    pub kind: BandKind,
    pub graph: SocialGraph,
    pub table: EdgeFeatureTable,
    pub inputs: EdgeInputs,
    /// Column maxima used to scale count-valued inputs (empty otherwise).
    pub scale: Vec<f64>,
    pub x: Tensor,
    pub labels: Vec<Option<Label>>,
}

impl BandData {
    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.graph.edge_pairs()
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }
}

/// Build graph, earliness labels and edge inputs for one band, reading only
/// that band's articles and engagement set.
pub fn prepare_band(
    dataset: &Dataset,
    split: &TemporalSplit,
    kind: BandKind,
    config: &TrainConfig,
    reuse_scale: Option<&[f64]>,
) -> Result<BandData> {
    if split.min_engagements != config.earliness.min_engagements {
        return Err(Error::Config(format!(
            "split uses m = {} but earliness config uses m = {}",
            split.min_engagements, config.earliness.min_engagements
        )));
    }
    let (matrix, graph) = build_band_graph(dataset, split, kind)?;
    let log = split.band(kind).engagement_refs(dataset);
    let lookup = dataset.article_map();
    let labels = EarlinessLabels::compute(&log, &lookup, &config.earliness)?;
    let table = build_edge_features(&graph, &matrix, &log, &labels)?;

    let band_stream = match kind {
        BandKind::Train => 0u64,
        BandKind::Val => 1,
        BandKind::Test => 2,
    };
    let mut rng = stream(
        config.seed ^ band_stream.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        Stream::RandomFeatures,
    );
    let mut inputs = feature_variant(&table, &graph, config.feature_variant, &mut rng)?;
    let scale = if config.feature_variant.is_count() {
        let scale = reuse_scale.map_or_else(|| inputs.column_max(), <[f64]>::to_vec);
        inputs.scale_columns(&scale);
        scale
    } else {
        Vec::new()
    };

    let n = graph.num_nodes();
    let f = dataset.feature_dim;
    let mut xs = Vec::with_capacity(n * f);
    for node in &graph.nodes {
        xs.extend_from_slice(&node.features);
    }
    let x = Tensor::from_vec(&[n, f], xs)?;
    let labels = graph.labels();
    Ok(BandData {
        kind,
        graph,
        table,
        inputs,
        scale,
        x,
        labels,
    })
}

#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub train: BandData,
    pub val: BandData,
    pub test: BandData,
}

pub fn prepare_split(
    dataset: &Dataset,
    split: &TemporalSplit,
    config: &TrainConfig,
) -> Result<PreparedSplit> {
    let train = prepare_band(dataset, split, BandKind::Train, config, None)?;
    let reuse = config.normalization_reuse.then_some(train.scale.as_slice());
    let val = prepare_band(dataset, split, BandKind::Val, config, reuse)?;
    let test = prepare_band(dataset, split, BandKind::Test, config, reuse)?;
    Ok(PreparedSplit { train, val, test })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_gnn: f64,
    pub loss_rank: f64,
    pub total: f64,
    pub val_acc: f64,
    pub val_f1: f64,
    /// Edge indices sampled for the regularizer this epoch.
    pub draws: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation F1.
    pub params: ModelParams,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Class probabilities and hard labels for every node of a band.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub labels: Vec<Label>,
    pub probs: Tensor,
    /// Estimated weight of every existing edge.
    pub edge_weights: Vec<f64>,
}

fn forward_weights(params: &ModelParams, band: &BandData) -> Result<Vec<f64>> {
    Ok(params.estimator.forward(&band.inputs)?.weights)
}

/// Reweight the band's existing edges and classify every node. Ties go to
/// the real class.
pub fn infer(params: &ModelParams, band: &BandData) -> Result<Predictions> {
    let edge_weights = forward_weights(params, band)?;
    let adj = NormalizedAdjacency::new(band.num_nodes(), &band.edge_pairs(), &edge_weights)?;
    let pass = params.classifier.forward(&adj, &band.x)?;
    let probs = softmax(&pass.logits);
    let labels = (0..probs.rows())
        .map(|n| {
            if probs.at(n, 1) > probs.at(n, 0) {
                Label::Fake
            } else {
                Label::Real
            }
        })
        .collect();
    Ok(Predictions {
        labels,
        probs,
        edge_weights,
    })
}

/// Metrics over the band's labeled nodes plus homophily of the original and
/// reweighted graphs over edges whose endpoints are both labeled.
pub fn evaluate(params: &ModelParams, band: &BandData) -> Result<EvalReport> {
    let preds = infer(params, band)?;
    let (pred, truth): (Vec<Label>, Vec<Label>) = band
        .labels
        .iter()
        .zip(&preds.labels)
        .filter_map(|(t, &p)| t.map(|t| (p, t)))
        .unzip();
    let confusion = classification_metrics(&pred, &truth)?;

    let mut pairs = Vec::new();
    let mut original = Vec::new();
    let mut reweighted = Vec::new();
    for (k, e) in band.graph.edges.iter().enumerate() {
        if band.labels[e.src].is_some() && band.labels[e.dst].is_some() {
            pairs.push((e.src, e.dst));
            original.push(e.weight as f64);
            reweighted.push(preds.edge_weights[k]);
        }
    }
    let homophily = |w: &[f64]| -> Result<Option<f64>> {
        if pairs.is_empty() {
            Ok(None)
        } else {
            homophily_ratio(&pairs, w, &band.labels)
        }
    };
    Ok(EvalReport {
        accuracy: confusion.accuracy(),
        f1: confusion.f1(),
        confusion,
        homophily_original: homophily(&original)?,
        homophily_reweighted: homophily(&reweighted)?,
    })
}

/// Mean estimated weight over clean and noisy edges of a labeled band.
pub fn mean_edge_weights(params: &ModelParams, band: &BandData) -> Result<(f64, f64)> {
    let w = forward_weights(params, band)?;
    let part = partition_edges(&band.graph);
    let mean = |idx: &[usize]| {
        if idx.is_empty() {
            f64::NAN
        } else {
            idx.iter().map(|&k| w[k]).sum::<f64>() / idx.len() as f64
        }
    };
    Ok((mean(&part.clean), mean(&part.noisy)))
}

/// Train both networks on the training band, selecting the epoch with the
/// best validation F1. The test band is never seen here.
pub fn train(train: &BandData, val: &BandData, config: &TrainConfig) -> Result<TrainOutcome> {
    config.check()?;
    if let Some(n) = train.labels.iter().position(Option::is_none) {
        return Err(Error::Unlabeled(train.graph.nodes[n].id.clone()));
    }
    if train.num_nodes() == 0 {
        return Err(Error::Precondition("training graph has no nodes".into()));
    }
    let partition = partition_edges(&train.graph);
    partition.require_labeled(&train.graph)?;
    if config.regularized() && (partition.clean.is_empty() || partition.noisy.is_empty()) {
        return Err(Error::Precondition(format!(
            "edge regularizer needs clean and noisy training edges, found {} clean and {} noisy",
            partition.clean.len(),
            partition.noisy.len()
        )));
    }
    if val.x.cols() != train.x.cols() || val.inputs.dim != train.inputs.dim {
        return Err(Error::FeatureDim {
            expected: train.inputs.dim,
            found: val.inputs.dim,
            context: "validation band built with a different encoding".into(),
        });
    }

    let arch = Architecture::new(train.inputs.dim, train.x.cols());
    let mut params = ModelParams::init(arch, config.lr, &mut stream(config.seed, Stream::Init));
    let mut sampler = stream(config.seed, Stream::Sampling);
    let pairs = train.edge_pairs();
    let nodes: Vec<usize> = (0..train.num_nodes()).collect();
    let val_labeled = val.labels.iter().any(Option::is_some);

    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        params.zero_grad();
        let est = params.estimator.forward(&train.inputs)?;
        let adj = NormalizedAdjacency::new(train.num_nodes(), &pairs, &est.weights)?;
        let pass = params.classifier.forward(&adj, &train.x)?;
        let (loss_gnn, d_logits) = ce_loss(&pass.logits, &train.labels, &nodes, config.reduction)?;
        let mut d_w = params
            .classifier
            .backward(&adj, &train.x, &pass, &d_logits);

        let mut loss_rank = 0.0;
        let mut draws = 0;
        if config.regularized() {
            let clean = sample(&partition.clean, config.k, &mut sampler);
            let noisy = sample(&partition.noisy, config.k, &mut sampler);
            draws = clean.len() + noisy.len();
            let wc: Vec<f64> = clean.iter().map(|&k| est.weights[k]).collect();
            let wn: Vec<f64> = noisy.iter().map(|&k| est.weights[k]).collect();
            let reg = match config.loss_variant {
                LossVariant::Rank => ranking_loss(&wc, &wn, config.margin)?,
                LossVariant::Bc => bc_loss(&wc, &wn)?,
                LossVariant::None => unreachable!("regularized() excludes None"),
            };
            loss_rank = reg.value;
            for (&k, g) in clean.iter().zip(&reg.d_clean) {
                d_w[k] += config.alpha * g;
            }
            for (&k, g) in noisy.iter().zip(&reg.d_noisy) {
                d_w[k] += config.alpha * g;
            }
        }
        let total = loss_gnn + config.alpha * loss_rank;
        if !total.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        params.estimator.backward(&train.inputs, &est, &d_w);
        params.adam_step()?;

        let report = evaluate(&params, val)?;
        let improved = match &best {
            None => true,
            Some((f1, _, _)) => !val_labeled || report.f1 > *f1,
        };
        if improved {
            let mut snapshot = params.clone();
            for (_, p) in snapshot.named_mut() {
                p.grad = None;
            }
            best = Some((report.f1, epoch, snapshot));
        }
        history.push(EpochRecord {
            epoch,
            loss_gnn,
            loss_rank,
            total,
            val_acc: report.accuracy,
            val_f1: report.f1,
            draws,
        });
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        params,
        best_epoch,
        history,
    })
}

/// `k` uniform draws with replacement.
fn sample<R: Rng>(pool: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    (0..k).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

pub fn write_history<W: Write>(mut w: W, history: &[EpochRecord]) -> std::io::Result<()> {
    writeln!(w, "epoch\tL_GNN\tL_rank\ttotal\tval_acc\tval_f1")?;
    for r in history {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.epoch, r.loss_gnn, r.loss_rank, r.total, r.val_acc, r.val_f1
        )?;
    }
    Ok(())
}

/// Model variants compared in ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Full,
    NoRank,
    Bc,
    Rand,
    NoUser,
    NoEng,
    Ratio,
    NodeFeat,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Full,
        Variant::NoRank,
        Variant::Bc,
        Variant::Rand,
        Variant::NoUser,
        Variant::NoEng,
        Variant::Ratio,
        Variant::NodeFeat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoRank => "no-rank",
            Variant::Bc => "bc",
            Variant::Rand => "rand",
            Variant::NoUser => "no-user",
            Variant::NoEng => "no-eng",
            Variant::Ratio => "ratio",
            Variant::NodeFeat => "nf",
        }
    }

    /// `base` with this variant's change applied.
    pub fn apply(self, base: &TrainConfig) -> TrainConfig {
        let mut c = *base;
        match self {
            Variant::Full => {}
            Variant::NoRank => {
                c.alpha = 0.0;
                c.loss_variant = LossVariant::None;
            }
            Variant::Bc => c.loss_variant = LossVariant::Bc,
            Variant::Rand => c.feature_variant = FeatureVariant::Rand,
            Variant::NoUser => c.feature_variant = FeatureVariant::NoUser,
            Variant::NoEng => c.feature_variant = FeatureVariant::NoEng,
            Variant::Ratio => c.feature_variant = FeatureVariant::Ratio,
            Variant::NodeFeat => c.feature_variant = FeatureVariant::NodeFeat,
        }
        c
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let key = key.trim_start_matches(['+', '-']);
        Ok(match key {
            "full" | "dawn" => Variant::Full,
            "no-rank" | "rank" => Variant::NoRank,
            "bc" => Variant::Bc,
            "rand" => Variant::Rand,
            "no-user" | "user" => Variant::NoUser,
            "no-eng" | "eng" => Variant::NoEng,
            "ratio" => Variant::Ratio,
            "nf" | "node-feat" => Variant::NodeFeat,
            _ => return Err(Error::UnknownVariant(s.to_string())),
        })
    }
}

/// Parse a comma-separated variant list.
pub fn parse_variants(list: &str) -> Result<Vec<Variant>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Outcome of one full run (split, train, test).
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub training: TrainOutcome,
    pub test: EvalReport,
    /// Mean estimated weight over clean and noisy training edges.
    pub train_edge_means: (f64, f64),
}

pub fn run_split(
    dataset: &Dataset,
    split: &TemporalSplit,
    config: &TrainConfig,
) -> Result<RunOutcome> {
    let bands = prepare_split(dataset, split, config)?;
    let training = train(&bands.train, &bands.val, config)?;
    let test = evaluate(&training.params, &bands.test)?;
    let train_edge_means = mean_edge_weights(&training.params, &bands.train)?;
    Ok(RunOutcome {
        training,
        test,
        train_edge_means,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub variant: Variant,
    pub seed: u64,
    pub acc: f64,
    pub f1: f64,
    pub homophily_before: Option<f64>,
    pub homophily_after: Option<f64>,
    pub clean_weight: f64,
    pub noisy_weight: f64,
}

/// One row per `(variant, seed)`, variant-major in the given order. Cells run
/// in parallel; each is single-threaded and seeded, so the table does not
/// depend on the thread count.
pub fn run_ablation(
    dataset: &Dataset,
    base: &TrainConfig,
    fractions: (f64, f64, f64),
    variants: &[Variant],
    seeds: &[u64],
) -> Result<Vec<ResultRow>> {
    base.check()?;
    let split = split_by_fraction(dataset, fractions, base.earliness.min_engagements)?;
    let cells: Vec<(Variant, u64)> = variants
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(variant, seed)| {
            let config = TrainConfig {
                seed,
                ..variant.apply(base)
            };
            let run = run_split(dataset, &split, &config)?;
            Ok(ResultRow {
                variant,
                seed,
                acc: run.test.accuracy,
                f1: run.test.f1,
                homophily_before: run.test.homophily_original,
                homophily_after: run.test.homophily_reweighted,
                clean_weight: run.train_edge_means.0,
                noisy_weight: run.train_edge_means.1,
            })
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// `variant seed acc f1 homophily_before homophily_after` with a header row.
pub fn write_results<W: Write>(mut w: W, rows: &[ResultRow]) -> std::io::Result<()> {
    writeln!(w, "variant\tseed\tacc\tf1\thomophily_before\thomophily_after")?;
    for r in rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.variant,
            r.seed,
            r.acc,
            r.f1,
            opt(r.homophily_before),
            opt(r.homophily_after)
        )?;
    }
    Ok(())
}

/// Per-variant means in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub variant: Variant,
    pub runs: usize,
    pub acc: f64,
    pub f1: f64,
    pub homophily_before: f64,
    pub homophily_after: f64,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<VariantSummary> {
    let mut order: Vec<Variant> = Vec::new();
    for r in rows {
        if !order.contains(&r.variant) {
            order.push(r.variant);
        }
    }
    order
        .into_iter()
        .map(|variant| {
            let group: Vec<&ResultRow> = rows.iter().filter(|r| r.variant == variant).collect();
            let n = group.len() as f64;
            let mean = |f: &dyn Fn(&ResultRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            VariantSummary {
                variant,
                runs: group.len(),
                acc: mean(&|r| r.acc),
                f1: mean(&|r| r.f1),
                homophily_before: mean(&|r| r.homophily_before.unwrap_or(f64::NAN)),
                homophily_after: mean(&|r| r.homophily_after.unwrap_or(f64::NAN)),
            }
        })
        .collect()
}
