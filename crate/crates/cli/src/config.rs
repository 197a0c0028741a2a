//! Run configuration: a TOML file with one section per module, layered over
//! a named preset and then overridden by command-line flags.

use std::path::Path;

use earlybird::ingest::SyntheticSpec;
use earlybird::{EarlinessConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// Train/val/test article fractions in temporal order.
    pub fractions: [f64; 3],
    /// Explicit cut timestamps; take precedence over `fractions`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuts: Option<[i64; 3]>,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            fractions: [0.7, 0.1, 0.2],
            cuts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    pub split: SplitSection,
    pub earliness: EarlinessConfig,
    pub train: TrainSection,
    pub synthetic: SyntheticSpec,
}

/// Training knobs; earliness settings live in their own section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub lr: f64,
    pub alpha: f64,
    pub k: usize,
    pub margin: f64,
    pub seed: u64,
    pub feature_variant: earlybird::features::FeatureVariant,
    pub loss_variant: earlybird::LossVariant,
    pub normalization_reuse: bool,
    pub reduction: earlybird::nn::Reduction,
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self, CliError> {
        let train = match name {
            "politifact" => TrainConfig::politifact(),
            "gossipcop" => TrainConfig::gossipcop(),
            other => {
                return Err(CliError::Config(format!(
                    "unknown preset `{other}` (expected politifact or gossipcop)"
                )))
            }
        };
        Ok(RunConfig {
            preset: name.to_string(),
            split: SplitSection::default(),
            earliness: train.earliness,
            train: TrainSection {
                epochs: train.epochs,
                lr: train.lr,
                alpha: train.alpha,
                k: train.k,
                margin: train.margin,
                seed: train.seed,
                feature_variant: train.feature_variant,
                loss_variant: train.loss_variant,
                normalization_reuse: train.normalization_reuse,
                reduction: train.reduction,
            },
            synthetic: SyntheticSpec::default(),
        })
    }

    /// Parse `text`, filling every omitted key from the preset it names
    /// (default `politifact`).
    pub fn parse(text: &str) -> Result<Self, CliError> {
        RunConfig::parse_with_preset(text, None)
    }

    /// As [`RunConfig::parse`], with `preset` replacing the file's choice.
    pub fn parse_with_preset(text: &str, preset: Option<&str>) -> Result<Self, CliError> {
        let bad = |e: toml::de::Error| CliError::Config(e.to_string());
        let mut overlay: toml::Table = text.parse().map_err(bad)?;
        if let Some(p) = preset {
            overlay.insert("preset".into(), toml::Value::String(p.to_string()));
        }
        let preset = match overlay.get("preset") {
            None => "politifact",
            Some(toml::Value::String(s)) => s.as_str(),
            Some(_) => return Err(CliError::Config("`preset` must be a string".into())),
        };
        let mut base = toml::Table::try_from(RunConfig::preset(preset)?)
            .map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut base, overlay);
        let config: RunConfig = base.try_into().map_err(bad)?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, preset: Option<&str>) -> Result<Self, CliError> {
        match path {
            None => RunConfig::parse_with_preset("", preset),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                RunConfig::parse_with_preset(&text, preset)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    /// Dotted `section.key = value` pairs, one per leaf.
    pub fn flatten(&self) -> Vec<(String, String)> {
        fn walk(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) {
            for (k, v) in table {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match v {
                    toml::Value::Table(t) => walk(&key, t, out),
                    other => out.push((key, other.to_string())),
                }
            }
        }
        let table = toml::Table::try_from(self).expect("config serializes");
        let mut out = Vec::new();
        walk("", &table, &mut out);
        out
    }

    /// Inverse of [`RunConfig::flatten`].
    pub fn unflatten<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, CliError> {
        let text: String = pairs
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        RunConfig::parse(&text)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            lr: t.lr,
            alpha: t.alpha,
            k: t.k,
            margin: t.margin,
            seed: t.seed,
            feature_variant: t.feature_variant,
            loss_variant: t.loss_variant,
            earliness: self.earliness,
            normalization_reuse: t.normalization_reuse,
            reduction: t.reduction,
        }
    }

    pub fn check(&self) -> Result<(), CliError> {
        self.train_config()
            .check()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.synthetic
            .check()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let [a, b, c] = self.split.fractions;
        if [a, b, c].iter().any(|f| !(*f > 0.0)) || (a + b + c - 1.0).abs() > 1e-6 {
            return Err(CliError::Config(format!(
                "split fractions must be positive and sum to 1, got {:?}",
                self.split.fractions
            )));
        }
        if let Some([x, y, z]) = self.split.cuts {
            if !(x < y && y < z) {
                return Err(CliError::Config(format!(
                    "split cuts must be increasing, got {:?}",
                    self.split.cuts
                )));
            }
        }
        Ok(())
    }
}

/// Recursively overwrite `base` with `overlay`; tables merge, values replace.
fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}
