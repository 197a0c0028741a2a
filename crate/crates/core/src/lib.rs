//! Earliness-guided edge reweighting for social-graph fake news detection.

pub mod earliness;
pub mod error;
pub mod features;
pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod split;

pub use error::{Error, Result};
pub use model::{Article, Dataset, EarlinessConfig, Engagement, Label};
pub use pipeline::{LossVariant, TrainConfig, Variant};
