//! Versioned text checkpoints. Every float is stored as the hex of its bit
//! pattern, so a save/load cycle reproduces parameters and optimizer state
//! exactly.
//!
//! ```text
//! earlybird-checkpoint 1
//! meta <key> <value...>
//! tensor <name> <d0>x<d1>... <hex>...
//! adam <step> <lr> <beta1> <beta2> <eps>
//! moment <index> <first|second> <hex>...
//! end
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Adam, EdgeEstimator, GcnClassifier, ModelParams, Tensor};
use crate::error::{Error, Result};

const MAGIC: &str = "earlybird-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// Free-form string metadata (feature variant, normalization maxima, ...).
    pub meta: BTreeMap<String, String>,
}

fn hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn unhex(s: &str) -> Result<f64> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| Error::Checkpoint(format!("bad float `{s}`")))
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new(params: ModelParams) -> Self {
        Checkpoint {
            params,
            meta: BTreeMap::new(),
        }
    }

    pub fn encode(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, t) in self.params.named() {
            let dims: Vec<String> = t.shape.iter().map(ToString::to_string).collect();
            let _ = write!(out, "tensor {name} {}", dims.join("x"));
            for v in &t.values {
                let _ = write!(out, " {}", hex(*v));
            }
            out.push('\n');
        }
        let a = &self.params.adam;
        let _ = writeln!(
            out,
            "adam {} {} {} {} {}",
            a.step,
            hex(a.lr),
            hex(a.beta1),
            hex(a.beta2),
            hex(a.eps)
        );
        for (kind, buffers) in [("first", &a.first), ("second", &a.second)] {
            for (i, buf) in buffers.iter().enumerate() {
                let _ = write!(out, "moment {i} {kind}");
                for v in buf {
                    let _ = write!(out, " {}", hex(*v));
                }
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn decode(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty checkpoint"))?;
        match header.split_once(' ') {
            Some((MAGIC, v)) if v.trim() == VERSION.to_string() => {}
            _ => return Err(bad(format!("unsupported header `{header}`"))),
        }

        let mut meta = BTreeMap::new();
        let mut tensors: BTreeMap<String, Tensor> = BTreeMap::new();
        let mut adam = None;
        let mut first: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut second: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut ended = false;
        for line in lines {
            let mut f = line.split(' ');
            match f.next() {
                Some("meta") => {
                    let key = f.next().ok_or_else(|| bad("meta without key"))?;
                    meta.insert(key.to_string(), f.collect::<Vec<_>>().join(" "));
                }
                Some("tensor") => {
                    let name = f.next().ok_or_else(|| bad("tensor without name"))?;
                    let dims = f.next().ok_or_else(|| bad("tensor without shape"))?;
                    let shape = dims
                        .split('x')
                        .map(|d| d.parse::<usize>().map_err(|_| bad(format!("bad shape `{dims}`"))))
                        .collect::<Result<Vec<_>>>()?;
                    let values = f.map(unhex).collect::<Result<Vec<_>>>()?;
                    tensors.insert(name.to_string(), Tensor::from_vec(&shape, values)?);
                }
                Some("adam") => {
                    let step = f
                        .next()
                        .and_then(|s| s.parse::<u64>().ok())
                        .ok_or_else(|| bad("bad adam step"))?;
                    let v = f.map(unhex).collect::<Result<Vec<_>>>()?;
                    let [lr, beta1, beta2, eps] = v[..] else {
                        return Err(bad("adam line needs four constants"));
                    };
                    adam = Some(Adam {
                        lr,
                        beta1,
                        beta2,
                        eps,
                        step,
                        first: Vec::new(),
                        second: Vec::new(),
                    });
                }
                Some("moment") => {
                    let i = f
                        .next()
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| bad("bad moment index"))?;
                    let kind = f.next();
                    let v = f.map(unhex).collect::<Result<Vec<_>>>()?;
                    match kind {
                        Some("first") => first.insert(i, v),
                        Some("second") => second.insert(i, v),
                        _ => return Err(bad("moment kind must be first or second")),
                    };
                }
                Some("end") => {
                    ended = true;
                    break;
                }
                Some("") | None => {}
                Some(other) => return Err(bad(format!("unknown record `{other}`"))),
            }
        }
        if !ended {
            return Err(bad("truncated checkpoint"));
        }

        let mut take = |name: &str| {
            tensors
                .remove(name)
                .ok_or_else(|| bad(format!("missing tensor `{name}`")))
        };
        let estimator = EdgeEstimator {
            w1: take("estimator.w1")?,
            b1: take("estimator.b1")?,
            w2: take("estimator.w2")?,
            b2: take("estimator.b2")?,
        };
        let classifier = GcnClassifier {
            w1: take("classifier.w1")?,
            b1: take("classifier.b1")?,
            w2: take("classifier.w2")?,
            b2: take("classifier.b2")?,
        };
        let mut adam = adam.ok_or_else(|| bad("missing adam record"))?;
        adam.first = first.into_values().collect();
        adam.second = second.into_values().collect();
        if adam.first.len() != adam.second.len() {
            return Err(bad("moment buffers incomplete"));
        }
        Ok(Checkpoint {
            params: ModelParams {
                estimator,
                classifier,
                adam,
            },
            meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::decode(&text)
    }
}
