//! Dataset files on disk.
//!
//! Three UTF-8 text files with LF line endings:
//!
//! * articles: tab-separated with header `id publish_time label`; `label` is
//!   `0`, `1` or empty.
//! * engagements: tab-separated with header `user_id article_id time`.
//! * features: no header; each line is an article id followed by `F`
//!   whitespace-separated reals.
//!
//! Timestamps may carry a fractional part, which is truncated.

mod synthetic;

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub use synthetic::{generate_synthetic, SyntheticSpec};

use crate::error::{Error, Result};
use crate::model::{Article, Dataset, Engagement, Label};

pub const ARTICLES_FILE: &str = "articles.tsv";
pub const ENGAGEMENTS_FILE: &str = "engagements.tsv";
pub const FEATURES_FILE: &str = "features.txt";

/// The three files making up one dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub articles: PathBuf,
    pub engagements: PathBuf,
    pub features: PathBuf,
}

impl DatasetPaths {
    /// Conventional file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        DatasetPaths {
            articles: dir.join(ARTICLES_FILE),
            engagements: dir.join(ENGAGEMENTS_FILE),
            features: dir.join(FEATURES_FILE),
        }
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_time(raw: &str, path: &Path, line: u64) -> Result<i64> {
    let raw = raw.trim();
    if let Ok(t) = raw.parse::<i64>() {
        return Ok(t);
    }
    match raw.parse::<f64>() {
        Ok(t) if t.is_finite() && t.abs() < i64::MAX as f64 => Ok(t.trunc() as i64),
        Ok(_) => Err(parse_err(path, line, format!("non-finite timestamp `{raw}`"))),
        Err(_) => Err(parse_err(path, line, format!("invalid timestamp `{raw}`"))),
    }
}

fn tsv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .quoting(false)
        .from_reader(file))
}

fn check_header(
    reader: &mut csv::Reader<File>,
    path: &Path,
    expected: &[&str],
) -> Result<()> {
    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != expected {
        return Err(parse_err(
            path,
            1,
            format!("expected header {expected:?}, found {found:?}"),
        ));
    }
    Ok(())
}

fn records(
    reader: &mut csv::Reader<File>,
    path: &Path,
) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        out.push((line, rec));
    }
    Ok(out)
}

/// Read the articles table. Feature vectors are left empty.
pub fn read_articles(path: &Path) -> Result<Vec<Article>> {
    let mut reader = tsv_reader(path)?;
    check_header(&mut reader, path, &["id", "publish_time", "label"])?;
    let mut articles = Vec::new();
    for (line, rec) in records(&mut reader, path)? {
        let id = rec[0].trim();
        if id.is_empty() {
            return Err(parse_err(path, line, "empty article id"));
        }
        let publish_time = parse_time(&rec[1], path, line)?;
        let label = match rec[2].trim() {
            "" => None,
            "0" => Some(Label::Real),
            "1" => Some(Label::Fake),
            other => return Err(parse_err(path, line, format!("invalid label `{other}`"))),
        };
        articles.push(Article {
            id: id.to_string(),
            publish_time,
            label,
            features: Vec::new(),
        });
    }
    Ok(articles)
}

pub fn read_engagements(path: &Path) -> Result<Vec<(u64, Engagement)>> {
    let mut reader = tsv_reader(path)?;
    check_header(&mut reader, path, &["user_id", "article_id", "time"])?;
    let mut out = Vec::new();
    for (line, rec) in records(&mut reader, path)? {
        let user = rec[0].trim();
        let article = rec[1].trim();
        if user.is_empty() || article.is_empty() {
            return Err(parse_err(path, line, "empty user or article id"));
        }
        out.push((
            line,
            Engagement {
                user: user.to_string(),
                article: article.to_string(),
                time: parse_time(&rec[2], path, line)?,
            },
        ));
    }
    Ok(out)
}

/// Returns `(line, article id, features)` rows; every row must have the same width.
pub fn read_features(path: &Path) -> Result<Vec<(u64, String, Vec<f64>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(id) = fields.next() else { continue };
        let values = fields
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(path, lineno, format!("invalid feature value `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::FeatureDim {
                    expected: w,
                    found: values.len(),
                    context: format!("{}:{lineno}", path.display()),
                })
            }
            _ => {}
        }
        out.push((lineno, id.to_string(), values));
    }
    Ok(out)
}

/// Load and validate a dataset. Articles come back sorted by
/// `(publish_time, id)`; engagements keep file order.
pub fn load_dataset(paths: &DatasetPaths) -> Result<Dataset> {
    let mut articles = read_articles(&paths.articles)?;
    let engagements = read_engagements(&paths.engagements)?;
    let features = read_features(&paths.features)?;

    let mut index = HashMap::with_capacity(articles.len());
    for (i, a) in articles.iter().enumerate() {
        if index.insert(a.id.clone(), i).is_some() {
            return Err(Error::InvalidDataset(format!(
                "duplicate article id `{}` in {}",
                a.id,
                paths.articles.display()
            )));
        }
    }

    let feature_dim = features.first().map_or(0, |(_, _, v)| v.len());
    let mut seen = HashSet::new();
    for (line, id, values) in features {
        let Some(&i) = index.get(&id) else {
            return Err(parse_err(
                &paths.features,
                line,
                format!("features for unknown article `{id}`"),
            ));
        };
        if !seen.insert(i) {
            return Err(parse_err(
                &paths.features,
                line,
                format!("duplicate features for article `{id}`"),
            ));
        }
        articles[i].features = values;
    }
    if let Some(missing) = articles.iter().find(|a| a.features.len() != feature_dim) {
        return Err(Error::FeatureDim {
            expected: feature_dim,
            found: missing.features.len(),
            context: format!("article `{}` has no feature row", missing.id),
        });
    }

    let mut engs = Vec::with_capacity(engagements.len());
    for (line, e) in engagements {
        if !index.contains_key(&e.article) {
            return Err(parse_err(
                &paths.engagements,
                line,
                format!("engagement references unknown article `{}`", e.article),
            ));
        }
        engs.push(e);
    }

    let mut dataset = Dataset::new(articles, engs, feature_dim);
    dataset.sort_articles();
    dataset.validate().into_result()?;
    Ok(dataset)
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|()| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Write `dataset` in the on-disk format. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_dataset(dataset: &Dataset, paths: &DatasetPaths) -> Result<()> {
    write_file(&paths.articles, |w| {
        writeln!(w, "id\tpublish_time\tlabel")?;
        for a in &dataset.articles {
            let label = a.label.map(|l| l.to_string()).unwrap_or_default();
            writeln!(w, "{}\t{}\t{}", a.id, a.publish_time, label)?;
        }
        Ok(())
    })?;
    write_file(&paths.engagements, |w| {
        writeln!(w, "user_id\tarticle_id\ttime")?;
        for e in &dataset.engagements {
            writeln!(w, "{}\t{}\t{}", e.user, e.article, e.time)?;
        }
        Ok(())
    })?;
    write_file(&paths.features, |w| {
        for a in &dataset.articles {
            write!(w, "{}", a.id)?;
            for v in &a.features {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}
