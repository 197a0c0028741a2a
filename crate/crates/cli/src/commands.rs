use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use earlybird::earliness::{write_histograms, EarlinessAnalysis};
use earlybird::features::{write_edge_features, FeatureVariant};
use earlybird::ingest::{generate_synthetic, load_dataset, write_dataset, DatasetPaths};
use earlybird::metrics::EvalReport;
use earlybird::nn::{Checkpoint, Reduction};
use earlybird::pipeline::{
    evaluate, infer, parse_variants, prepare_band, prepare_split, run_ablation, summarize, train as fit,
    write_history, write_results, BandData,
};
use earlybird::split::{split_by_fraction, split_by_timestamps, BandKind, TemporalSplit};
use earlybird::{Dataset, LossVariant};

use crate::config::RunConfig;
use crate::manifest::{fingerprint, RunManifest};
use crate::{
    AblateArgs, AnalyzeArgs, CliError, ConfigArgs, EvaluateArgs, GenerateArgs, IngestArgs, SplitArgs,
    TrainArgs, TrainFlags, OUT_ROOT_ENV,
};

const CHECKPOINT_FILE: &str = "checkpoint.txt";
const CONFIG_PREFIX: &str = "config.";

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn resolve_config(args: &ConfigArgs) -> Result<RunConfig, CliError> {
    let mut c = RunConfig::load(args.config.as_deref(), args.preset.as_deref())?;
    if let Some(s) = args.seed {
        c.train.seed = s;
        c.synthetic.seed = s;
    }
    if let Some(f) = &args.fractions {
        c.split.fractions = [f[0], f[1], f[2]];
    }
    if let Some(t) = &args.cuts {
        c.split.cuts = Some([t[0], t[1], t[2]]);
    }
    if let Some(d) = args.deadline_seconds {
        c.earliness.deadline_seconds = d;
    }
    if let Some(u) = args.user_threshold {
        c.earliness.user_threshold = u;
    }
    if let Some(m) = args.min_engagements {
        c.earliness.min_engagements = m;
    }
    Ok(c)
}

fn apply_train_flags(c: &mut RunConfig, f: &TrainFlags) -> Result<(), CliError> {
    let t = &mut c.train;
    if let Some(v) = f.epochs {
        t.epochs = v;
    }
    if let Some(v) = f.lr {
        t.lr = v;
    }
    if let Some(v) = f.alpha {
        t.alpha = v;
    }
    if let Some(v) = f.k {
        t.k = v;
    }
    if let Some(v) = f.margin {
        t.margin = v;
    }
    if let Some(v) = &f.feature_variant {
        t.feature_variant = FeatureVariant::from_str(v).map_err(config_err)?;
    }
    if let Some(v) = &f.loss {
        t.loss_variant = LossVariant::from_str(v).map_err(config_err)?;
    }
    if let Some(v) = &f.reduction {
        t.reduction = Reduction::from_str(v).map_err(config_err)?;
    }
    if f.normalization_reuse {
        t.normalization_reuse = true;
    }
    Ok(())
}

/// `--out` if given, otherwise a fresh `<cmd>-<unix time>-seed<N>` directory
/// under `$EARLYBIRD_OUT` (default `runs`).
fn run_dir(out: Option<&Path>, command: &str, seed: u64) -> Result<PathBuf, CliError> {
    let dir = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let root = std::env::var_os(OUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
            let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            let base = root.join(format!("{command}-{stamp}-seed{seed}"));
            let mut dir = base.clone();
            let mut n = 1;
            while dir.exists() {
                dir = PathBuf::from(format!("{}-{n}", base.display()));
                n += 1;
            }
            dir
        }
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn dataset_files(dir: &Path) -> Vec<PathBuf> {
    let p = DatasetPaths::in_dir(dir);
    vec![p.articles, p.engagements, p.features]
}

fn load(dir: &Path) -> Result<(Dataset, String), CliError> {
    let dataset = load_dataset(&DatasetPaths::in_dir(dir))?;
    let print = fingerprint(&dataset_files(dir))?;
    Ok((dataset, print))
}

fn start(
    command: &str,
    out: Option<&Path>,
    config: &RunConfig,
    fingerprint: String,
    arguments: Vec<String>,
) -> Result<PathBuf, CliError> {
    let dir = run_dir(out, command, config.train.seed)?;
    RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed: config.train.seed,
        output_dir: dir.clone(),
        dataset_fingerprint: fingerprint,
        arguments,
        config: config.clone(),
    }
    .write()?;
    Ok(dir)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|()| w.flush()).map_err(|e| CliError::io(path, e))
}

fn make_split(dataset: &Dataset, config: &RunConfig) -> Result<TemporalSplit, CliError> {
    let m = config.earliness.min_engagements;
    let split = match config.split.cuts {
        Some([a, b, c]) => split_by_timestamps(dataset, a, b, c, m)?,
        None => {
            let [a, b, c] = config.split.fractions;
            split_by_fraction(dataset, (a, b, c), m)?
        }
    };
    Ok(split)
}

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let mut config = resolve_config(&args.config)?;
    let s = &mut config.synthetic;
    if let Some(v) = args.n_articles {
        s.n_articles = v;
    }
    if let Some(v) = args.n_users {
        s.n_users = v;
    }
    if let Some(v) = args.fake_fraction {
        s.fake_fraction = v;
    }
    if let Some(v) = args.early_bias {
        s.early_bias = v;
    }
    if let Some(v) = args.late_bias {
        s.late_bias = v;
    }
    if let Some(v) = args.feature_dim {
        s.feature_dim = v;
    }
    if let Some(v) = args.feature_separation {
        s.feature_separation = v;
    }
    s.check().map_err(config_err)?;
    let dataset = generate_synthetic(&config.synthetic)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    write_dataset(&dataset, &DatasetPaths::in_dir(&args.out))?;
    let print = fingerprint(&dataset_files(&args.out))?;
    println!(
        "wrote {} articles, {} engagements to {} (sha256 {print})",
        dataset.articles.len(),
        dataset.engagements.len(),
        args.out.display()
    );
    Ok(())
}

pub fn ingest(args: &IngestArgs) -> Result<(), CliError> {
    let (mut dataset, print) = load(&args.data)?;
    let labeled = dataset.articles.iter().filter(|a| a.label.is_some()).count();
    let fake = dataset
        .articles
        .iter()
        .filter(|a| a.label.is_some_and(|l| l.is_fake()))
        .count();
    println!("articles\t{}", dataset.articles.len());
    println!("labeled\t{labeled}");
    println!("fake\t{fake}");
    println!("engagements\t{}", dataset.engagements.len());
    println!("users\t{}", dataset.users().len());
    println!("feature_dim\t{}", dataset.feature_dim);
    println!("sha256\t{print}");
    if let Some(out) = &args.out {
        dataset.sort_articles();
        std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        write_dataset(&dataset, &DatasetPaths::in_dir(out))?;
    }
    Ok(())
}

pub fn split(args: &SplitArgs) -> Result<(), CliError> {
    let config = resolve_config(&args.config)?;
    let (dataset, print) = load(&args.data)?;
    let split = make_split(&dataset, &config)?;
    let extra = if args.graphs { vec!["--graphs".to_string()] } else { vec![] };
    let dir = start("split", args.out.as_deref(), &config, print, extra)?;

    write_file(&dir.join("bands.tsv"), |w| {
        writeln!(w, "band\tcut\tarticles\tengagements\tusers")?;
        for b in split.bands() {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                b.kind.name(),
                b.cut,
                b.articles.len(),
                b.engagements.len(),
                b.users.len()
            )?;
        }
        Ok(())
    })?;
    write_file(&dir.join("split.tsv"), |w| {
        writeln!(w, "article_id\tpublish_time\tband")?;
        for b in split.bands() {
            for &i in &b.articles {
                let a = &dataset.articles[i];
                writeln!(w, "{}\t{}\t{}", a.id, a.publish_time, b.kind.name())?;
            }
        }
        Ok(())
    })?;
    if args.graphs {
        let train_config = config.train_config();
        for kind in [BandKind::Train, BandKind::Val, BandKind::Test] {
            let band = prepare_band(&dataset, &split, kind, &train_config, None)?;
            let name = kind.name();
            write_file(&dir.join(format!("{name}_edges.tsv")), |w| band.graph.write_edge_list(w))?;
            write_file(&dir.join(format!("{name}_nodes.tsv")), |w| band.graph.write_node_table(w))?;
            write_file(&dir.join(format!("{name}_edge_features.tsv")), |w| {
                write_edge_features(w, &band.graph, &band.table)
            })?;
        }
    }
    println!("{}", dir.display());
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let config = resolve_config(&args.config)?;
    let (dataset, print) = load(&args.data)?;
    if args.bins < 2 {
        return Err(CliError::Config(format!("--bins must be at least 2, got {}", args.bins)));
    }
    let dir = start("analyze", args.out.as_deref(), &config, print, vec![format!("--bins={}", args.bins)])?;
    let log: Vec<_> = dataset.engagements.iter().collect();
    let lookup = dataset.article_map();
    let analysis = EarlinessAnalysis::run(&log, &lookup, &config.earliness)?;

    let overall = [("all".to_string(), analysis.overall.clone())];
    let tables: [(&str, &[(String, _)]); 4] = [
        ("fna_hist.tsv", &overall),
        ("fna_hist_by_engagement_class.tsv", &analysis.by_engagement),
        ("fna_hist_by_user_class.tsv", &analysis.by_user),
        ("fna_hist_joint.tsv", &analysis.joint),
    ];
    for (file, groups) in tables {
        let hists = EarlinessAnalysis::histograms(groups, args.bins)?;
        write_file(&dir.join(file), |w| write_histograms(w, &hists))?;
    }
    let sizes = analysis.labels.group_sizes();
    println!(
        "users scored {}, unlabeled articles skipped {}, group sizes EE {} EL {} LE {} LL {}",
        analysis.overall.len(),
        analysis.unlabeled,
        sizes[0],
        sizes[1],
        sizes[2],
        sizes[3]
    );
    println!("{}", dir.display());
    Ok(())
}

fn write_metrics(path: &Path, rows: &[(&str, &EvalReport)]) -> Result<(), CliError> {
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    write_file(path, |w| {
        writeln!(w, "band\tacc\tf1\tprecision\trecall\thomophily_before\thomophily_after")?;
        for (band, r) in rows {
            writeln!(
                w,
                "{band}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.accuracy,
                r.f1,
                r.confusion.precision(),
                r.confusion.recall(),
                opt(r.homophily_original),
                opt(r.homophily_reweighted)
            )?;
        }
        Ok(())
    })
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let mut config = resolve_config(&args.config)?;
    apply_train_flags(&mut config, &args.train)?;
    config.check()?;
    let (dataset, print) = load(&args.data)?;
    let split = make_split(&dataset, &config)?;
    let dir = start("train", args.out.as_deref(), &config, print.clone(), vec![])?;

    let train_config = config.train_config();
    let bands = prepare_split(&dataset, &split, &train_config)?;
    let outcome = fit(&bands.train, &bands.val, &train_config)?;
    write_file(&dir.join("history.tsv"), |w| write_history(w, &outcome.history))?;

    let mut checkpoint = Checkpoint::new(outcome.params.clone());
    for (k, v) in config.flatten() {
        checkpoint.meta.insert(format!("{CONFIG_PREFIX}{k}"), v);
    }
    checkpoint.meta.insert("best_epoch".into(), outcome.best_epoch.to_string());
    checkpoint.meta.insert("dataset_fingerprint".into(), print);
    let path = dir.join(CHECKPOINT_FILE);
    checkpoint.save(&path)?;

    let val = evaluate(&outcome.params, &bands.val)?;
    let test = evaluate(&outcome.params, &bands.test)?;
    write_metrics(&dir.join("metrics.tsv"), &[("val", &val), ("test", &test)])?;
    println!(
        "best epoch {}, test acc {:.4} f1 {:.4}",
        outcome.best_epoch, test.accuracy, test.f1
    );
    println!("{}", dir.display());
    Ok(())
}

fn write_predictions(w: &mut impl Write, band: &BandData, params: &earlybird::nn::ModelParams) -> Result<(), CliError> {
    let p = infer(params, band)?;
    let io = |e| CliError::Runtime(format!("writing predictions: {e}"));
    for (i, node) in band.graph.nodes.iter().enumerate() {
        let truth = node.label.map_or_else(|| "NA".to_string(), |l| l.index().to_string());
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            band.kind.name(),
            node.id,
            p.labels[i].index(),
            p.probs.row(i)[1],
            truth
        )
        .map_err(io)?;
    }
    Ok(())
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<(), CliError> {
    let checkpoint = Checkpoint::load(&args.checkpoint).map_err(config_err)?;
    let pairs: Vec<(&str, &str)> = checkpoint
        .meta
        .iter()
        .filter_map(|(k, v)| k.strip_prefix(CONFIG_PREFIX).map(|k| (k, v.as_str())))
        .collect();
    if pairs.is_empty() {
        return Err(CliError::Config(format!(
            "{}: checkpoint carries no run configuration",
            args.checkpoint.display()
        )));
    }
    let config = RunConfig::unflatten(pairs)?;
    let (dataset, print) = load(&args.data)?;
    let split = make_split(&dataset, &config)?;
    let dir = start(
        "evaluate",
        args.out.as_deref(),
        &config,
        print,
        vec![format!("--checkpoint={}", args.checkpoint.display())],
    )?;
    let bands = prepare_split(&dataset, &split, &config.train_config())?;
    let params = &checkpoint.params;
    let val = evaluate(params, &bands.val)?;
    let test = evaluate(params, &bands.test)?;
    write_metrics(&dir.join("metrics.tsv"), &[("val", &val), ("test", &test)])?;

    let path = dir.join("predictions.tsv");
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "band\tarticle_id\tpredicted\tp_fake\tlabel").map_err(|e| CliError::io(&path, e))?;
    write_predictions(&mut w, &bands.val, params)?;
    write_predictions(&mut w, &bands.test, params)?;
    w.flush().map_err(|e| CliError::io(&path, e))?;
    println!("test acc {:.4} f1 {:.4}", test.accuracy, test.f1);
    println!("{}", dir.display());
    Ok(())
}

pub fn ablate(args: &AblateArgs) -> Result<(), CliError> {
    let mut config = resolve_config(&args.config)?;
    apply_train_flags(&mut config, &args.train)?;
    config.check()?;
    if config.split.cuts.is_some() {
        return Err(CliError::Config("ablation splits by fractions; drop `cuts`".into()));
    }
    if args.seeds == 0 {
        return Err(CliError::Config("--seeds must be at least 1".into()));
    }
    let variants = parse_variants(&args.variants)?;
    let (dataset, print) = load(&args.data)?;
    let dir = start(
        "ablate",
        args.out.as_deref(),
        &config,
        print,
        vec![format!("--variants={}", args.variants), format!("--seeds={}", args.seeds)],
    )?;
    let base = config.train_config();
    let seeds: Vec<u64> = (0..args.seeds).map(|i| base.seed.wrapping_add(i)).collect();
    let [a, b, c] = config.split.fractions;
    let rows = run_ablation(&dataset, &base, (a, b, c), &variants, &seeds)?;
    write_file(&dir.join("results.tsv"), |w| write_results(w, &rows))?;
    let summary = summarize(&rows);
    write_file(&dir.join("summary.tsv"), |w| {
        writeln!(w, "variant\truns\tacc\tf1\thomophily_before\thomophily_after")?;
        for s in &summary {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                s.variant, s.runs, s.acc, s.f1, s.homophily_before, s.homophily_after
            )?;
        }
        Ok(())
    })?;
    for s in &summary {
        println!("{:<8} acc {:.4} f1 {:.4}", s.variant, s.acc, s.f1);
    }
    println!("{}", dir.display());
    Ok(())
}
