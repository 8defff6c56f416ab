//! Command implementations behind the CLI. Every run leaves a
//! `manifest.json` with the configuration, its hash, the seed, the crate
//! version and the metric values it produced.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::barcodes::{barcode_rows, write_barcodes};
use super::theorem::{check_theorem, theorem_instances, TheoremReport};
use crate::datasets::{generate, read_splits, write_splits, DatasetManifest, DatasetSpec, Splits, Variant};
use crate::error::{Error, Result};
use crate::model::{checkpoint, evaluate, history_csv, train, Config, Evaluation};

pub const MANIFEST: &str = "manifest.json";
pub const CHECKPOINT: &str = "checkpoint.txt";
/// Environment variable capping the worker threads.
pub const THREADS_VAR: &str = "TOPING_THREADS";

pub type Metrics = BTreeMap<String, f64>;

/// Applies the thread cap, if set. Must run before any parallel work.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_VAR} = {value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

pub fn load_config(path: &Path) -> Result<Config> {
    let config = Config::from_text(&std::fs::read_to_string(path)?)?;
    config.validate()?;
    Ok(config)
}

/// Dataset specs are JSON objects such as `{"variant": "BA2Motifs", "num_graphs": 1000, "seed": 0}`.
pub fn load_dataset_spec(path: &Path) -> Result<DatasetSpec> {
    let spec: DatasetSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    spec.validate()?;
    Ok(spec)
}

pub fn config_hash(config: &Config) -> String {
    hex::encode(Sha256::digest(config.to_text().as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataRef {
    pub path: PathBuf,
    /// Split checksum from the dataset's own manifest, when it has one.
    pub checksum: Option<String>,
}

impl DataRef {
    fn of(dir: &Path) -> Self {
        let checksum = std::fs::read_to_string(dir.join(MANIFEST))
            .ok()
            .and_then(|text| serde_json::from_str::<DatasetManifest>(&text).ok())
            .map(|m| m.checksum);
        Self { path: dir.to_path_buf(), checksum }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    /// The configuration as a key-value text, ready to be fed back in.
    pub config: String,
    pub data: Option<DataRef>,
    pub metrics: Metrics,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &Config, data: Option<&Path>) -> Self {
        Self {
            command: command.to_string(),
            version: crate::VERSION.to_string(),
            seed: config.seed,
            config_hash: config_hash(config),
            config: config.to_text(),
            data: data.map(DataRef::of),
            metrics: Metrics::new(),
            files: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST))?)?)
    }
}

/// Accuracy, loss and (when defined) AUC of one evaluation, keys prefixed by `split`.
pub fn evaluation_metrics(split: &str, eval: &Evaluation) -> Metrics {
    let mut m = Metrics::new();
    m.insert(format!("{split}_accuracy"), eval.accuracy);
    m.insert(format!("{split}_loss"), eval.loss);
    if let Some(auc) = eval.auc {
        m.insert(format!("{split}_auc"), auc);
    }
    m
}

fn write_metrics(dir: &Path, metrics: &Metrics) -> Result<()> {
    std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(metrics)? + "\n")?;
    Ok(())
}

pub fn generate_dataset(spec: &DatasetSpec, out: &Path) -> Result<DatasetManifest> {
    write_splits(out, &generate(spec)?, spec)
}

/// Trains on `splits`, writing the checkpoint, history, metrics and manifest to `out`.
pub fn train_on(config: &Config, splits: &Splits, data: Option<&Path>, out: &Path) -> Result<RunManifest> {
    let outcome = train(&splits.train, &splits.val, &splits.test, config)?;
    std::fs::create_dir_all(out)?;
    checkpoint::save(&out.join(CHECKPOINT), &outcome.model, config)?;
    std::fs::write(out.join("history.csv"), history_csv(&outcome.history))?;
    let mut manifest = RunManifest::new("train", config, data);
    manifest.metrics.extend(evaluation_metrics("val", &evaluate(&outcome.model, &splits.val, config)?));
    manifest.metrics.extend(evaluation_metrics("test", &evaluate(&outcome.model, &splits.test, config)?));
    manifest.metrics.insert("best_epoch".into(), outcome.best_epoch.map_or(0.0, |e| e as f64));
    write_metrics(out, &manifest.metrics)?;
    manifest.files = vec![CHECKPOINT.into(), "history.csv".into(), "metrics.json".into()];
    manifest.write(out)?;
    Ok(manifest)
}

pub fn train_run(config: &Config, data: &Path, out: &Path) -> Result<RunManifest> {
    train_on(config, &read_splits(data)?, Some(data), out)
}

/// One training run per seed `config.seed .. config.seed + seeds`, each in
/// `out/seed-<s>`, plus a manifest in `out` holding the per-metric means.
pub fn train_seeds(config: &Config, data: &Path, out: &Path, seeds: u64) -> Result<RunManifest> {
    if seeds <= 1 {
        return train_run(config, data, out);
    }
    let splits = read_splits(data)?;
    let mut runs = Vec::new();
    for s in config.seed..config.seed + seeds {
        let c = Config { seed: s, ..config.clone() };
        runs.push(train_on(&c, &splits, Some(data), &out.join(format!("seed-{s}")))?);
    }
    let mut manifest = RunManifest::new("train", config, Some(data));
    manifest.metrics = mean_metrics(runs.iter().map(|r| &r.metrics));
    manifest.metrics.insert("seeds".into(), seeds as f64);
    manifest.files = (config.seed..config.seed + seeds).map(|s| format!("seed-{s}")).collect();
    manifest.write(out)?;
    Ok(manifest)
}

/// Means of every key present in all inputs.
pub fn mean_metrics<'a>(all: impl Iterator<Item = &'a Metrics>) -> Metrics {
    let all: Vec<&Metrics> = all.collect();
    let Some(first) = all.first() else { return Metrics::new() };
    first
        .keys()
        .filter(|k| all.iter().all(|m| m.contains_key(*k)))
        .map(|k| (k.clone(), all.iter().map(|m| m[k]).sum::<f64>() / all.len() as f64))
        .collect()
}

/// Evaluates a checkpoint on the validation and test splits of `data`.
/// Results go to `out` (default: `eval/` next to the checkpoint).
pub fn eval_run(checkpoint_path: &Path, data: &Path, out: Option<&Path>) -> Result<RunManifest> {
    let (model, config) = checkpoint::load(checkpoint_path)?;
    let splits = read_splits(data)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| default_sibling(checkpoint_path, "eval"));
    std::fs::create_dir_all(&out)?;
    let mut manifest = RunManifest::new("eval", &config, Some(data));
    manifest.metrics.extend(evaluation_metrics("val", &evaluate(&model, &splits.val, &config)?));
    manifest.metrics.extend(evaluation_metrics("test", &evaluate(&model, &splits.test, &config)?));
    write_metrics(&out, &manifest.metrics)?;
    manifest.files = vec!["metrics.json".into()];
    manifest.write(&out)?;
    Ok(manifest)
}

fn default_sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

/// Barcodes of every split to `out_csv`; the manifest goes next to it as
/// `<out_csv>.manifest.json`.
pub fn export_barcodes_run(checkpoint_path: &Path, data: &Path, out_csv: &Path) -> Result<RunManifest> {
    let (model, config) = checkpoint::load(checkpoint_path)?;
    let splits = read_splits(data)?;
    let mut rows = Vec::new();
    for (name, graphs) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        rows.extend(barcode_rows(&model, graphs, &config, name)?);
    }
    if let Some(dir) = out_csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_barcodes(out_csv, &rows)?;
    let mut manifest = RunManifest::new("export-barcodes", &config, Some(data));
    manifest.metrics.insert("rows".into(), rows.len() as f64);
    manifest.files = vec![out_csv.display().to_string()];
    let mut name = out_csv.as_os_str().to_owned();
    name.push(".manifest.json");
    std::fs::write(PathBuf::from(name), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// Runs the exhaustive check with the configuration's `alpha` and `lambda0`.
pub fn check_theorem_run(config: &Config, out: Option<&Path>) -> Result<(TheoremReport, RunManifest)> {
    let report = check_theorem(&theorem_instances()?, config.alpha, config.lambda0)?;
    let mut manifest = RunManifest::new("check-theorem", config, None);
    for (convention, unique, total) in report.unique_counts() {
        manifest.metrics.insert(format!("{convention}_unique"), unique as f64);
        manifest.metrics.insert(format!("{convention}_instances"), total as f64);
    }
    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("theorem.json"), serde_json::to_string_pretty(&report)? + "\n")?;
        manifest.files = vec!["theorem.json".into()];
        manifest.write(out)?;
    }
    Ok((report, manifest))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ablation {
    pub no_topo: bool,
    pub no_prior: bool,
}

impl Ablation {
    /// The discrepancy term and the prior are switched off through their coefficients.
    pub fn apply(self, config: &Config) -> Config {
        let mut c = config.clone();
        if self.no_topo {
            c.alpha = 0.0;
        }
        if self.no_prior {
            c.beta = 0.0;
        }
        c
    }

    pub fn label(self) -> &'static str {
        match (self.no_topo, self.no_prior) {
            (false, false) => "full",
            (true, false) => "no-topo",
            (false, true) => "no-prior",
            (true, true) => "no-topo-no-prior",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: &'static str,
    pub seed: u64,
    pub test_accuracy: f64,
    pub test_auc: Option<f64>,
    pub val_accuracy: f64,
}

/// Dataset used by `ablate` when no data directory is given.
pub fn default_ablation_data(seed: u64) -> Result<Splits> {
    generate(&DatasetSpec::new(Variant::BA2Motifs, 1000, seed))
}

/// Trains the full model and the ablated one on matched seeds and data.
pub fn ablate_run(config: &Config, ablation: Ablation, data: Option<&Path>, seeds: u64, out: &Path) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    let fixed = data.map(read_splits).transpose()?;
    for s in config.seed..config.seed + seeds.max(1) {
        let splits = match &fixed {
            Some(splits) => splits.clone(),
            None => default_ablation_data(s)?,
        };
        for variant in [Ablation::default(), ablation] {
            let c = Config { seed: s, ..variant.apply(config) };
            let outcome = train(&splits.train, &splits.val, &splits.test, &c)?;
            let test = evaluate(&outcome.model, &splits.test, &c)?;
            let val = evaluate(&outcome.model, &splits.val, &c)?;
            rows.push(AblationRow {
                variant: variant.label(),
                seed: s,
                test_accuracy: test.accuracy,
                test_auc: test.auc,
                val_accuracy: val.accuracy,
            });
        }
    }
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("ablation.csv")).map_err(|e| Error::Parse(e.to_string()))?;
    for row in &rows {
        w.serialize(row).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    let mut manifest = RunManifest::new("ablate", config, data);
    for variant in [Ablation::default().label(), ablation.label()] {
        let mine: Vec<&AblationRow> = rows.iter().filter(|r| r.variant == variant).collect();
        let n = mine.len() as f64;
        manifest.metrics.insert(format!("{variant}_test_accuracy"), mine.iter().map(|r| r.test_accuracy).sum::<f64>() / n);
        if mine.iter().all(|r| r.test_auc.is_some()) {
            let auc = mine.iter().filter_map(|r| r.test_auc).sum::<f64>() / n;
            manifest.metrics.insert(format!("{variant}_test_auc"), auc);
        }
    }
    manifest.files = vec!["ablation.csv".into()];
    manifest.write(out)?;
    Ok(rows)
}
