use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{config_hash, RunConfig};
use crate::building_sim::{run_scenario, SimulatedDataset};
use crate::error::{Error, Result};
use crate::evaluation::{
    central_levels_present, export_metrics, forecast_windows, interval_coverage, mean_pinball_celsius,
    per_horizon_cvrmse, read_forecast_dump, write_forecast_dump, Cell, CoverageReport, HorizonMetrics, MetricsFormat,
    MetricsTable,
};
use crate::model::build_model;
use crate::pipeline::{future_features, past_features, prepare, target_features, ScalerSpec, TIME_FEATURES};
use crate::training::{fit, load_checkpoint, save_checkpoint, Checkpoint, TrainReport, TrainingMetadata};

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

/// `<path>` with `suffix` appended to the file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

#[derive(Serialize)]
struct GenerateManifest<'a> {
    seed: u64,
    config_hash: String,
    rows: usize,
    days: usize,
    start: String,
    columns: Vec<&'a str>,
    max_energy_residual: f64,
    min_t_in: f64,
    max_t_in: f64,
}

pub struct GenerateOutcome {
    pub rows: usize,
    pub manifest: PathBuf,
}

/// Simulates the configured scenario and writes the dataset CSV plus
/// `<out>.manifest.json`.
pub fn cmd_generate(cfg: &RunConfig, out: &Path) -> Result<GenerateOutcome> {
    cfg.validate()?;
    let (dataset, report) = run_scenario(&cfg.simulator, cfg.seed)?;
    ensure_parent(out)?;
    let tmp = sibling(out, ".tmp");
    dataset.write_csv(&tmp)?;
    fs::rename(&tmp, out).map_err(|e| Error::io(out, e))?;
    let manifest = GenerateManifest {
        seed: cfg.seed,
        config_hash: config_hash(&cfg.simulator)?,
        rows: dataset.len(),
        days: cfg.simulator.days,
        start: cfg.simulator.start.format(crate::building_sim::weather::TIMESTAMP_FORMAT).to_string(),
        columns: std::iter::once("timestamp").chain(crate::building_sim::DATASET_COLUMNS).collect(),
        max_energy_residual: report.max_energy_residual,
        min_t_in: report.min_t_in,
        max_t_in: report.max_t_in,
    };
    let path = sibling(out, ".manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::config(e.to_string()))?;
    crate::training::write_atomic(&path, text.as_bytes())?;
    Ok(GenerateOutcome { rows: dataset.len(), manifest: path })
}

/// Every dataset column the model layout needs, reported together.
fn check_schema(dataset: &SimulatedDataset) -> Result<()> {
    let mut needed: Vec<String> = past_features().into_iter().chain(future_features()).chain(target_features()).collect();
    needed.retain(|n| !TIME_FEATURES.contains(&n.as_str()));
    needed.sort();
    needed.dedup();
    let missing: Vec<&str> = needed.iter().map(String::as_str).filter(|n| dataset.column(n).is_none()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::config(format!("dataset lacks required features: {}", missing.join(", "))))
    }
}

fn load_dataset(path: &Path) -> Result<SimulatedDataset> {
    let ds = SimulatedDataset::read_csv(path)?;
    check_schema(&ds)?;
    Ok(ds)
}

/// Trains on the dataset, saving the best checkpoint atomically whenever
/// validation loss improves, with `<out>.log.jsonl` and `<out>.splits.csv`
/// beside it.
pub fn cmd_train(cfg: &RunConfig, dataset_path: &Path, out: &Path) -> Result<TrainReport> {
    cfg.validate()?;
    let dataset = load_dataset(dataset_path)?;
    let scaler = ScalerSpec::standard();
    let splits = prepare(&dataset, &scaler, cfg.model.n_past, cfg.model.n_future, &cfg.pipeline, cfg.seed)?;
    let mut model = build_model(&cfg.model)?;
    ensure_parent(out)?;
    crate::pipeline::write_manifest(&splits, &sibling(out, ".splits.csv"))?;
    let log_path = sibling(out, ".log.jsonl");
    let mut log = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut best = TrainingMetadata::default();
    let report = fit(&mut model, &splits.train, &splits.validation, &cfg.training, |rec, m, improved| {
        let line = serde_json::to_string(rec).map_err(|e| Error::config(e.to_string()))?;
        writeln!(log, "{line}").and_then(|_| log.flush()).map_err(|e| Error::io(&log_path, e))?;
        eprintln!("{line}");
        if improved {
            best = TrainingMetadata {
                best_epoch: rec.epoch,
                best_val_loss: Some(rec.val_loss),
                epochs_run: rec.epoch,
                stop_reason: "in_progress".into(),
            };
            save_checkpoint(&Checkpoint::from_model(m, &scaler, cfg.seed, best.clone()), out)?;
        }
        Ok(())
    })?;
    best.epochs_run = report.epochs.len() - 1;
    best.stop_reason = report.stop_reason.as_str().into();
    save_checkpoint(&Checkpoint::from_model(&model, &scaler, cfg.seed, best), out)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selector {
    AllTest,
    Index(usize),
}

impl std::str::FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-test" => Ok(Selector::AllTest),
            _ => s
                .strip_prefix("index:")
                .and_then(|n| n.parse().ok())
                .map(Selector::Index)
                .ok_or_else(|| Error::config(format!("instance selector must be `all-test` or `index:N`, got `{s}`"))),
        }
    }
}

/// Writes the forecast dump for the selected test-split instances and
/// returns the number of rows.
pub fn cmd_predict(cfg: &RunConfig, checkpoint: &Path, dataset_path: &Path, selector: &Selector, out: &Path) -> Result<usize> {
    cfg.pipeline.validate()?;
    let ckpt = load_checkpoint(checkpoint)?;
    let model = ckpt.model()?;
    let dataset = load_dataset(dataset_path)?;
    let splits = prepare(&dataset, &ckpt.scaler, model.config.n_past, model.config.n_future, &cfg.pipeline, ckpt.seed)?;
    let ids: Vec<usize> = match selector {
        Selector::AllTest => (0..splits.test.len()).collect(),
        Selector::Index(i) => vec![*i],
    };
    let windows = splits.test.select(&ids)?;
    let set = forecast_windows(&model, &windows, &ids)?;
    ensure_parent(out)?;
    write_forecast_dump(&set, out)?;
    let (h, z) = set.dims()?;
    Ok(set.instances.len() * h * z * set.levels.len())
}

fn summary_table(h: &HorizonMetrics, cov: &CoverageReport, pinball: f64) -> MetricsTable {
    let mut t = MetricsTable::new(&["metric", "value"]);
    let mut put = |name: String, v: Cell| t.rows.push(vec![Cell::Text(name), v]);
    put("instances".into(), Cell::Int(h.instances));
    put("horizon_steps".into(), Cell::Int(h.horizon()));
    put("cvrmse_pct".into(), Cell::Num(h.overall));
    for (z, v) in h.zone_aggregate.iter().enumerate() {
        put(format!("cvrmse_pct_zone_{}", z + 1), Cell::Num(*v));
    }
    put("mean_pinball_c".into(), Cell::Num(pinball));
    put("crossing_freq".into(), Cell::Num(cov.crossing_freq));
    for r in &cov.rows {
        put(format!("coverage_{}", (r.level * 100.0).round()), Cell::Num(r.coverage));
    }
    // How flat the mean curve is beyond one quarter of a day ahead.
    if h.horizon() > 24 {
        let head = &h.mean_curve[..24];
        let tail = &h.mean_curve[24..];
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        put("mean_cvrmse_pct_steps_1_24".into(), Cell::Num(mean(head)));
        put(format!("mean_cvrmse_pct_steps_25_{}", h.horizon()), Cell::Num(mean(tail)));
        let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        put("cvrmse_range_pct_after_step_24".into(), Cell::Num(hi - lo));
    }
    t
}

/// Metric files written by [`cmd_evaluate`], relative to the output directory.
pub const METRIC_FILES: [&str; 6] =
    ["horizon_cvrmse.csv", "horizon_cvrmse.jsonl", "coverage.csv", "coverage.jsonl", "summary.csv", "summary.jsonl"];

pub fn cmd_evaluate(cfg: &RunConfig, dump: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let set = read_forecast_dump(dump)?;
    let present = central_levels_present(&set.levels);
    let central: Vec<f64> =
        cfg.evaluation.central_levels.iter().copied().filter(|c| present.iter().any(|p| (p - c).abs() < 1e-9)).collect();
    for c in &cfg.evaluation.central_levels {
        if !central.contains(c) {
            eprintln!("warning: no quantile pair for the {}% interval in {}", c * 100.0, dump.display());
        }
    }
    let horizon = per_horizon_cvrmse(&set)?;
    let coverage = interval_coverage(&set, &central)?;
    let pinball = mean_pinball_celsius(&set)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let tables = [horizon.table(), coverage.table(), summary_table(&horizon, &coverage, pinball)];
    let mut written = Vec::new();
    for (i, table) in tables.iter().enumerate() {
        for (j, format) in [MetricsFormat::Csv, MetricsFormat::JsonLines].into_iter().enumerate() {
            let path = out_dir.join(METRIC_FILES[2 * i + j]);
            export_metrics(table, &path, format)?;
            written.push(path);
        }
    }
    Ok(written)
}
