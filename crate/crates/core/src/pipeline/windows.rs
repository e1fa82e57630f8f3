use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::features::{encode_time_features, future_features, past_features, target_features, WEATHER_FEATURES};
use super::scaling::{inverse_with, scale_with, ScalerSpec};
use crate::building_sim::{HolidayCalendar, SimulatedDataset};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub stride: usize,
    /// Gaussian forecast noise added to future weather, in physical units.
    pub noise_sd: f64,
    pub noise_sd_overrides: BTreeMap<String, f64>,
    pub split_fractions: [f64; 3],
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { stride: 1, noise_sd: 0.01, noise_sd_overrides: BTreeMap::new(), split_fractions: [0.6, 0.2, 0.2] }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::config("pipeline.stride must be at least 1"));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::config("pipeline.noise_sd must be non-negative"));
        }
        for (name, sd) in &self.noise_sd_overrides {
            if !WEATHER_FEATURES.contains(&name.as_str()) {
                return Err(Error::config(format!("pipeline.noise_sd_overrides: `{name}` is not a weather feature")));
            }
            if !(sd.is_finite() && *sd >= 0.0) {
                return Err(Error::config(format!("pipeline.noise_sd_overrides.{name} must be non-negative")));
            }
        }
        let f = self.split_fractions;
        if f.iter().any(|&x| !(x > 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("pipeline.split_fractions must be positive and sum to 1, got {f:?}")));
        }
        Ok(())
    }

    fn noise_sd_for(&self, feature: &str) -> f64 {
        self.noise_sd_overrides.get(feature).copied().unwrap_or(self.noise_sd)
    }
}

/// Adds i.i.d. Gaussian noise to `values` in place, then clamps to `interval`.
pub fn add_forecast_noise(values: &mut [f64], rng: &mut impl Rng, sd: f64, interval: (f64, f64)) {
    if sd == 0.0 {
        return;
    }
    for v in values.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = (*v + sd * z).clamp(interval.0, interval.1);
    }
}

/// Physical and scaled feature matrices for a whole dataset, row-major.
#[derive(Debug)]
pub struct FeatureTable {
    pub timestamps: Vec<NaiveDateTime>,
    pub scaler: ScalerSpec,
    past_names: Vec<String>,
    future_names: Vec<String>,
    past: Vec<f64>,
    future: Vec<f64>,
    future_raw: Vec<f64>,
    target: Vec<f64>,
    clamp_events: BTreeMap<String, usize>,
}

fn time_value(name: &str, tf: &super::features::TimeFeatures) -> Option<f64> {
    let c = tf.cyclic();
    super::features::TIME_FEATURES.iter().position(|t| *t == name).map(|i| c[i])
}

impl FeatureTable {
    pub fn from_dataset(dataset: &SimulatedDataset, scaler: &ScalerSpec) -> Result<Self> {
        scaler.validate()?;
        let no_holidays = HolidayCalendar::empty();
        let time: Vec<_> = dataset.timestamps.iter().map(|&t| encode_time_features(t, &no_holidays)).collect();
        let n = dataset.len();
        let mut clamp_events = BTreeMap::new();
        let mut column = |name: &str| -> Result<(Vec<f64>, Vec<f64>)> {
            let raw: Vec<f64> = match dataset.column(name) {
                Some(c) => c.to_vec(),
                None => match time.first().and_then(|tf| time_value(name, tf)) {
                    Some(_) => time.iter().map(|tf| time_value(name, tf).unwrap_or(0.0)).collect(),
                    None => return Err(Error::config(format!("dataset is missing feature column `{name}`"))),
                },
            };
            let (lo, hi) = scaler.interval(name)?;
            let mut clamped = 0usize;
            let scaled = raw
                .iter()
                .map(|&v| {
                    let s = scale_with(v, lo, hi);
                    clamped += s.clamped as usize;
                    s.value
                })
                .collect();
            if clamped > 0 {
                *clamp_events.entry(name.to_string()).or_insert(0) += clamped;
            }
            Ok((raw, scaled))
        };
        let interleave = |cols: &[Vec<f64>]| -> Vec<f64> {
            let mut out = Vec::with_capacity(n * cols.len());
            for r in 0..n {
                out.extend(cols.iter().map(|c| c[r]));
            }
            out
        };
        let (past_names, future_names, target_names) = (past_features(), future_features(), target_features());
        let mut cache: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for name in past_names.iter().chain(&future_names).chain(&target_names) {
            if !cache.contains_key(name) {
                cache.insert(name.clone(), column(name)?);
            }
        }
        let scaled_cols = |names: &[String]| names.iter().map(|n| cache[n].1.clone()).collect::<Vec<_>>();
        let raw_cols = |names: &[String]| names.iter().map(|n| cache[n].0.clone()).collect::<Vec<_>>();
        Ok(Self {
            timestamps: dataset.timestamps.clone(),
            scaler: scaler.clone(),
            past: interleave(&scaled_cols(&past_names)),
            future: interleave(&scaled_cols(&future_names)),
            future_raw: interleave(&raw_cols(&future_names)),
            target: interleave(&scaled_cols(&target_names)),
            past_names,
            future_names,
            clamp_events,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn past_width(&self) -> usize {
        self.past_names.len()
    }

    pub fn future_width(&self) -> usize {
        self.future_names.len()
    }

    /// Number of out-of-interval values clamped while scaling, per feature.
    pub fn clamp_events(&self) -> &BTreeMap<String, usize> {
        &self.clamp_events
    }

    pub fn total_clamp_events(&self) -> usize {
        self.clamp_events.values().sum()
    }

    /// Scaled targets back to °C.
    pub fn target_to_celsius(&self, scaled: f64) -> f64 {
        // Every zone shares the same output interval.
        let (lo, hi) = self.scaler.interval("t_in_1").unwrap_or((10.0, 40.0));
        inverse_with(scaled, lo, hi)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowedSample {
    /// `n_past x F_past`, scaled.
    pub past: Tensor,
    /// `n_future x F_future`, scaled, with forecast noise on the weather columns.
    pub future: Tensor,
    /// `n_future x 5`, scaled.
    pub target: Tensor,
    /// First row of the past window.
    pub origin: usize,
    /// Timestamp of the first forecast step.
    pub forecast_start: NaiveDateTime,
}

impl WindowedSample {
    pub fn target_celsius(&self, table: &FeatureTable) -> Vec<f64> {
        self.target.data().iter().map(|&v| table.target_to_celsius(v)).collect()
    }
}

/// Window origins over a shared feature table. Samples are built on demand.
#[derive(Clone, Debug)]
pub struct Windows {
    table: Arc<FeatureTable>,
    origins: Vec<usize>,
    pub n_past: usize,
    pub n_future: usize,
    noise: Vec<f64>,
    noise_seed: u64,
}

pub fn window_count(n_rows: usize, n_past: usize, n_future: usize, stride: usize) -> usize {
    let span = n_past + n_future;
    if n_rows < span || stride == 0 {
        0
    } else {
        (n_rows - span) / stride + 1
    }
}

/// Origins `o` on the global stride grid with `[o, o + span)` inside `range`.
fn origins_in(range: Range<usize>, span: usize, stride: usize) -> Vec<usize> {
    let first = range.start.div_ceil(stride) * stride;
    (first..range.end).step_by(stride).take_while(|&o| o + span <= range.end).collect()
}

pub fn build_windows(
    table: Arc<FeatureTable>,
    n_past: usize,
    n_future: usize,
    cfg: &PipelineConfig,
    noise_seed: u64,
) -> Result<Windows> {
    cfg.validate()?;
    if n_past == 0 || n_future == 0 {
        return Err(Error::config("n_past and n_future must be at least 1"));
    }
    let need = n_past + n_future;
    if table.len() < need {
        return Err(Error::config(format!(
            "dataset has {} rows; windowing needs at least {need} (n_past {n_past} + n_future {n_future})",
            table.len()
        )));
    }
    let noise = table.future_names.iter().map(|n| if WEATHER_FEATURES.contains(&n.as_str()) { cfg.noise_sd_for(n) } else { 0.0 }).collect();
    let origins = origins_in(0..table.len(), need, cfg.stride);
    Ok(Windows { table, origins, n_past, n_future, noise, noise_seed })
}

impl Windows {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn origins(&self) -> &[usize] {
        &self.origins
    }

    pub fn table(&self) -> &Arc<FeatureTable> {
        &self.table
    }

    /// The subset whose windows lie entirely inside `range`.
    pub fn restrict(&self, range: Range<usize>) -> Windows {
        let span = self.n_past + self.n_future;
        Windows {
            origins: self.origins.iter().copied().filter(|&o| o >= range.start && o + span <= range.end).collect(),
            ..self.clone()
        }
    }

    /// Keeps the listed positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> Result<Windows> {
        let origins = positions
            .iter()
            .map(|&p| {
                self.origins.get(p).copied().ok_or_else(|| Error::config(format!("instance {p} out of range (0..{})", self.len())))
            })
            .collect::<Result<_>>()?;
        Ok(Windows { origins, ..self.clone() })
    }

    pub fn get(&self, i: usize) -> WindowedSample {
        self.sample_at(self.origins[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = WindowedSample> + '_ {
        self.origins.iter().map(|&o| self.sample_at(o))
    }

    fn rows(data: &[f64], width: usize, rows: Range<usize>) -> Vec<f64> {
        data[rows.start * width..rows.end * width].to_vec()
    }

    /// Noise depends only on `(seed, origin)`, so samples are identical
    /// whatever order they are drawn in.
    pub fn sample_at(&self, origin: usize) -> WindowedSample {
        let t = &self.table;
        let (pw, fw) = (t.past_width(), t.future_width());
        let fut = origin + self.n_past..origin + self.n_past + self.n_future;
        let past = Self::rows(&t.past, pw, origin..origin + self.n_past);
        let mut future = Self::rows(&t.future, fw, fut.clone());
        if self.noise.iter().any(|&sd| sd > 0.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
            rng.set_stream(origin as u64);
            for (j, &sd) in self.noise.iter().enumerate() {
                if sd == 0.0 {
                    continue;
                }
                let name = &t.future_names[j];
                let (lo, hi) = t.scaler.interval(name).expect("validated at build");
                let mut col: Vec<f64> = fut.clone().map(|r| t.future_raw[r * fw + j]).collect();
                add_forecast_noise(&mut col, &mut rng, sd, (lo, hi));
                for (k, v) in col.into_iter().enumerate() {
                    future[k * fw + j] = scale_with(v, lo, hi).value;
                }
            }
        }
        let target = Self::rows(&t.target, 5, fut.clone());
        WindowedSample {
            past: Tensor::new(&[self.n_past, pw], past).expect("window shape"),
            future: Tensor::new(&[self.n_future, fw], future).expect("window shape"),
            target: Tensor::new(&[self.n_future, 5], target).expect("window shape"),
            origin,
            forecast_start: t.timestamps[fut.start],
        }
    }
}

#[derive(Clone, Debug)]
pub struct DatasetSplits {
    pub train: Windows,
    pub validation: Windows,
    pub test: Windows,
    /// Row ranges of the three chronological segments.
    pub ranges: [Range<usize>; 3],
}

pub fn split_boundaries(n_rows: usize, fractions: [f64; 3]) -> [Range<usize>; 3] {
    let cut = |f: f64| ((f * n_rows as f64) + 1e-9).floor() as usize;
    let b1 = cut(fractions[0]).min(n_rows);
    let b2 = cut(fractions[0] + fractions[1]).clamp(b1, n_rows);
    [0..b1, b1..b2, b2..n_rows]
}

/// Contiguous train, validation, test segments; windows crossing a
/// boundary belong to no split.
pub fn split_chronological(windows: &Windows, fractions: [f64; 3]) -> Result<DatasetSplits> {
    let ranges = split_boundaries(windows.table.len(), fractions);
    let parts: Vec<Windows> = ranges.iter().map(|r| windows.restrict(r.clone())).collect();
    for (name, p) in ["train", "validation", "test"].iter().zip(&parts) {
        if p.is_empty() {
            return Err(Error::config(format!(
                "{name} split has no complete window; it needs at least {} rows",
                windows.n_past + windows.n_future
            )));
        }
    }
    let mut it = parts.into_iter();
    Ok(DatasetSplits {
        train: it.next().expect("three parts"),
        validation: it.next().expect("three parts"),
        test: it.next().expect("three parts"),
        ranges,
    })
}

/// Full pipeline from a dataset to the three splits.
pub fn prepare(
    dataset: &SimulatedDataset,
    scaler: &ScalerSpec,
    n_past: usize,
    n_future: usize,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<DatasetSplits> {
    let table = Arc::new(FeatureTable::from_dataset(dataset, scaler)?);
    let windows = build_windows(table, n_past, n_future, cfg, seed)?;
    split_chronological(&windows, cfg.split_fractions)
}

/// Writes `origin_row,forecast_start,split` for every window of every split.
pub fn write_manifest(splits: &DatasetSplits, path: &Path) -> Result<()> {
    let io = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["origin_row", "forecast_start", "split"]).map_err(io)?;
    for (label, part) in [("train", &splits.train), ("validation", &splits.validation), ("test", &splits.test)] {
        for &o in part.origins() {
            let ts = part.table.timestamps[o + part.n_past].format(crate::building_sim::weather::TIMESTAMP_FORMAT);
            w.write_record([o.to_string(), ts.to_string(), label.to_string()]).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
