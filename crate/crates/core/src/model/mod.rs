//! Encoder-decoder forecaster: self-attention and biLSTM blocks over the
//! past and the known future, cross-attention between them, an output
//! biLSTM and a dense quantile head.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{dropout_apply, BiLstm, Dense, Grn, MultiHeadAttention};
use crate::numerics::{Graph, NumericsError, ParamSet, Tensor, Var};
use crate::pipeline::{future_features, past_features, target_features, ScalerSpec};

pub const DEFAULT_QUANTILES: [f64; 7] = [0.005, 0.025, 0.05, 0.5, 0.95, 0.975, 0.995];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub n_past: usize,
    pub n_future: usize,
    pub past_feature_count: usize,
    pub future_feature_count: usize,
    pub zone_count: usize,
    pub rnn_units: usize,
    pub mha_heads: usize,
    pub d_model: usize,
    pub dropout_rate: f64,
    pub quantile_levels: Vec<f64>,
    pub rng_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl ModelConfig {
    pub fn full() -> Self {
        Self {
            n_past: 672,
            n_future: 96,
            past_feature_count: past_features().len(),
            future_feature_count: future_features().len(),
            zone_count: target_features().len(),
            rnn_units: 200,
            mha_heads: 4,
            d_model: 400,
            dropout_rate: 0.3,
            quantile_levels: DEFAULT_QUANTILES.to_vec(),
            rng_seed: 0,
        }
    }

    pub fn tiny() -> Self {
        Self { n_past: 48, n_future: 12, rnn_units: 16, mha_heads: 2, d_model: 32, ..Self::full() }
    }

    pub fn quantile_count(&self) -> usize {
        self.quantile_levels.len()
    }

    pub fn median_index(&self) -> Option<usize> {
        self.quantile_levels.iter().position(|&q| q == 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_past", self.n_past),
            ("n_future", self.n_future),
            ("past_feature_count", self.past_feature_count),
            ("future_feature_count", self.future_feature_count),
            ("zone_count", self.zone_count),
            ("rnn_units", self.rnn_units),
            ("mha_heads", self.mha_heads),
            ("d_model", self.d_model),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("model.{name} must be at least 1")));
            }
        }
        if !self.d_model.is_multiple_of(self.mha_heads) {
            return Err(Error::config(format!(
                "model.d_model ({}) must be divisible by model.mha_heads ({})",
                self.d_model, self.mha_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(format!("model.dropout_rate must lie in [0, 1), got {}", self.dropout_rate)));
        }
        let q = &self.quantile_levels;
        if q.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
            return Err(Error::config(format!("model.quantile_levels must lie in (0, 1), got {q:?}")));
        }
        if q.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(format!("model.quantile_levels must be strictly ascending, got {q:?}")));
        }
        if self.median_index().is_none() {
            return Err(Error::config("model.quantile_levels must contain 0.5"));
        }
        Ok(())
    }
}

/// Self-attention then biLSTM, each wrapped in a gated residual.
#[derive(Clone, Debug)]
struct Branch {
    attention: MultiHeadAttention,
    attention_grn: Grn,
    lstm: BiLstm,
    adapter: Option<Dense>,
    lstm_grn: Grn,
}

fn adapter(ps: &mut ParamSet, name: &str, from: usize, to: usize, rng: &mut impl Rng) -> Result<Option<Dense>> {
    if from == to {
        Ok(None)
    } else {
        Dense::new(ps, name, from, to, rng).map(Some)
    }
}

impl Branch {
    fn new(ps: &mut ParamSet, name: &str, cfg: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        let d = cfg.d_model;
        Ok(Self {
            attention: MultiHeadAttention::new(ps, &format!("{name}.attention"), d, cfg.mha_heads, rng)?,
            attention_grn: Grn::new(ps, &format!("{name}.attention_grn"), d, rng)?,
            lstm: BiLstm::new(ps, &format!("{name}.bilstm"), d, cfg.rnn_units, rng)?,
            adapter: adapter(ps, &format!("{name}.adapter"), 2 * cfg.rnn_units, d, rng)?,
            lstm_grn: Grn::new(ps, &format!("{name}.bilstm_grn"), d, rng)?,
        })
    }

    fn forward(&self, g: &mut Graph, x: Var, cfg: &ModelConfig, training: bool, rng: &mut impl Rng) -> Result<Var> {
        let a = self.attention.forward(g, x, x)?.output;
        let a = dropout_apply(g, a, cfg.dropout_rate, training, rng)?;
        let e1 = self.attention_grn.gated_residual(g, x, a)?;
        let mut l = self.lstm.forward(g, e1)?;
        if let Some(ad) = &self.adapter {
            l = ad.forward(g, l)?;
        }
        let l = dropout_apply(g, l, cfg.dropout_rate, training, rng)?;
        self.lstm_grn.gated_residual(g, e1, l)
    }
}

#[derive(Clone, Debug)]
struct Architecture {
    past_projection: Dense,
    future_projection: Dense,
    encoder: Branch,
    decoder: Branch,
    cross_attention: MultiHeadAttention,
    cross_grn: Grn,
    output_lstm: BiLstm,
    output_adapter: Option<Dense>,
    output_grn: Grn,
    head: Dense,
}

impl Architecture {
    fn new(ps: &mut ParamSet, cfg: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        let d = cfg.d_model;
        Ok(Self {
            past_projection: Dense::new(ps, "past_projection", cfg.past_feature_count, d, rng)?,
            future_projection: Dense::new(ps, "future_projection", cfg.future_feature_count, d, rng)?,
            encoder: Branch::new(ps, "encoder", cfg, rng)?,
            decoder: Branch::new(ps, "decoder", cfg, rng)?,
            cross_attention: MultiHeadAttention::new(ps, "cross_attention", d, cfg.mha_heads, rng)?,
            cross_grn: Grn::new(ps, "cross_grn", d, rng)?,
            output_lstm: BiLstm::new(ps, "output_bilstm", d, cfg.rnn_units, rng)?,
            output_adapter: adapter(ps, "output_adapter", 2 * cfg.rnn_units, d, rng)?,
            output_grn: Grn::new(ps, "output_grn", d, rng)?,
            head: Dense::new(ps, "quantile_head", d, cfg.zone_count * cfg.quantile_count(), rng)?,
        })
    }
}

pub struct ForwardOutput {
    /// `n_future x zone_count x Q`, scaled units.
    pub prediction: Var,
    /// One `n_future x n_past` matrix per head.
    pub cross_attention: Vec<Var>,
}

/// Configuration, parameters and the layer wiring that reads them.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
    arch: Architecture,
}

pub fn build_model(cfg: &ModelConfig) -> Result<Model> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut params = ParamSet::new();
    let arch = Architecture::new(&mut params, cfg, &mut rng)?;
    Ok(Model { config: cfg.clone(), params, arch })
}

fn stage_shape(stage: &str, got: &[usize], want: &[usize]) -> Result<()> {
    if got != want {
        return Err(Error::Numerics(NumericsError::Shape(format!("{stage}: expected {want:?}, got {got:?}"))));
    }
    Ok(())
}

impl Model {
    /// Rebuilds the wiring for `config` and adopts `params`, which must
    /// match it name for name and shape for shape.
    pub fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self> {
        let template = build_model(&config)?;
        if template.params.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                template.params.len(),
                params.len()
            )));
        }
        for (a, b) in template.params.iter().zip(params.iter()) {
            if a.name != b.name || a.value.shape() != b.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter mismatch: expected {} {:?}, found {} {:?}",
                    a.name,
                    a.value.shape(),
                    b.name,
                    b.value.shape()
                )));
            }
        }
        Ok(Self { config, params, arch: template.arch })
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        past: &Tensor,
        future: &Tensor,
        training: bool,
        rng: &mut impl Rng,
    ) -> Result<ForwardOutput> {
        let cfg = &self.config;
        let a = &self.arch;
        stage_shape("past input", past.shape(), &[cfg.n_past, cfg.past_feature_count])?;
        stage_shape("future input", future.shape(), &[cfg.n_future, cfg.future_feature_count])?;
        let p = g.input(past.clone());
        let f = g.input(future.clone());
        let p = a.past_projection.forward(g, p)?;
        let f = a.future_projection.forward(g, f)?;
        let enc = a.encoder.forward(g, p, cfg, training, rng)?;
        let dec = a.decoder.forward(g, f, cfg, training, rng)?;
        let cross = a.cross_attention.forward(g, dec, enc)?;
        let c = dropout_apply(g, cross.output, cfg.dropout_rate, training, rng)?;
        let c = a.cross_grn.gated_residual(g, dec, c)?;
        let mut o = a.output_lstm.forward(g, c)?;
        if let Some(ad) = &a.output_adapter {
            o = ad.forward(g, o)?;
        }
        let o = dropout_apply(g, o, cfg.dropout_rate, training, rng)?;
        let o = a.output_grn.gated_residual(g, c, o)?;
        let head = a.head.forward(g, o)?;
        stage_shape("quantile head", g.value(head).shape(), &[cfg.n_future, cfg.zone_count * cfg.quantile_count()])?;
        let prediction = g.reshape(head, &[cfg.n_future, cfg.zone_count, cfg.quantile_count()])?;
        Ok(ForwardOutput { prediction, cross_attention: cross.weights })
    }

    /// Mean pinball loss of one sample; `target` is `n_future x zone_count`.
    pub fn loss(
        &self,
        g: &mut Graph,
        past: &Tensor,
        future: &Tensor,
        target: &Tensor,
        training: bool,
        rng: &mut impl Rng,
    ) -> Result<Var> {
        stage_shape("target", target.shape(), &[self.config.n_future, self.config.zone_count])?;
        let out = self.forward(g, past, future, training, rng)?;
        Ok(g.pinball(out.prediction, target, &self.config.quantile_levels)?)
    }

    /// Inference in scaled units with dropout off.
    pub fn predict_scaled(&self, past: &Tensor, future: &Tensor) -> Result<Tensor> {
        let mut g = Graph::with_params(&self.params);
        // Dropout is disabled, so the generator is never drawn from.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = self.forward(&mut g, past, future, false, &mut rng)?;
        Ok(g.value(out.prediction).clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantileForecast {
    /// `n_future x zone_count x Q` in °C.
    pub values: Tensor,
    pub levels: Vec<f64>,
    /// Inputs that fell outside their scaling interval and were clamped.
    pub clamped_inputs: usize,
}

impl QuantileForecast {
    pub fn at(&self, step: usize, zone: usize, level: usize) -> f64 {
        let s = self.values.shape();
        self.values.data()[(step * s[1] + zone) * s[2] + level]
    }
}

fn scale_block(raw: &Tensor, names: &[String], scaler: &ScalerSpec) -> Result<(Tensor, usize)> {
    let (rows, cols) = raw.dims2()?;
    if cols != names.len() {
        return Err(Error::config(format!("expected {} input columns, got {cols}", names.len())));
    }
    let mut clamped = 0;
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for (c, name) in names.iter().enumerate() {
            let s = scaler.scale(name, raw.at2(r, c))?;
            clamped += s.clamped as usize;
            out.push(s.value);
        }
    }
    Ok((Tensor::new(&[rows, cols], out)?, clamped))
}

/// Forecast in °C from inputs in physical units laid out as
/// [`past_features`] and [`future_features`].
pub fn predict(model: &Model, raw_past: &Tensor, raw_future: &Tensor, scaler: &ScalerSpec) -> Result<QuantileForecast> {
    let (past, c1) = scale_block(raw_past, &past_features(), scaler)?;
    let (future, c2) = scale_block(raw_future, &future_features(), scaler)?;
    let scaled = model.predict_scaled(&past, &future)?;
    Ok(QuantileForecast {
        values: to_celsius(&scaled, scaler)?,
        levels: model.config.quantile_levels.clone(),
        clamped_inputs: c1 + c2,
    })
}

/// Inverse-scales an `n_future x zones x Q` block zone by zone.
pub fn to_celsius(scaled: &Tensor, scaler: &ScalerSpec) -> Result<Tensor> {
    let s = scaled.shape();
    if s.len() != 3 {
        return Err(Error::Numerics(NumericsError::Shape(format!("expected a 3-D forecast, got {s:?}"))));
    }
    let names = target_features();
    let mut out = scaled.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let zone = (i / s[2]) % s[1];
        let name = names.get(zone).ok_or_else(|| Error::config(format!("no target interval for zone {}", zone + 1)))?;
        *v = scaler.inverse_scale(name, *v)?;
    }
    Ok(out)
}
