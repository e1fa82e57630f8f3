//! Neural building blocks: dense maps, LSTM and biLSTM, multi-head
//! attention, gated linear units, gated residual networks, layer
//! normalization and dropout.
//!
//! Each layer owns [`ParamId`]s into a shared [`ParamSet`] and records its
//! forward pass on a [`Graph`], so every layer is differentiable by
//! construction.

mod attention;
mod gating;
mod lstm;

pub use attention::{AttentionOutput, MultiHeadAttention};
pub use gating::{Glu, Grn, LayerNorm, LAYER_NORM_EPS};
pub use lstm::{lstm_cell_step, BiLstm, LstmState, LstmWeights};

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Graph, ParamId, ParamSet, Tensor, Var};

/// Tensor with entries uniform in `[-limit, limit]`.
pub(crate) fn uniform(rng: &mut impl Rng, shape: &[usize], limit: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::new(shape, data).expect("shape and data agree")
}

/// Affine map `x W + b` applied to every row.
#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    pub fn new(ps: &mut ParamSet, name: &str, in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        let limit = 1.0 / (in_dim as f64).sqrt();
        let weight = ps.add(format!("{name}.weight"), uniform(rng, &[in_dim, out_dim], limit))?;
        let bias = ps.add(format!("{name}.bias"), Tensor::zeros(&[out_dim]))?;
        Ok(Self { weight, bias, in_dim, out_dim })
    }

    pub fn param_count(in_dim: usize, out_dim: usize) -> usize {
        in_dim * out_dim + out_dim
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let (w, b) = (g.param(self.weight), g.param(self.bias));
        let y = g.matmul(x, w)?;
        Ok(g.add_row_bias(y, b)?)
    }
}

/// Inverted dropout: in training mode each element is zeroed with
/// probability `rate` and survivors are scaled by `1 / (1 - rate)`.
/// Outside training, or at rate 0, the input node is returned unchanged.
pub fn dropout_apply(g: &mut Graph, x: Var, rate: f64, training: bool, rng: &mut impl Rng) -> Result<Var> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!("dropout rate {rate} must lie in [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let shape = g.value(x).shape().to_vec();
    let keep = 1.0 / (1.0 - rate);
    let n = g.value(x).len();
    let mask: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect();
    Ok(g.mask_mul(x, Tensor::new(&shape, mask)?)?)
}
