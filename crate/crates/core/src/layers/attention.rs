use rand::Rng;

use super::Dense;
use crate::error::{Error, Result};
use crate::numerics::{Graph, NumericsError, ParamSet, Var};

/// Multi-head scaled dot-product attention with learned Q/K/V/output maps.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub query: Dense,
    pub key: Dense,
    pub value: Dense,
    pub output: Dense,
    pub heads: usize,
    pub d_model: usize,
}

pub struct AttentionOutput {
    /// `Tq x d_model`
    pub output: Var,
    /// One `Tq x Tk` row-stochastic matrix per head.
    pub weights: Vec<Var>,
}

impl MultiHeadAttention {
    pub fn new(ps: &mut ParamSet, name: &str, d_model: usize, heads: usize, rng: &mut impl Rng) -> Result<Self> {
        if heads == 0 || !d_model.is_multiple_of(heads) {
            return Err(Error::config(format!("d_model {d_model} is not divisible by {heads} attention heads")));
        }
        Ok(Self {
            query: Dense::new(ps, &format!("{name}.query"), d_model, d_model, rng)?,
            key: Dense::new(ps, &format!("{name}.key"), d_model, d_model, rng)?,
            value: Dense::new(ps, &format!("{name}.value"), d_model, d_model, rng)?,
            output: Dense::new(ps, &format!("{name}.output"), d_model, d_model, rng)?,
            heads,
            d_model,
        })
    }

    pub fn param_count(d_model: usize) -> usize {
        4 * Dense::param_count(d_model, d_model)
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    /// Self-attention is `forward(g, x, x)`.
    pub fn forward(&self, g: &mut Graph, q_seq: Var, kv_seq: Var) -> Result<AttentionOutput> {
        for (what, v) in [("query", q_seq), ("key/value", kv_seq)] {
            let (_, d) = g.value(v).dims2()?;
            if d != self.d_model {
                return Err(Error::Numerics(NumericsError::Shape(format!(
                    "{what} sequence width {d}, attention expects {}",
                    self.d_model
                ))));
            }
        }
        let q = self.query.forward(g, q_seq)?;
        let k = self.key.forward(g, kv_seq)?;
        let v = self.value.forward(g, kv_seq)?;
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut heads = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (lo, hi) = (h * dh, (h + 1) * dh);
            let qh = g.slice_cols(q, lo, hi)?;
            let kh = g.slice_cols(k, lo, hi)?;
            let vh = g.slice_cols(v, lo, hi)?;
            let kt = g.transpose(kh)?;
            let scores = g.matmul(qh, kt)?;
            let scores = g.scale(scores, scale);
            let attn = g.softmax(scores);
            heads.push(g.matmul(attn, vh)?);
            weights.push(attn);
        }
        let joined = if heads.len() == 1 { heads[0] } else { g.concat_cols(&heads)? };
        let output = self.output.forward(g, joined)?;
        Ok(AttentionOutput { output, weights })
    }
}
