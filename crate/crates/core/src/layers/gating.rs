use rand::Rng;

use super::Dense;
use crate::error::{Error, Result};
use crate::numerics::{Graph, NumericsError, ParamId, ParamSet, Tensor, Var};

pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Per-row normalization with learned gain and bias.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
    pub dim: usize,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(ps: &mut ParamSet, name: &str, dim: usize) -> Result<Self> {
        Ok(Self {
            gain: ps.add(format!("{name}.gain"), Tensor::ones(&[dim]))?,
            bias: ps.add(format!("{name}.bias"), Tensor::zeros(&[dim]))?,
            dim,
            eps: LAYER_NORM_EPS,
        })
    }

    pub fn param_count(dim: usize) -> usize {
        2 * dim
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        if self.eps <= 0.0 {
            return Err(Error::config("layer norm eps must be positive"));
        }
        let (gain, bias) = (g.param(self.gain), g.param(self.bias));
        Ok(g.layer_norm(x, gain, bias, self.eps)?)
    }
}

/// Gated linear unit: `(x A + a) * sigmoid(x B + b)`.
#[derive(Clone, Debug)]
pub struct Glu {
    pub value: Dense,
    pub gate: Dense,
}

impl Glu {
    pub fn new(ps: &mut ParamSet, name: &str, in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            value: Dense::new(ps, &format!("{name}.value"), in_dim, out_dim, rng)?,
            gate: Dense::new(ps, &format!("{name}.gate"), in_dim, out_dim, rng)?,
        })
    }

    pub fn param_count(in_dim: usize, out_dim: usize) -> usize {
        2 * Dense::param_count(in_dim, out_dim)
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let a = self.value.forward(g, x)?;
        let b = self.gate.forward(g, x)?;
        gate_pair(g, a, b)
    }
}

/// `a * sigmoid(b)` on an already-projected pair.
pub(crate) fn gate_pair(g: &mut Graph, a: Var, b: Var) -> Result<Var> {
    if g.value(a).shape() != g.value(b).shape() {
        return Err(Error::Numerics(NumericsError::Shape(format!(
            "GLU halves differ: {:?} vs {:?}",
            g.value(a).shape(),
            g.value(b).shape()
        ))));
    }
    let s = g.sigmoid(b);
    Ok(g.mul(a, s)?)
}

/// Gated residual network without a context input:
/// `LayerNorm(skip + GLU(W2 elu(W1 input + b1) + b2))`.
#[derive(Clone, Debug)]
pub struct Grn {
    pub hidden: Dense,
    pub project: Dense,
    pub glu: Glu,
    pub norm: LayerNorm,
    pub dim: usize,
}

impl Grn {
    pub fn new(ps: &mut ParamSet, name: &str, dim: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            hidden: Dense::new(ps, &format!("{name}.hidden"), dim, dim, rng)?,
            project: Dense::new(ps, &format!("{name}.project"), dim, dim, rng)?,
            glu: Glu::new(ps, &format!("{name}.glu"), dim, dim, rng)?,
            norm: LayerNorm::new(ps, &format!("{name}.norm"), dim)?,
            dim,
        })
    }

    pub fn param_count(dim: usize) -> usize {
        2 * Dense::param_count(dim, dim) + Glu::param_count(dim, dim) + LayerNorm::param_count(dim)
    }

    /// The input is its own residual.
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        self.gated_residual(g, x, x)
    }

    /// Transforms `input` and adds it, gated, to `skip`. Wrapping a sub-block
    /// `f` is `gated_residual(x, f(x))`.
    pub fn gated_residual(&self, g: &mut Graph, skip: Var, input: Var) -> Result<Var> {
        for v in [skip, input] {
            let d = g.value(v).last_dim();
            if d != self.dim {
                return Err(Error::Numerics(NumericsError::Shape(format!(
                    "GRN width {} got input of width {d}",
                    self.dim
                ))));
            }
        }
        let h = self.hidden.forward(g, input)?;
        let h = g.elu(h);
        let h = self.project.forward(g, h)?;
        let gated = self.glu.forward(g, h)?;
        let sum = g.add(skip, gated)?;
        self.norm.forward(g, sum)
    }
}
