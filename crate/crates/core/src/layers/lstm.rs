use rand::Rng;

use super::uniform;
use crate::error::{Error, Result};
use crate::numerics::{Graph, NumericsError, ParamId, ParamSet, Tensor, Var};

/// Recurrent state of one LSTM direction, both `1 x units`.
#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmState {
    pub fn zeros(g: &mut Graph, units: usize) -> Self {
        Self { h: g.input(Tensor::zeros(&[1, units])), c: g.input(Tensor::zeros(&[1, units])) }
    }
}

/// Weights of one LSTM direction. Gate blocks are ordered input, forget,
/// candidate, output along the `4 * units` axis.
#[derive(Clone, Debug)]
pub struct LstmWeights {
    pub input_kernel: ParamId,
    pub recurrent_kernel: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub units: usize,
}

impl LstmWeights {
    /// Forget-gate bias starts at 1, everything else uniform in `±1/sqrt(units)`.
    pub fn new(ps: &mut ParamSet, name: &str, input_dim: usize, units: usize, rng: &mut impl Rng) -> Result<Self> {
        let limit = 1.0 / (units as f64).sqrt();
        let input_kernel = ps.add(format!("{name}.input_kernel"), uniform(rng, &[input_dim, 4 * units], limit))?;
        let recurrent_kernel =
            ps.add(format!("{name}.recurrent_kernel"), uniform(rng, &[units, 4 * units], limit))?;
        let mut b = vec![0.0; 4 * units];
        b[units..2 * units].fill(1.0);
        let bias = ps.add(format!("{name}.bias"), Tensor::new(&[4 * units], b)?)?;
        Ok(Self { input_kernel, recurrent_kernel, bias, input_dim, units })
    }

    pub fn param_count(input_dim: usize, units: usize) -> usize {
        4 * units * (input_dim + units + 1)
    }

    /// Runs the recurrence over `seq` (`T x input_dim`), returning the
    /// hidden state at every step in time order (`T x units`).
    fn run(&self, g: &mut Graph, seq: Var, reverse: bool) -> Result<Var> {
        let (t_len, _) = g.value(seq).dims2()?;
        let (wi, wh, b) = (g.param(self.input_kernel), g.param(self.recurrent_kernel), g.param(self.bias));
        let xw = g.matmul(seq, wi)?;
        let xw = g.add_row_bias(xw, b)?;
        let mut state = LstmState::zeros(g, self.units);
        let mut outputs = vec![state.h; t_len];
        let order: Box<dyn Iterator<Item = usize>> =
            if reverse { Box::new((0..t_len).rev()) } else { Box::new(0..t_len) };
        for t in order {
            let x_t = g.slice_rows(xw, t, t + 1)?;
            let rec = g.matmul(state.h, wh)?;
            let gates = g.add(x_t, rec)?;
            state = self.cell(g, gates, state.c)?;
            outputs[t] = state.h;
        }
        Ok(g.concat_rows(&outputs)?)
    }

    fn cell(&self, g: &mut Graph, gates: Var, c: Var) -> Result<LstmState> {
        let hc = g.lstm_gates(gates, c)?;
        let u = self.units;
        Ok(LstmState { h: g.slice_cols(hc, 0, u)?, c: g.slice_cols(hc, u, 2 * u)? })
    }
}

/// One LSTM step on a `1 x input_dim` row:
/// `c' = f * c + i * g`, `h' = o * tanh(c')`.
pub fn lstm_cell_step(g: &mut Graph, x: Var, state: LstmState, w: &LstmWeights) -> Result<LstmState> {
    let xs = g.value(x).shape().to_vec();
    if xs != [1, w.input_dim] {
        return Err(Error::Numerics(NumericsError::Shape(format!(
            "lstm input {xs:?}, expected [1, {}]",
            w.input_dim
        ))));
    }
    let (wi, wh, b) = (g.param(w.input_kernel), g.param(w.recurrent_kernel), g.param(w.bias));
    let xw = g.matmul(x, wi)?;
    let rec = g.matmul(state.h, wh)?;
    let gates = g.add(xw, rec)?;
    let gates = g.add_row_bias(gates, b)?;
    w.cell(g, gates, state.c)
}

/// Bidirectional LSTM; output row `t` is `[forward_h(t) | backward_h(t)]`.
#[derive(Clone, Debug)]
pub struct BiLstm {
    pub forward: LstmWeights,
    pub backward: LstmWeights,
}

impl BiLstm {
    pub fn new(ps: &mut ParamSet, name: &str, input_dim: usize, units: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            forward: LstmWeights::new(ps, &format!("{name}.fwd"), input_dim, units, rng)?,
            backward: LstmWeights::new(ps, &format!("{name}.bwd"), input_dim, units, rng)?,
        })
    }

    /// Both directions read the same weights.
    pub fn shared(weights: LstmWeights) -> Self {
        Self { forward: weights.clone(), backward: weights }
    }

    pub fn units(&self) -> usize {
        self.forward.units
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward.units
    }

    pub fn param_count(input_dim: usize, units: usize) -> usize {
        2 * LstmWeights::param_count(input_dim, units)
    }

    pub fn forward(&self, g: &mut Graph, seq: Var) -> Result<Var> {
        let shape = g.value(seq).shape().to_vec();
        if shape.len() != 2 || shape[0] == 0 {
            return Err(Error::Numerics(NumericsError::Contract(format!(
                "biLSTM needs a non-empty T x features sequence, got {shape:?}"
            ))));
        }
        if shape[1] != self.forward.input_dim {
            return Err(Error::Numerics(NumericsError::Shape(format!(
                "biLSTM input width {} but weights expect {}",
                shape[1], self.forward.input_dim
            ))));
        }
        let fwd = self.forward.run(g, seq, false)?;
        let bwd = self.backward.run(g, seq, true)?;
        Ok(g.concat_cols(&[fwd, bwd])?)
    }
}
