use ndarray::{Array1, ArrayView1};

use super::params::{Gate, LstmLayerParams};
use super::LstmError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<F> {
    pub h: Array1<F>,
    pub c: Array1<F>,
}

impl<F: Scalar> LstmState<F> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: Array1::zeros(hidden),
            c: Array1::zeros(hidden),
        }
    }
}

/// Activated gate values of one step, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct GateActivations<F> {
    pub input: Array1<F>,
    pub forget: Array1<F>,
    pub cell: Array1<F>,
    pub output: Array1<F>,
}

/// One LSTM step for a single example:
///
/// ```text
/// i = σ(W_i x + U_i h + b_i)    f = σ(W_f x + U_f h + b_f)
/// g = tanh(W_g x + U_g h + b_g) o = σ(W_o x + U_o h + b_o)
/// c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')
/// ```
pub fn lstm_cell_forward<F: Scalar>(
    x: ArrayView1<'_, F>,
    prev: &LstmState<F>,
    p: &LstmLayerParams<F>,
) -> Result<LstmState<F>, LstmError> {
    lstm_cell_forward_traced(x, prev, p).map(|(state, _)| state)
}

pub fn lstm_cell_forward_traced<F: Scalar>(
    x: ArrayView1<'_, F>,
    prev: &LstmState<F>,
    p: &LstmLayerParams<F>,
) -> Result<(LstmState<F>, GateActivations<F>), LstmError> {
    let h = p.hidden();
    if x.len() != p.inputs() || prev.h.len() != h || prev.c.len() != h {
        return Err(LstmError::ShapeMismatch(format!(
            "cell expects x [{}] and state [{h}], got x [{}], h [{}], c [{}]",
            p.inputs(),
            x.len(),
            prev.h.len(),
            prev.c.len()
        )));
    }
    let pre = |g: Gate| -> Array1<F> {
        p.gate_input_weights(g).dot(&x) + p.gate_recurrent_weights(g).dot(&prev.h) + p.gate_bias(g)
    };
    let input = pre(Gate::Input).mapv(F::sigmoid);
    let forget = pre(Gate::Forget).mapv(F::sigmoid);
    let cell = pre(Gate::Cell).mapv(F::fast_tanh);
    let output = pre(Gate::Output).mapv(F::sigmoid);
    let c = &forget * &prev.c + &input * &cell;
    let hn = &output * &c.mapv(F::fast_tanh);
    Ok((
        LstmState { h: hn, c },
        GateActivations {
            input,
            forget,
            cell,
            output,
        },
    ))
}
