use super::{Graph, NodeId, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::rng::Pcg64;

/// Stacked gate weights in the order input, forget, candidate, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl LstmParams {
    /// Registers `{prefix}.w_x`, `{prefix}.w_h` and `{prefix}.b`, each drawn
    /// from U[-1/sqrt(fan_in), 1/sqrt(fan_in)] with fan_in = input + hidden.
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut Pcg64,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::dim("lstm_cell", "dimensions must be positive"));
        }
        let bound = 1.0 / ((input_dim + hidden_dim) as f64).sqrt();
        let g = 4 * hidden_dim;
        Ok(LstmParams {
            w_x: store.add_uniform(format!("{prefix}.w_x"), &[g, input_dim], bound, rng)?,
            w_h: store.add_uniform(format!("{prefix}.w_h"), &[g, hidden_dim], bound, rng)?,
            b: store.add_uniform(format!("{prefix}.b"), &[g], bound, rng)?,
            input_dim,
            hidden_dim,
        })
    }
}

/// One LSTM step; returns `(h, c)`.
pub fn lstm_cell(
    g: &mut Graph<'_>,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
    p: &LstmParams,
) -> Result<(NodeId, NodeId)> {
    let hd = p.hidden_dim;
    for (what, node, want) in [("x", x, p.input_dim), ("h", h_prev, hd), ("c", c_prev, hd)] {
        let shape = g.value(node).shape();
        if shape != [want] {
            return Err(Error::dim(
                "lstm_cell",
                format!("{what} has shape {shape:?}, expected [{want}]"),
            ));
        }
    }
    let (wx, wh, b) = (g.param(p.w_x), g.param(p.w_h), g.param(p.b));
    let zx = g.matmul(wx, x)?;
    let zh = g.matmul(wh, h_prev)?;
    let z = g.add(zx, zh)?;
    let z = g.add(z, b)?;
    let i = g.slice(z, 0, hd)?;
    let f = g.slice(z, hd, hd)?;
    let cand = g.slice(z, 2 * hd, hd)?;
    let o = g.slice(z, 3 * hd, hd)?;
    let i = g.sigmoid(i)?;
    let f = g.sigmoid(f)?;
    let cand = g.tanh(cand)?;
    let o = g.sigmoid(o)?;
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c)?;
    let h = g.mul(o, tc)?;
    Ok((h, c))
}
