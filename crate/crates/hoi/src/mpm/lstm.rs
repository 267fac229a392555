//! Single-direction LSTM cell: forward pass with cached activations and the
//! matching backpropagation-through-time step.
//!
//! A bidirectional layer runs this cell twice, feeding the backward pass the
//! time-reversed sequence; traces are therefore always indexed in processing
//! order.

// Gate-block math addresses several parallel slices by row index.
#![allow(clippy::needless_range_loop)]

/// Borrowed parameter views for one cell.
///
/// Gate blocks are packed `[i | f | g | o]`, each `hidden` wide:
/// `w_ih` is `(4*hidden, input)`, `w_hh` is `(4*hidden, hidden)`,
/// `bias` is `4*hidden`.
pub(crate) struct CellParams<'a> {
    pub w_ih: &'a [f64],
    pub w_hh: &'a [f64],
    pub bias: &'a [f64],
    pub input: usize,
    pub hidden: usize,
}

/// Per-step activations cached for the backward pass, in processing order.
pub(crate) struct CellTrace {
    pub i: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub o: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub tanh_c: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

impl CellTrace {
    pub fn steps(&self) -> usize {
        self.h.len()
    }

    /// Hidden state after the final processing step (zeros for an empty run).
    pub fn terminal_h(&self, hidden: usize) -> Vec<f64> {
        self.h.last().cloned().unwrap_or_else(|| vec![0.0; hidden])
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Run the cell over `xs` (already in processing order), starting from zero
/// hidden and cell state.
pub(crate) fn run_cell(p: &CellParams, xs: &[Vec<f64>]) -> CellTrace {
    let h_size = p.hidden;
    let gates = 4 * h_size;
    let steps = xs.len();
    let mut trace = CellTrace {
        i: Vec::with_capacity(steps),
        f: Vec::with_capacity(steps),
        g: Vec::with_capacity(steps),
        o: Vec::with_capacity(steps),
        c: Vec::with_capacity(steps),
        tanh_c: Vec::with_capacity(steps),
        h: Vec::with_capacity(steps),
    };
    let mut h_prev = vec![0.0; h_size];
    let mut c_prev = vec![0.0; h_size];
    let mut z = vec![0.0; gates];

    for x in xs {
        debug_assert_eq!(x.len(), p.input);
        for gi in 0..gates {
            let mut acc = p.bias[gi];
            let row = &p.w_ih[gi * p.input..(gi + 1) * p.input];
            for (w, xv) in row.iter().zip(x.iter()) {
                acc += w * xv;
            }
            let row = &p.w_hh[gi * h_size..(gi + 1) * h_size];
            for (w, hv) in row.iter().zip(h_prev.iter()) {
                acc += w * hv;
            }
            z[gi] = acc;
        }
        let mut i_g = vec![0.0; h_size];
        let mut f_g = vec![0.0; h_size];
        let mut g_g = vec![0.0; h_size];
        let mut o_g = vec![0.0; h_size];
        let mut c_new = vec![0.0; h_size];
        let mut tc = vec![0.0; h_size];
        let mut h_new = vec![0.0; h_size];
        for k in 0..h_size {
            i_g[k] = sigmoid(z[k]);
            f_g[k] = sigmoid(z[h_size + k]);
            g_g[k] = z[2 * h_size + k].tanh();
            o_g[k] = sigmoid(z[3 * h_size + k]);
            c_new[k] = f_g[k] * c_prev[k] + i_g[k] * g_g[k];
            tc[k] = c_new[k].tanh();
            h_new[k] = o_g[k] * tc[k];
        }
        h_prev.clone_from(&h_new);
        c_prev.clone_from(&c_new);
        trace.i.push(i_g);
        trace.f.push(f_g);
        trace.g.push(g_g);
        trace.o.push(o_g);
        trace.c.push(c_new);
        trace.tanh_c.push(tc);
        trace.h.push(h_new);
    }
    trace
}

/// Gradients produced by one cell's BPTT.
pub(crate) struct CellGrads {
    pub w_ih: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub bias: Vec<f64>,
    /// Gradient w.r.t. each input step, in processing order.
    pub x: Vec<Vec<f64>>,
}

/// Backpropagate through the cached run. `d_h` carries the incoming hidden
/// gradient per processing step (terminal-summary gradients must already be
/// added to the final step).
pub(crate) fn backprop_cell(
    p: &CellParams,
    xs: &[Vec<f64>],
    trace: &CellTrace,
    d_h: &[Vec<f64>],
) -> CellGrads {
    let h_size = p.hidden;
    let gates = 4 * h_size;
    let steps = trace.steps();
    debug_assert_eq!(d_h.len(), steps);

    let mut grads = CellGrads {
        w_ih: vec![0.0; gates * p.input],
        w_hh: vec![0.0; gates * h_size],
        bias: vec![0.0; gates],
        x: vec![Vec::new(); steps],
    };
    let zeros = vec![0.0; h_size];
    let mut dh_next = vec![0.0; h_size];
    let mut dc_next = vec![0.0; h_size];
    let mut dz = vec![0.0; gates];

    for s in (0..steps).rev() {
        let i_g = &trace.i[s];
        let f_g = &trace.f[s];
        let g_g = &trace.g[s];
        let o_g = &trace.o[s];
        let tc = &trace.tanh_c[s];
        let c_prev = if s > 0 { &trace.c[s - 1] } else { &zeros };
        let h_prev = if s > 0 { &trace.h[s - 1] } else { &zeros };

        for k in 0..h_size {
            let dh = d_h[s][k] + dh_next[k];
            let dc = dh * o_g[k] * (1.0 - tc[k] * tc[k]) + dc_next[k];
            dz[k] = dc * g_g[k] * i_g[k] * (1.0 - i_g[k]);
            dz[h_size + k] = dc * c_prev[k] * f_g[k] * (1.0 - f_g[k]);
            dz[2 * h_size + k] = dc * i_g[k] * (1.0 - g_g[k] * g_g[k]);
            dz[3 * h_size + k] = dh * tc[k] * o_g[k] * (1.0 - o_g[k]);
            dc_next[k] = dc * f_g[k];
        }

        let x = &xs[s];
        for gi in 0..gates {
            let d = dz[gi];
            grads.bias[gi] += d;
            let row = &mut grads.w_ih[gi * p.input..(gi + 1) * p.input];
            for (slot, xv) in row.iter_mut().zip(x.iter()) {
                *slot += d * xv;
            }
            let row = &mut grads.w_hh[gi * h_size..(gi + 1) * h_size];
            for (slot, hv) in row.iter_mut().zip(h_prev.iter()) {
                *slot += d * hv;
            }
        }

        let mut dx = vec![0.0; p.input];
        let mut dh_new = vec![0.0; h_size];
        for gi in 0..gates {
            let d = dz[gi];
            let row = &p.w_ih[gi * p.input..(gi + 1) * p.input];
            for (slot, w) in dx.iter_mut().zip(row.iter()) {
                *slot += d * w;
            }
            let row = &p.w_hh[gi * h_size..(gi + 1) * h_size];
            for (slot, w) in dh_new.iter_mut().zip(row.iter()) {
                *slot += d * w;
            }
        }
        grads.x[s] = dx;
        dh_next = dh_new;
    }
    grads
}
