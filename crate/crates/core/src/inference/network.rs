//! Single-layer message passing over the unrolled causal graph.
//!
//! Every binary value `v` is lifted to the feature `[1 - v, v]`. For each
//! state `j`, with `s` the feature of `S_j` at lag 1:
//!
//! ```text
//! m_j     = sum over parents x of  Wm^T [s; x] + bm      (zero without parents)
//! h_j     = relu(Wu^T [s; m_j] + bu)
//! logit_j = Wr[j] . h_j + br[j]
//! p       = softmax(logit)
//! ```
//!
//! `Wm` and `Wu` are shared across states; the readout row and bias are per
//! state. Since features are two-valued, `m_j` only depends on `s`, the
//! number of parents and the number of active parents, so logit `j` is
//! bitwise independent of every window value outside its parents and `S_j`.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::Window;
use crate::error::{Error, Result};
use crate::inference::unroll::UnrolledGraph;
use crate::rng::Rng;

/// Width of the lifted feature of one binary value.
pub const FEATURE_DIM: usize = 2;

/// Parameters of one predictor (one history length).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// `2 * FEATURE_DIM x hidden`
    pub message_w: Array2<f64>,
    pub message_b: Array1<f64>,
    /// `(FEATURE_DIM + hidden) x hidden`
    pub update_w: Array2<f64>,
    pub update_b: Array1<f64>,
    /// `n_states x hidden`
    pub readout_w: Array2<f64>,
    pub readout_b: Array1<f64>,
}

impl LayerParams {
    pub fn zeros(n_states: usize, hidden: usize) -> Self {
        LayerParams {
            message_w: Array2::zeros((2 * FEATURE_DIM, hidden)),
            message_b: Array1::zeros(hidden),
            update_w: Array2::zeros((FEATURE_DIM + hidden, hidden)),
            update_b: Array1::zeros(hidden),
            readout_w: Array2::zeros((n_states, hidden)),
            readout_b: Array1::zeros(n_states),
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init(n_states: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(n_states, hidden);
        let mut fill = |a: &mut Array2<f64>| {
            let bound = 1.0 / (a.nrows() as f64).sqrt();
            a.mapv_inplace(|_| rng.random_range(-bound..bound));
        };
        fill(&mut p.message_w);
        fill(&mut p.update_w);
        let bound = 1.0 / (hidden as f64).sqrt();
        p.readout_w.mapv_inplace(|_| rng.random_range(-bound..bound));
        p
    }

    pub fn hidden(&self) -> usize {
        self.message_b.len()
    }

    pub fn n_states(&self) -> usize {
        self.readout_b.len()
    }

    pub fn same_shape(&self, other: &LayerParams) -> bool {
        self.message_w.dim() == other.message_w.dim()
            && self.update_w.dim() == other.update_w.dim()
            && self.readout_w.dim() == other.readout_w.dim()
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            self.message_w.as_slice().expect("standard layout"),
            self.message_b.as_slice().expect("standard layout"),
            self.update_w.as_slice().expect("standard layout"),
            self.update_b.as_slice().expect("standard layout"),
            self.readout_w.as_slice().expect("standard layout"),
            self.readout_b.as_slice().expect("standard layout"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.message_w.as_slice_mut().expect("standard layout"),
            self.message_b.as_slice_mut().expect("standard layout"),
            self.update_w.as_slice_mut().expect("standard layout"),
            self.update_b.as_slice_mut().expect("standard layout"),
            self.readout_w.as_slice_mut().expect("standard layout"),
            self.readout_b.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &LayerParams, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }
}

/// Per-state summary of what reaches the state's node.
#[derive(Clone, Copy, Debug)]
struct NodeInput {
    self_value: usize,
    inactive: f64,
    active: f64,
}

fn node_inputs(graph: &UnrolledGraph, window: Window<'_>, history: usize) -> Vec<NodeInput> {
    (0..graph.n_states)
        .map(|j| {
            let mut inactive = 0.0;
            let mut active = 0.0;
            for &(var, lag) in graph.parents(j) {
                if lag <= history {
                    if window.value(var, lag) == 1 {
                        active += 1.0;
                    } else {
                        inactive += 1.0;
                    }
                }
            }
            NodeInput {
                self_value: usize::from(window.value(j, 1)),
                inactive,
                active,
            }
        })
        .collect()
}

/// Activations of a batch, one row per (example, state).
struct Activations {
    inputs: Vec<NodeInput>,
    messages: Array2<f64>,
    pre: Array2<f64>,
    hidden: Array2<f64>,
    logits: Array2<f64>,
}

/// Message vectors for the four (self, parent) value pairs: `[s][x]`.
fn message_table(p: &LayerParams) -> [[Array1<f64>; 2]; 2] {
    let row = |i: usize| p.message_w.row(i).to_owned();
    let pair = |s: usize, x: usize| &row(s) + &row(FEATURE_DIM + x) + &p.message_b;
    [[pair(0, 0), pair(0, 1)], [pair(1, 0), pair(1, 1)]]
}

fn run(p: &LayerParams, graph: &UnrolledGraph, windows: &[Window<'_>], history: usize) -> Activations {
    let n = graph.n_states;
    let hdim = p.hidden();
    let rows = windows.len() * n;
    let table = message_table(p);
    let mut inputs = Vec::with_capacity(rows);
    let mut messages = Array2::<f64>::zeros((rows, hdim));
    for (b, w) in windows.iter().enumerate() {
        for (j, inp) in node_inputs(graph, *w, history).into_iter().enumerate() {
            let mut m = messages.row_mut(b * n + j);
            let t = &table[inp.self_value];
            if inp.inactive > 0.0 {
                m.scaled_add(inp.inactive, &t[0]);
            }
            if inp.active > 0.0 {
                m.scaled_add(inp.active, &t[1]);
            }
            inputs.push(inp);
        }
    }
    let update_m = p.update_w.slice(s![FEATURE_DIM.., ..]);
    let mut pre = messages.dot(&update_m);
    for (r, inp) in inputs.iter().enumerate() {
        let mut z = pre.row_mut(r);
        z += &p.update_w.row(inp.self_value);
        z += &p.update_b;
    }
    let hidden = pre.mapv(|z| z.max(0.0));
    let mut logits = Array2::<f64>::zeros((windows.len(), n));
    for b in 0..windows.len() {
        for j in 0..n {
            logits[[b, j]] = hidden.row(b * n + j).dot(&p.readout_w.row(j)) + p.readout_b[j];
        }
    }
    Activations {
        inputs,
        messages,
        pre,
        hidden,
        logits,
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn check_window(graph: &UnrolledGraph, window: Window<'_>, history: usize) -> Result<()> {
    if window.width() != graph.n_vars {
        return Err(Error::Window(format!(
            "window width {} does not match {} variables",
            window.width(),
            graph.n_vars
        )));
    }
    if window.len() < history {
        return Err(Error::Window(format!(
            "window has {} rows, predictor needs {history}",
            window.len()
        )));
    }
    window.last(history).check_one_hot(graph.n_states)
}

/// Per-state logits from the most recent `history` rows of `window`.
pub fn forward_logits(p: &LayerParams, graph: &UnrolledGraph, window: Window<'_>, history: usize) -> Result<Vec<f64>> {
    check_window(graph, window, history)?;
    let a = run(p, graph, &[window], history);
    Ok(a.logits.row(0).to_vec())
}

/// Next-state distribution.
pub fn forward_layer(p: &LayerParams, graph: &UnrolledGraph, window: Window<'_>, history: usize) -> Result<Vec<f64>> {
    Ok(softmax(&forward_logits(p, graph, window, history)?))
}

/// Mean cross-entropy over the batch and its exact gradient.
pub fn layer_loss_and_grad(
    p: &LayerParams,
    graph: &UnrolledGraph,
    batch: &[(Window<'_>, usize)],
    history: usize,
) -> Result<(f64, LayerParams)> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    for (w, target) in batch {
        check_window(graph, *w, history)?;
        if *target >= graph.n_states {
            return Err(Error::Invalid(format!("target state {target} out of range")));
        }
    }
    let windows: Vec<Window<'_>> = batch.iter().map(|(w, _)| *w).collect();
    let a = run(p, graph, &windows, history);
    let n = graph.n_states;
    let bsz = batch.len() as f64;
    let mut grad = LayerParams::zeros(n, p.hidden());

    // dL/dlogit, one row per example.
    let mut dlogits = Array2::<f64>::zeros((batch.len(), n));
    let mut loss = 0.0;
    for (b, (_, target)) in batch.iter().enumerate() {
        let logits = a.logits.row(b);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
        let l = lse - logits[*target];
        if !l.is_finite() {
            return Err(Error::NonFinite { index: b });
        }
        loss += l;
        for j in 0..n {
            let pj = (logits[j] - lse).exp();
            dlogits[[b, j]] = (pj - f64::from(u8::from(j == *target))) / bsz;
        }
    }
    loss /= bsz;

    let rows = batch.len() * n;
    let mut dpre = Array2::<f64>::zeros((rows, p.hidden()));
    for r in 0..rows {
        let (b, j) = (r / n, r % n);
        let g = dlogits[[b, j]];
        grad.readout_w.row_mut(j).scaled_add(g, &a.hidden.row(r));
        grad.readout_b[j] += g;
        let mut dz = dpre.row_mut(r);
        dz.scaled_add(g, &p.readout_w.row(j));
        dz.zip_mut_with(&a.pre.row(r), |d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
    }
    grad.update_b = dpre.sum_axis(Axis(0));
    let dupdate_m = a.messages.t().dot(&dpre);
    grad.update_w.slice_mut(s![FEATURE_DIM.., ..]).assign(&dupdate_m);
    for (r, inp) in a.inputs.iter().enumerate() {
        grad.update_w.row_mut(inp.self_value).scaled_add(1.0, &dpre.row(r));
    }

    let dmessages = dpre.dot(&p.update_w.slice(s![FEATURE_DIM.., ..]).t());
    for (r, inp) in a.inputs.iter().enumerate() {
        let dm = dmessages.row(r);
        for (x, count) in [(0, inp.inactive), (1, inp.active)] {
            if count > 0.0 {
                grad.message_w.row_mut(inp.self_value).scaled_add(count, &dm);
                grad.message_w.row_mut(FEATURE_DIM + x).scaled_add(count, &dm);
                grad.message_b.scaled_add(count, &dm);
            }
        }
    }
    Ok((loss, grad))
}
