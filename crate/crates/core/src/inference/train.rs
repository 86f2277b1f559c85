use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{MultiSeries, Window};
use crate::discovery::CausalGraph;
use crate::error::{Error, Result};
use crate::inference::network::{forward_layer, layer_loss_and_grad, LayerParams};
use crate::inference::unroll::{unroll_adjacency, UnrolledGraph};
use crate::rng::SeedMix;

/// One parameter set per offset `1..=tau`. Offset `o` predicts from the
/// `tau - o + 1` most recent rows; offset 1 is the full-history predictor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorParams {
    pub tau: usize,
    pub hidden: usize,
    pub n_states: usize,
    pub layers: Vec<LayerParams>,
}

impl PredictorParams {
    pub fn init(n_states: usize, hidden: usize, tau: usize, seed: u64) -> Self {
        let layers = (1..=tau)
            .map(|o| {
                let mut rng = SeedMix::new(seed).str("init").u64(o as u64).rng();
                LayerParams::init(n_states, hidden, &mut rng)
            })
            .collect();
        PredictorParams {
            tau,
            hidden,
            n_states,
            layers,
        }
    }

    pub fn zeros_like(&self) -> Self {
        PredictorParams {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams::zeros(l.n_states(), l.hidden()))
                .collect(),
            ..*self
        }
    }

    /// History length used by `offset`.
    pub fn history(&self, offset: usize) -> usize {
        self.tau + 1 - offset
    }

    pub fn layer(&self, offset: usize) -> Result<&LayerParams> {
        if offset == 0 || offset > self.tau {
            return Err(Error::Invalid(format!("offset {offset} outside 1..={}", self.tau)));
        }
        Ok(&self.layers[offset - 1])
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(LayerParams::is_finite)
    }

    /// Parameter count of the whole model and of the offset-1 predictor.
    pub fn sizes(&self) -> (usize, usize) {
        let per: Vec<usize> = self.layers.iter().map(LayerParams::len).collect();
        (per.iter().sum(), per.first().copied().unwrap_or(0))
    }
}

/// Next-state distribution of the `offset` predictor given `window`.
pub fn forward(params: &PredictorParams, window: Window<'_>, graph: &UnrolledGraph, offset: usize) -> Result<Vec<f64>> {
    forward_layer(params.layer(offset)?, graph, window, params.history(offset))
}

/// Mean cross-entropy of the `offset` predictor and its gradient (other offsets zero).
pub fn loss_and_grad(
    params: &PredictorParams,
    batch: &[(Window<'_>, usize)],
    graph: &UnrolledGraph,
    offset: usize,
) -> Result<(f64, PredictorParams)> {
    let (loss, g) = layer_loss_and_grad(params.layer(offset)?, graph, batch, params.history(offset))?;
    let mut grad = params.zeros_like();
    grad.layers[offset - 1] = g;
    Ok((loss, grad))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            lr: 1e-2,
            batch_size: 32,
            hidden: 128,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub optimizer: String,
    pub loss: String,
    pub graph_hash: String,
    pub catalog_hash: String,
    /// Mean training loss per epoch, per offset.
    pub loss_curves: Vec<Vec<f64>>,
    /// Training examples per offset.
    pub examples: Vec<usize>,
    pub parameters_total: usize,
    pub parameters_final_offset: usize,
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub params: PredictorParams,
    pub report: TrainReport,
}

/// All `(history window, next state)` pairs with `history` rows.
pub fn training_examples(series: &MultiSeries, history: usize) -> Vec<(Window<'_>, usize)> {
    let n = series.catalog.n_states();
    let mut out = Vec::new();
    for ind in &series.individuals {
        for t in history..ind.len() {
            out.push((ind.window(t - history, t), ind.state_at(t, n)));
        }
    }
    out
}

/// Minibatch gradient descent, one parameter set per offset.
pub fn train(series: &MultiSeries, graph: &CausalGraph, config: &TrainConfig) -> Result<Trained> {
    if config.epochs == 0 || config.batch_size == 0 || config.hidden == 0 {
        return Err(Error::Config("epochs, batch size and hidden size must be positive".into()));
    }
    if !(config.lr >= 0.0 && config.lr.is_finite()) {
        return Err(Error::Config(format!("invalid learning rate {}", config.lr)));
    }
    if series.catalog != *graph.catalog() {
        return Err(Error::Invalid("series and graph catalogs differ".into()));
    }
    let tau = graph.tau();
    let unrolled = unroll_adjacency(graph);
    let mut params = PredictorParams::init(series.catalog.n_states(), config.hidden, tau, config.seed);
    let mut loss_curves = Vec::with_capacity(tau);
    let mut counts = Vec::with_capacity(tau);
    for offset in 1..=tau {
        let history = params.history(offset);
        let examples = training_examples(series, history);
        if examples.is_empty() {
            return Err(Error::TooShort(format!(
                "no window of {} ticks for offset {offset}",
                history + 1
            )));
        }
        counts.push(examples.len());
        let mut rng = SeedMix::new(config.seed).str("shuffle").u64(offset as u64).rng();
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut curve = Vec::with_capacity(config.epochs);
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for chunk in order.chunks(config.batch_size) {
                let batch: Vec<(Window<'_>, usize)> = chunk.iter().map(|&i| examples[i]).collect();
                let layer = &params.layers[offset - 1];
                let step = layer_loss_and_grad(layer, &unrolled, &batch, history);
                let (loss, grad) = match step {
                    Ok(v) => v,
                    Err(Error::NonFinite { .. }) => {
                        return Err(Error::Diverged {
                            offset,
                            epoch,
                            checkpoint: Box::new(params),
                        })
                    }
                    Err(e) => return Err(e),
                };
                let mut next = layer.clone();
                next.add_scaled(&grad, -config.lr);
                if !next.is_finite() {
                    return Err(Error::Diverged {
                        offset,
                        epoch,
                        checkpoint: Box::new(params),
                    });
                }
                params.layers[offset - 1] = next;
                total += loss * batch.len() as f64;
            }
            curve.push(total / examples.len() as f64);
        }
        loss_curves.push(curve);
    }
    let (total, last) = params.sizes();
    Ok(Trained {
        report: TrainReport {
            config: config.clone(),
            optimizer: "minibatch gradient descent".into(),
            loss: "mean cross-entropy".into(),
            graph_hash: graph.hash(),
            catalog_hash: series.catalog.hash(),
            loss_curves,
            examples: counts,
            parameters_total: total,
            parameters_final_offset: last,
        },
        params,
    })
}
