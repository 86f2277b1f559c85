use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{active_state, sample_index, MultiSeries, VariableCatalog, Window};
use crate::discovery::{CausalGraph, GraphJson};
use crate::error::{Error, Result};
use crate::inference::network::softmax;
use crate::inference::train::{forward, PredictorParams};
use crate::inference::unroll::{unroll_adjacency, UnrolledGraph};
use crate::rng::Rng;

/// A next-state model over the states of one catalog.
#[derive(Clone, Debug)]
pub enum Predictor {
    /// Message passing over the causal graph.
    NeuralCausal {
        params: PredictorParams,
        graph: CausalGraph,
        unrolled: UnrolledGraph,
    },
    /// Softmax over summed strengths of active incoming links.
    SoftmaxStrength { graph: CausalGraph },
    /// First-order transition counts; probabilities use add-one smoothing.
    Markov {
        catalog: VariableCatalog,
        counts: Vec<Vec<u64>>,
    },
    /// Uniform over states regardless of input.
    Uniform { catalog: VariableCatalog },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictMode {
    Argmax,
    Sample,
}

impl Predictor {
    pub fn neural(params: PredictorParams, graph: CausalGraph) -> Result<Self> {
        let n = graph.catalog().n_states();
        if params.tau != graph.tau() || params.layers.len() != params.tau {
            return Err(Error::Invalid(format!(
                "parameters cover {} offsets, graph has tau {}",
                params.layers.len(),
                graph.tau()
            )));
        }
        if params.n_states != n || params.layers.iter().any(|l| l.n_states() != n || l.hidden() != params.hidden) {
            return Err(Error::Invalid("parameter shapes do not match the catalog".into()));
        }
        let unrolled = unroll_adjacency(&graph);
        Ok(Predictor::NeuralCausal {
            params,
            graph,
            unrolled,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Predictor::NeuralCausal { .. } => "neural-causal",
            Predictor::SoftmaxStrength { .. } => "softmax-strength",
            Predictor::Markov { .. } => "markov",
            Predictor::Uniform { .. } => "uniform",
        }
    }

    pub fn catalog(&self) -> &VariableCatalog {
        match self {
            Predictor::NeuralCausal { graph, .. } | Predictor::SoftmaxStrength { graph } => graph.catalog(),
            Predictor::Markov { catalog, .. } | Predictor::Uniform { catalog } => catalog,
        }
    }

    pub fn n_states(&self) -> usize {
        self.catalog().n_states()
    }

    /// Rows of history consumed by the final (offset 1) prediction.
    pub fn window_len(&self) -> usize {
        match self {
            Predictor::NeuralCausal { graph, .. } | Predictor::SoftmaxStrength { graph } => graph.tau(),
            Predictor::Markov { .. } | Predictor::Uniform { .. } => 1,
        }
    }

    /// Next-state distribution from the full window.
    pub fn distribution(&self, window: Window<'_>) -> Result<Vec<f64>> {
        self.distribution_at(window, 1)
    }

    /// Next-state distribution of the `offset` predictor, which sees
    /// `window_len() - offset + 1` rows.
    pub fn distribution_at(&self, window: Window<'_>, offset: usize) -> Result<Vec<f64>> {
        let tau = self.window_len();
        if offset == 0 || offset > tau {
            return Err(Error::Invalid(format!("offset {offset} outside 1..={tau}")));
        }
        let history = tau + 1 - offset;
        check_window(self.catalog(), window, history)?;
        let window = window.last(history);
        match self {
            Predictor::NeuralCausal { params, unrolled, .. } => forward(params, window, unrolled, offset),
            Predictor::SoftmaxStrength { graph } => Ok(softmax_strength_predict(graph, window)),
            Predictor::Markov { counts, .. } => {
                let prev = active_state(&window.at_lag(1)[..counts.len()]).expect("checked one-hot");
                Ok(smoothed_row(&counts[prev]))
            }
            Predictor::Uniform { catalog } => {
                let n = catalog.n_states();
                Ok(vec![1.0 / n as f64; n])
            }
        }
    }

    /// Stable short hash of the predictor's serialized form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json_string().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn to_json_string(&self) -> String {
        let file = PredictorFile {
            format: FORMAT.into(),
            version: VERSION,
            catalog_hash: self.catalog().hash(),
            predictor: self.repr(),
        };
        serde_json::to_string(&file).expect("predictor serializes") + "\n"
    }

    /// Parses a params file. With `expected`, refuses a file trained on another catalog.
    pub fn from_json_str(text: &str, expected: Option<&VariableCatalog>) -> Result<Self> {
        let file: PredictorFile = serde_json::from_str(text)?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(Error::Invalid(format!(
                "unsupported params file {} v{}",
                file.format, file.version
            )));
        }
        let p = Self::from_repr(file.predictor)?;
        let found = p.catalog().hash();
        if found != file.catalog_hash {
            return Err(Error::CatalogMismatch {
                expected: file.catalog_hash,
                found,
            });
        }
        if let Some(cat) = expected {
            if cat.hash() != found {
                return Err(Error::CatalogMismatch {
                    expected: found,
                    found: cat.hash(),
                });
            }
        }
        Ok(p)
    }

    fn repr(&self) -> PredictorRepr {
        match self {
            Predictor::NeuralCausal { params, graph, .. } => PredictorRepr::NeuralCausal {
                params: params.clone(),
                graph: graph.to_json(),
            },
            Predictor::SoftmaxStrength { graph } => PredictorRepr::SoftmaxStrength { graph: graph.to_json() },
            Predictor::Markov { catalog, counts } => PredictorRepr::Markov {
                catalog: catalog.clone(),
                counts: counts.clone(),
            },
            Predictor::Uniform { catalog } => PredictorRepr::Uniform { catalog: catalog.clone() },
        }
    }

    fn from_repr(r: PredictorRepr) -> Result<Self> {
        Ok(match r {
            PredictorRepr::NeuralCausal { params, graph } => Predictor::neural(params, CausalGraph::from_json(graph)?)?,
            PredictorRepr::SoftmaxStrength { graph } => Predictor::SoftmaxStrength {
                graph: CausalGraph::from_json(graph)?,
            },
            PredictorRepr::Markov { catalog, counts } => {
                let n = catalog.n_states();
                if counts.len() != n || counts.iter().any(|r| r.len() != n) {
                    return Err(Error::Invalid("transition table does not match the catalog".into()));
                }
                Predictor::Markov { catalog, counts }
            }
            PredictorRepr::Uniform { catalog } => Predictor::Uniform { catalog },
        })
    }
}

const FORMAT: &str = "cbm-params";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PredictorFile {
    format: String,
    version: u32,
    catalog_hash: String,
    predictor: PredictorRepr,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum PredictorRepr {
    NeuralCausal { params: PredictorParams, graph: GraphJson },
    SoftmaxStrength { graph: GraphJson },
    Markov { catalog: VariableCatalog, counts: Vec<Vec<u64>> },
    Uniform { catalog: VariableCatalog },
}

fn check_window(catalog: &VariableCatalog, window: Window<'_>, history: usize) -> Result<()> {
    if window.width() != catalog.n_vars() {
        return Err(Error::Window(format!(
            "window width {} does not match {} variables",
            window.width(),
            catalog.n_vars()
        )));
    }
    if window.len() < history {
        return Err(Error::Window(format!(
            "window has {} rows, predictor needs {history}",
            window.len()
        )));
    }
    window.last(history).check_one_hot(catalog.n_states())
}

fn smoothed_row(counts: &[u64]) -> Vec<f64> {
    let total = counts.iter().sum::<u64>() as f64 + counts.len() as f64;
    counts.iter().map(|&c| (c as f64 + 1.0) / total).collect()
}

/// Softmax over, for each state, the summed strength of its incoming links
/// whose source is active at the link's lag. Links older than the window are ignored.
pub fn softmax_strength_predict(graph: &CausalGraph, window: Window<'_>) -> Vec<f64> {
    let mut scores = vec![0.0; graph.catalog().n_states()];
    for l in graph.links() {
        if l.lag <= window.len() && window.value(l.source, l.lag) == 1 {
            scores[l.target] += l.strength;
        }
    }
    softmax(&scores)
}

/// First-order transition table of the series, pooled over individuals.
pub fn markov_baseline(series: &MultiSeries) -> Result<Predictor> {
    if series.total_rows() == 0 {
        return Err(Error::EmptySeries);
    }
    let n = series.catalog.n_states();
    let mut counts = vec![vec![0u64; n]; n];
    for ind in &series.individuals {
        for t in 1..ind.len() {
            counts[ind.state_at(t - 1, n)][ind.state_at(t, n)] += 1;
        }
    }
    Ok(Predictor::Markov {
        catalog: series.catalog.clone(),
        counts,
    })
}

/// Lowest index among the maximisers.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Predicted state and the distribution it came from.
pub fn predict_next(predictor: &Predictor, window: Window<'_>, mode: PredictMode, rng: &mut Rng) -> Result<(usize, Vec<f64>)> {
    let p = predictor.distribution(window)?;
    let state = choose(&p, mode, rng);
    Ok((state, p))
}

pub(crate) fn choose(p: &[f64], mode: PredictMode, rng: &mut Rng) -> usize {
    match mode {
        PredictMode::Argmax => argmax(p),
        PredictMode::Sample => sample_index(p, rng.random::<f64>()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::IndividualSeries;
    use crate::discovery::LaggedLink;

    fn row(state: usize, n: usize, ctx: &[u8]) -> Vec<u8> {
        let mut r = vec![0u8; n];
        r[state] = 1;
        r.extend_from_slice(ctx);
        r
    }

    #[test]
    fn strength_single_active_link() {
        let cat = VariableCatalog::synthetic(3, 1).unwrap();
        let s = 1.7;
        let link = LaggedLink { source: 3, lag: 1, target: 2, strength: s, p_value: 0.0 };
        let g = CausalGraph::new(cat, 1, vec![link]).unwrap();
        let data = row(0, 3, &[1]);
        let p = softmax_strength_predict(&g, Window::new(&data, 4).unwrap());
        let expected = s.exp() / (s.exp() + 2.0);
        assert!((p[2] - expected).abs() < 1e-15);
        assert!((p[0] - 1.0 / (s.exp() + 2.0)).abs() < 1e-15);
    }

    #[test]
    fn strength_two_active_links_hand_computed() {
        // Scores: state 0 gets 1.0 (s1 at lag 2), state 1 gets 0.5 (c at lag 1); the
        // link from s2 at lag 1 is inactive.
        let cat = VariableCatalog::synthetic(3, 1).unwrap();
        let links = vec![
            LaggedLink { source: 1, lag: 2, target: 0, strength: 1.0, p_value: 0.0 },
            LaggedLink { source: 3, lag: 1, target: 1, strength: 0.5, p_value: 0.0 },
            LaggedLink { source: 2, lag: 1, target: 1, strength: 9.0, p_value: 0.0 },
        ];
        let g = CausalGraph::new(cat, 2, links).unwrap();
        let data = [row(1, 3, &[0]), row(0, 3, &[1])].concat();
        let p = softmax_strength_predict(&g, Window::new(&data, 4).unwrap());
        let z = 1f64.exp() + 0.5f64.exp() + 1.0;
        assert!((p[0] - 1f64.exp() / z).abs() < 1e-15);
        assert!((p[1] - 0.5f64.exp() / z).abs() < 1e-15);
        assert!((p[2] - 1.0 / z).abs() < 1e-15);
    }

    #[test]
    fn markov_add_one() {
        let cat = VariableCatalog::synthetic(3, 0).unwrap();
        let data = [row(0, 3, &[]), row(1, 3, &[])].concat();
        let ind = IndividualSeries::new("a", vec![0, 1], data, 3).unwrap();
        let m = markov_baseline(&MultiSeries::new(cat, vec![ind]).unwrap()).unwrap();
        let a = row(0, 3, &[]);
        let p = m.distribution(Window::new(&a, 3).unwrap()).unwrap();
        assert_eq!(p, vec![0.25, 0.5, 0.25]);
        let c = row(2, 3, &[]);
        let p = m.distribution(Window::new(&c, 3).unwrap()).unwrap();
        assert_eq!(p, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn argmax_ties_and_sampling() {
        assert_eq!(argmax(&[0.25; 4]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
        let mut rng = crate::rng::rng(3);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            counts[choose(&[0.1, 0.7, 0.2], PredictMode::Sample, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip([0.1, 0.7, 0.2]) {
            assert!((*c as f64 / 10_000.0 - p).abs() < 0.02);
        }
    }

    #[test]
    fn params_file_round_trip_and_mismatch() {
        let cat = VariableCatalog::synthetic(3, 1).unwrap();
        let g = CausalGraph::empty(cat.clone(), 2).unwrap();
        let p = Predictor::neural(PredictorParams::init(3, 4, 2, 1), g).unwrap();
        let text = p.to_json_string();
        let back = Predictor::from_json_str(&text, Some(&cat)).unwrap();
        assert_eq!(back.to_json_string(), text);
        let other = VariableCatalog::synthetic(3, 2).unwrap();
        assert!(matches!(
            Predictor::from_json_str(&text, Some(&other)),
            Err(Error::CatalogMismatch { .. })
        ));
    }
}
