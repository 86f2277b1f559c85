//! File-mediated pipeline behind the command-line tool.
//!
//! Every command reads a resolved [`RunConfig`] and writes its outputs plus a
//! JSON report (resolved config, seed, input hashes) into `out_dir`. Inputs
//! default to the outputs of the preceding command in the same directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::io::{load_catalog_spec, load_series, read_to_string, write_file, write_series_csv};
use crate::data::{deduplicate, split, MultiSeries, SynthConfig, SyntheticModel};
use crate::discovery::{discover, prune_graph, CausalGraph, DiscoveryConfig};
use crate::error::{Error, Result};
use crate::evaluation::{
    embed_snippets, evaluate_predictions, kmeans, mds_project, series_flows, train_discriminator, write_scatter_csv,
    DiscriminatorConfig,
};
use crate::inference::{markov_baseline, train, Predictor, TrainConfig};
use crate::simulation::{simulate, SimulationConfig};

pub const SERIES_FILE: &str = "series.csv";
pub const PLANTED_GRAPH_FILE: &str = "planted_graph.json";
pub const GRAPH_FILE: &str = "graph.json";
pub const PRUNED_GRAPH_FILE: &str = "graph_pruned.json";
pub const EXPLAIN_GRAPH_FILE: &str = "graph_explain.json";
pub const PARAMS_FILE: &str = "params.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const SCATTER_FILE: &str = "scatter.csv";
pub const SANKEY_FILE: &str = "sankey.json";
pub const SANKEY_TRUTH_FILE: &str = "sankey_truth.json";

/// Whole-pipeline configuration; one TOML document with a table per command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Master seed; copied into every stochastic step.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub synth: SynthConfig,
    pub discover: DiscoverSection,
    pub train: TrainSection,
    pub simulate: SimulateSection,
    pub evaluate: EvaluateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            synth: SynthConfig::default(),
            discover: DiscoverSection::default(),
            train: TrainSection::default(),
            simulate: SimulateSection::default(),
            evaluate: EvaluateSection::default(),
        }
    }
}

/// How input series are read and prepared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputOptions {
    /// Series file: wide series CSV, event CSV or event JSONL.
    pub series: Option<PathBuf>,
    /// Catalog spec for event input; inferred from the log when absent.
    pub catalog: Option<PathBuf>,
    /// Split individuals at tick gaps instead of failing.
    pub segment_gaps: bool,
    /// Drop repeated rows. Unset means: only for event logs.
    pub dedup: Option<bool>,
}

impl Default for InputOptions {
    fn default() -> Self {
        InputOptions {
            series: None,
            catalog: None,
            segment_gaps: false,
            dedup: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoverSection {
    #[serde(flatten)]
    pub input: InputOptions,
    pub alpha_strict: f64,
    /// Strength threshold of the explanation graph.
    pub min_strength: f64,
    #[serde(flatten)]
    pub params: DiscoveryConfig,
}

impl Default for DiscoverSection {
    fn default() -> Self {
        DiscoverSection {
            input: InputOptions::default(),
            alpha_strict: 0.01,
            min_strength: 0.0,
            params: DiscoveryConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Neural,
    Strength,
    Markov,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphVariant {
    Full,
    Pruned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    #[serde(flatten)]
    pub input: InputOptions,
    pub graph: Option<PathBuf>,
    pub variant: GraphVariant,
    pub predictor: PredictorKind,
    /// Share of each individual's ticks used for training; the rest is held out.
    pub split: f64,
    #[serde(flatten)]
    pub params: TrainConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            input: InputOptions::default(),
            graph: None,
            variant: GraphVariant::Full,
            predictor: PredictorKind::Neural,
            split: 0.8,
            params: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SimulateSection {
    #[serde(flatten)]
    pub input: InputOptions,
    pub params_file: Option<PathBuf>,
    #[serde(flatten)]
    pub params: SimulationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateSection {
    #[serde(flatten)]
    pub input: InputOptions,
    pub params_file: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub split: f64,
    /// Snippets sampled from each of the real and simulated series.
    pub snippets: usize,
    pub k: usize,
    pub discriminator: DiscriminatorConfig,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            input: InputOptions::default(),
            params_file: None,
            trace: None,
            split: 0.8,
            snippets: 1000,
            k: 4,
            discriminator: DiscriminatorConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?)
    }

    /// Copies the master seed into every section.
    pub fn resolve(mut self) -> Self {
        self.synth.seed = self.seed;
        self.discover.params.seed = self.seed;
        self.train.params.seed = self.seed;
        self.simulate.params.seed = self.seed;
        self.evaluate.discriminator.seed = self.seed;
        self
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn series_path(&self, input: &InputOptions) -> PathBuf {
        input.series.clone().unwrap_or_else(|| self.out(SERIES_FILE))
    }
}

/// Short content hash used to tie reports to their inputs.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(content_hash(&bytes))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'a str,
    config: &'a RunConfig,
    seed: u64,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    #[serde(flatten)]
    details: T,
}

fn write_report<T: Serialize>(
    cfg: &RunConfig,
    command: &str,
    inputs: BTreeMap<String, String>,
    outputs: &[PathBuf],
    details: T,
) -> Result<PathBuf> {
    let path = cfg.out(&format!("{command}_report.json"));
    let report = Report {
        command,
        config: cfg,
        seed: cfg.seed,
        inputs,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        details,
    };
    write_json(&path, &report)?;
    Ok(path)
}

/// A loaded, prepared input series.
pub struct Prepared {
    pub series: MultiSeries,
    pub hash: String,
    pub deduplicated: bool,
}

pub fn prepare_series(path: &Path, input: &InputOptions) -> Result<Prepared> {
    let catalog = input.catalog.as_deref().map(load_catalog_spec).transpose()?;
    let file = load_series(path, catalog.as_ref(), input.segment_gaps)?;
    let is_jsonl = path.extension().is_some_and(|e| e == "jsonl");
    let is_event_log = is_jsonl || !read_to_string(path)?.starts_with('#');
    let dedup = input.dedup.unwrap_or(is_event_log);
    let series = if dedup { deduplicate(&file.series) } else { file.series };
    Ok(Prepared {
        series,
        hash: file_hash(path)?,
        deduplicated: dedup,
    })
}

/// Writes `series.csv` and `planted_graph.json`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let model = SyntheticModel::random(&cfg.synth)?;
    let series = model.sample(cfg.synth.length, cfg.synth.individuals, cfg.synth.seed)?;
    let graph = model.planted_graph();
    let series_path = cfg.out(SERIES_FILE);
    let graph_path = cfg.out(PLANTED_GRAPH_FILE);
    let meta = BTreeMap::from([
        ("seed".to_string(), cfg.synth.seed.to_string()),
        ("source".to_string(), "synthetic".to_string()),
    ]);
    let mut buf = Vec::new();
    write_series_csv(&mut buf, &series, &meta, None)?;
    write_file(&series_path, &buf)?;
    write_file(&graph_path, graph.to_json_string().as_bytes())?;
    let outputs = vec![series_path, graph_path];
    #[derive(Serialize)]
    struct Details {
        model: SyntheticModel,
        planted_links: usize,
        catalog_hash: String,
    }
    let report = write_report(
        cfg,
        "synth",
        BTreeMap::new(),
        &outputs,
        Details {
            planted_links: graph.len(),
            catalog_hash: series.catalog.hash(),
            model,
        },
    )?;
    Ok([outputs, vec![report]].concat())
}

/// Writes the discovered graph, its pruned variant and the explanation export.
pub fn cmd_discover(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let sec = &cfg.discover;
    if sec.alpha_strict > sec.params.alpha {
        return Err(Error::Config(format!(
            "alpha_strict {} exceeds alpha {}",
            sec.alpha_strict, sec.params.alpha
        )));
    }
    let path = cfg.series_path(&sec.input);
    let prep = prepare_series(&path, &sec.input)?;
    let found = discover(&prep.series, &sec.params)?;
    let pruned = prune_graph(&found.graph, sec.alpha_strict);
    let explain = found.graph.filter_strength(sec.min_strength);
    let outputs = vec![cfg.out(GRAPH_FILE), cfg.out(PRUNED_GRAPH_FILE), cfg.out(EXPLAIN_GRAPH_FILE)];
    for (p, g) in outputs.iter().zip([&found.graph, &pruned, &explain]) {
        write_file(p, g.to_json_string().as_bytes())?;
    }
    #[derive(Serialize)]
    struct Details {
        deduplicated: bool,
        rows: usize,
        links: usize,
        pruned_links: usize,
        explained_links: usize,
        graph_hash: String,
        discovery: crate::discovery::DiscoveryReport,
    }
    let report = write_report(
        cfg,
        "discover",
        BTreeMap::from([("series".to_string(), prep.hash)]),
        &outputs,
        Details {
            deduplicated: prep.deduplicated,
            rows: prep.series.total_rows(),
            links: found.graph.len(),
            pruned_links: pruned.len(),
            explained_links: explain.len(),
            graph_hash: found.graph.hash(),
            discovery: found.report,
        },
    )?;
    Ok([outputs, vec![report]].concat())
}

fn load_graph(path: &Path) -> Result<CausalGraph> {
    CausalGraph::from_json_str(&read_to_string(path)?)
}

/// Trains (or builds) the configured predictor on the training split.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let sec = &cfg.train;
    let path = cfg.series_path(&sec.input);
    let prep = prepare_series(&path, &sec.input)?;
    let mut inputs = BTreeMap::from([("series".to_string(), prep.hash.clone())]);
    let needs_graph = matches!(sec.predictor, PredictorKind::Neural | PredictorKind::Strength);
    let graph = if needs_graph {
        let default = match sec.variant {
            GraphVariant::Full => GRAPH_FILE,
            GraphVariant::Pruned => PRUNED_GRAPH_FILE,
        };
        let gpath = sec.graph.clone().unwrap_or_else(|| cfg.out(default));
        inputs.insert("graph".to_string(), file_hash(&gpath)?);
        let g = load_graph(&gpath)?;
        if g.catalog() != &prep.series.catalog {
            return Err(Error::CatalogMismatch {
                expected: g.catalog().hash(),
                found: prep.series.catalog.hash(),
            });
        }
        Some(g)
    } else {
        None
    };
    let tau = graph.as_ref().map_or(1, CausalGraph::tau);
    let (train_part, _) = split(&prep.series, sec.split, tau)?;
    let mut training = None;
    let predictor = match (sec.predictor, graph) {
        (PredictorKind::Neural, Some(g)) => {
            let t = train(&train_part, &g, &sec.params)?;
            training = Some(t.report);
            Predictor::neural(t.params, g)?
        }
        (PredictorKind::Strength, Some(g)) => Predictor::SoftmaxStrength { graph: g },
        (PredictorKind::Markov, _) => markov_baseline(&train_part)?,
        (PredictorKind::Uniform, _) => Predictor::Uniform {
            catalog: prep.series.catalog.clone(),
        },
        _ => unreachable!("graph loaded for graph-based predictors"),
    };
    let params_path = cfg.out(PARAMS_FILE);
    write_file(&params_path, predictor.to_json_string().as_bytes())?;
    #[derive(Serialize)]
    struct Details {
        predictor: String,
        predictor_hash: String,
        catalog_hash: String,
        deduplicated: bool,
        train_rows: usize,
        training: Option<crate::inference::TrainReport>,
    }
    let outputs = vec![params_path];
    let report = write_report(
        cfg,
        "train",
        inputs,
        &outputs,
        Details {
            predictor: predictor.kind().to_string(),
            predictor_hash: predictor.hash(),
            catalog_hash: predictor.catalog().hash(),
            deduplicated: prep.deduplicated,
            train_rows: train_part.total_rows(),
            training,
        },
    )?;
    Ok([outputs, vec![report]].concat())
}

fn load_predictor(path: &Path, series: &MultiSeries) -> Result<Predictor> {
    Predictor::from_json_str(&read_to_string(path)?, Some(&series.catalog))
}

/// Rolls the trained predictor over the ground-truth series and writes `trace.csv`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let sec = &cfg.simulate;
    let path = cfg.series_path(&sec.input);
    let prep = prepare_series(&path, &sec.input)?;
    let ppath = sec.params_file.clone().unwrap_or_else(|| cfg.out(PARAMS_FILE));
    let predictor = load_predictor(&ppath, &prep.series)?;
    let trace = simulate(&predictor, &prep.series, &sec.params)?;
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    let trace_path = cfg.out(TRACE_FILE);
    write_file(&trace_path, &buf)?;
    #[derive(Serialize)]
    struct Details {
        predictor: String,
        predictor_hash: String,
        individuals: usize,
        rows: usize,
        simulated_rows: usize,
    }
    let outputs = vec![trace_path];
    let report = write_report(
        cfg,
        "simulate",
        BTreeMap::from([("series".to_string(), prep.hash), ("params".to_string(), file_hash(&ppath)?)]),
        &outputs,
        Details {
            predictor: trace.predictor_kind.clone(),
            predictor_hash: trace.predictor_hash.clone(),
            individuals: trace.series.individuals.len(),
            rows: trace.series.total_rows(),
            simulated_rows: trace.simulated.iter().flatten().filter(|&&s| s).count(),
        },
    )?;
    Ok([outputs, vec![report]].concat())
}

/// Contents of `metrics.json`. Only values derived from the inputs, so that
/// repeated runs produce identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub predictor: String,
    pub predictor_hash: String,
    pub series_hash: String,
    pub trace_hash: String,
    pub accuracy: f64,
    pub accuracy_dtau: f64,
    pub per_offset_accuracy: Vec<f64>,
    pub mi_raw_bits: f64,
    pub mi_normalized: f64,
    pub entropy_true_bits: f64,
    pub entropy_predicted_bits: f64,
    pub discriminator_accuracy: f64,
    pub discriminator_train_accuracy: f64,
    pub snippet_length: usize,
    pub snippets_per_source: usize,
    pub mds_method: String,
    pub mds_stress: f64,
    pub mds_eigenvalues: [f64; 2],
    pub mds_rank_deficient: bool,
    pub kmeans_k: usize,
    pub kmeans_inertia: f64,
    pub kmeans_iterations: usize,
    pub kmeans_converged: bool,
    /// Per cluster: `[real, simulated]` snippet counts.
    pub cluster_composition: Vec<[usize; 2]>,
    pub flow_transitions_truth: u64,
    pub flow_transitions_trace: u64,
}

/// Prediction metrics on the held-out split, snippet clustering and
/// discrimination of real against simulated data, and behaviour flows.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let sec = &cfg.evaluate;
    let path = cfg.series_path(&sec.input);
    let prep = prepare_series(&path, &sec.input)?;
    let ppath = sec.params_file.clone().unwrap_or_else(|| cfg.out(PARAMS_FILE));
    let predictor = load_predictor(&ppath, &prep.series)?;
    let tpath = sec.trace.clone().unwrap_or_else(|| cfg.out(TRACE_FILE));
    let trace = load_series(&tpath, Some(&prep.series.catalog), false)?.series;

    let w = predictor.window_len();
    let (_, test) = split(&prep.series, sec.split, w)?;
    let pred = evaluate_predictions(&predictor, &test)?;

    let snippet_len = w + 1;
    let real = embed_snippets(&prep.series, snippet_len, sec.snippets, cfg.seed)?;
    let fake = embed_snippets(&trace, snippet_len, sec.snippets, cfg.seed.wrapping_add(1))?;
    let disc = train_discriminator(&real.vectors, &fake.vectors, &sec.discriminator)?;
    let all: Vec<Vec<f64>> = real.vectors.iter().chain(&fake.vectors).cloned().collect();
    let mds = mds_project(&all)?;
    let km = kmeans(&mds.coords, sec.k, cfg.seed)?;
    let mut composition = vec![[0usize; 2]; sec.k];
    for (i, &l) in km.labels.iter().enumerate() {
        composition[l][usize::from(i >= real.vectors.len())] += 1;
    }
    let sources: Vec<&str> = (0..all.len())
        .map(|i| if i < real.vectors.len() { "real" } else { "simulated" })
        .collect();
    let truth_flows = series_flows(&prep.series);
    let trace_flows = series_flows(&trace);

    let metrics = Metrics {
        predictor: predictor.kind().to_string(),
        predictor_hash: predictor.hash(),
        series_hash: prep.hash.clone(),
        trace_hash: file_hash(&tpath)?,
        accuracy: pred.accuracy,
        accuracy_dtau: pred.accuracy_dtau,
        per_offset_accuracy: pred.per_offset_accuracy.clone(),
        mi_raw_bits: pred.mutual_information.raw_bits,
        mi_normalized: pred.mutual_information.normalized,
        entropy_true_bits: pred.mutual_information.entropy_true,
        entropy_predicted_bits: pred.mutual_information.entropy_predicted,
        discriminator_accuracy: disc.accuracy,
        discriminator_train_accuracy: disc.train_accuracy,
        snippet_length: snippet_len,
        snippets_per_source: sec.snippets,
        mds_method: "classical (Torgerson) on Euclidean distances".into(),
        mds_stress: mds.stress,
        mds_eigenvalues: mds.eigenvalues,
        mds_rank_deficient: mds.rank_deficient,
        kmeans_k: sec.k,
        kmeans_inertia: km.inertia,
        kmeans_iterations: km.iterations,
        kmeans_converged: km.converged,
        cluster_composition: composition,
        flow_transitions_truth: truth_flows.total(),
        flow_transitions_trace: trace_flows.total(),
    };
    let outputs = vec![
        cfg.out(METRICS_FILE),
        cfg.out(SCATTER_FILE),
        cfg.out(SANKEY_FILE),
        cfg.out(SANKEY_TRUTH_FILE),
    ];
    write_json(&outputs[0], &metrics)?;
    let mut buf = Vec::new();
    write_scatter_csv(&mut buf, &mds.coords, &km.labels, &sources)?;
    write_file(&outputs[1], &buf)?;
    write_json(&outputs[2], &trace_flows.to_json())?;
    write_json(&outputs[3], &truth_flows.to_json())?;
    #[derive(Serialize)]
    struct Details {
        per_offset_confusion: Vec<crate::evaluation::ConfusionCounts>,
        discriminator: crate::evaluation::DiscriminatorReport,
        kmeans_inertia_history: Vec<f64>,
        snippet_sampling: &'static str,
    }
    let report = write_report(
        cfg,
        "evaluate",
        BTreeMap::from([
            ("series".to_string(), prep.hash),
            ("params".to_string(), file_hash(&ppath)?),
            ("trace".to_string(), metrics.trace_hash.clone()),
        ]),
        &outputs,
        Details {
            per_offset_confusion: pred.per_offset,
            discriminator: disc,
            kmeans_inertia_history: km.inertia_history,
            snippet_sampling: "uniform over all start positions, with replacement",
        },
    )?;
    Ok([outputs, vec![report]].concat())
}
