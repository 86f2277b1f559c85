//! Argument parsing for the `cbm` binary.
//!
//! Exit codes: 0 on success, 1 for bad input or configuration, 2 for
//! internal failures.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::pipeline::{self, GraphVariant, InputOptions, PredictorKind, RunConfig};
use crate::simulation::SimulationMode;

#[derive(Debug, Parser)]
#[command(name = "cbm", version, about = "Causal behaviour modelling: synthesise, discover, train, simulate, evaluate")]
pub struct Cli {
    /// TOML configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic series with a planted lagged graph.
    Synth(SynthArgs),
    /// Discover a lagged causal graph from a series or event log.
    Discover(DiscoverArgs),
    /// Fit a predictor on the training split.
    Train(TrainArgs),
    /// Roll a trained predictor forward over the ground truth.
    Simulate(SimulateArgs),
    /// Score predictions and compare simulated against real snippets.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Wide series CSV, event CSV or event JSONL.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Catalog spec (JSON) for event input.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Split individuals at gaps in their ticks.
    #[arg(long)]
    pub segment_gaps: bool,
    /// Drop repeated rows (default for event logs).
    #[arg(long, conflicts_with = "no_dedup")]
    pub dedup: bool,
    #[arg(long)]
    pub no_dedup: bool,
}

impl InputArgs {
    fn apply(&self, opts: &mut InputOptions) {
        if let Some(p) = &self.input {
            opts.series = Some(p.clone());
        }
        if let Some(p) = &self.catalog {
            opts.catalog = Some(p.clone());
        }
        opts.segment_gaps |= self.segment_gaps;
        if self.dedup {
            opts.dedup = Some(true);
        }
        if self.no_dedup {
            opts.dedup = Some(false);
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub states: Option<usize>,
    #[arg(long)]
    pub contexts: Option<usize>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub tau_true: Option<usize>,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub individuals: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub alpha_strict: Option<f64>,
    #[arg(long)]
    pub q_max: Option<usize>,
    /// Strength threshold for the explanation graph.
    #[arg(long)]
    pub min_strength: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PredictorArg {
    Neural,
    Strength,
    Markov,
    Uniform,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Full,
    Pruned,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    pub predictor: Option<PredictorArg>,
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Individual,
    Group,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Simulate only this individual (individual mode).
    #[arg(long)]
    pub individual: Option<String>,
    /// Take the most likely state instead of sampling.
    #[arg(long)]
    pub argmax: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub snippets: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Cli {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.out_dir, self.out_dir.clone());
        match &self.command {
            Command::Synth(a) => {
                let s = &mut cfg.synth;
                set(&mut s.n_states, a.states);
                set(&mut s.n_contexts, a.contexts);
                set(&mut s.length, a.length);
                set(&mut s.tau_true, a.tau_true);
                set(&mut s.density, a.density);
                set(&mut s.noise, a.noise);
                set(&mut s.individuals, a.individuals);
            }
            Command::Discover(a) => {
                let d = &mut cfg.discover;
                a.input.apply(&mut d.input);
                set(&mut d.params.tau, a.tau);
                set(&mut d.params.alpha, a.alpha);
                set(&mut d.params.q_max, a.q_max);
                set(&mut d.alpha_strict, a.alpha_strict);
                set(&mut d.min_strength, a.min_strength);
            }
            Command::Train(a) => {
                let t = &mut cfg.train;
                a.input.apply(&mut t.input);
                if a.graph.is_some() {
                    t.graph = a.graph.clone();
                }
                set(
                    &mut t.variant,
                    a.variant.map(|v| match v {
                        VariantArg::Full => GraphVariant::Full,
                        VariantArg::Pruned => GraphVariant::Pruned,
                    }),
                );
                set(
                    &mut t.predictor,
                    a.predictor.map(|p| match p {
                        PredictorArg::Neural => PredictorKind::Neural,
                        PredictorArg::Strength => PredictorKind::Strength,
                        PredictorArg::Markov => PredictorKind::Markov,
                        PredictorArg::Uniform => PredictorKind::Uniform,
                    }),
                );
                set(&mut t.split, a.split);
                set(&mut t.params.epochs, a.epochs);
                set(&mut t.params.lr, a.lr);
                set(&mut t.params.batch_size, a.batch_size);
                set(&mut t.params.hidden, a.hidden);
            }
            Command::Simulate(a) => {
                let s = &mut cfg.simulate;
                a.input.apply(&mut s.input);
                if a.params.is_some() {
                    s.params_file = a.params.clone();
                }
                set(
                    &mut s.params.mode,
                    a.mode.map(|m| match m {
                        ModeArg::Individual => SimulationMode::Individual,
                        ModeArg::Group => SimulationMode::Group,
                    }),
                );
                if a.horizon.is_some() {
                    s.params.horizon = a.horizon;
                }
                if a.individual.is_some() {
                    s.params.individual = a.individual.clone();
                }
                s.params.argmax |= a.argmax;
            }
            Command::Evaluate(a) => {
                let e = &mut cfg.evaluate;
                a.input.apply(&mut e.input);
                if a.params.is_some() {
                    e.params_file = a.params.clone();
                }
                if a.trace.is_some() {
                    e.trace = a.trace.clone();
                }
                set(&mut e.split, a.split);
                set(&mut e.snippets, a.snippets);
                set(&mut e.k, a.k);
            }
        }
        Ok(cfg.resolve())
    }

    pub fn execute(&self) -> Result<Vec<PathBuf>> {
        let cfg = self.resolve()?;
        match self.command {
            Command::Synth(_) => pipeline::cmd_synth(&cfg),
            Command::Discover(_) => pipeline::cmd_discover(&cfg),
            Command::Train(_) => pipeline::cmd_train(&cfg),
            Command::Simulate(_) => pipeline::cmd_simulate(&cfg),
            Command::Evaluate(_) => pipeline::cmd_evaluate(&cfg),
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.execute() {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(error: &Error) -> i32 {
    if error.is_user_error() {
        1
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(exit_code(&Error::NonFinite { index: 0 }), 2);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 5\n[synth]\nlength = 500\nnoise = 0.2\n").unwrap();
        let cli = Cli::try_parse_from([
            "cbm",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "9",
            "synth",
            "--noise",
            "0.3",
        ])
        .unwrap();
        let cfg = cli.resolve().unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.synth.seed, 9);
        assert_eq!(cfg.synth.length, 500);
        assert_eq!(cfg.synth.noise, 0.3);
    }
}
