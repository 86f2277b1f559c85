//! Runs every pipeline command in-process, as `cbm` would, and prints the
//! resulting metrics file.
//!
//! `cargo run --release --example run_pipeline -- [out_dir]`

use causal_behaviour::pipeline::{cmd_discover, cmd_evaluate, cmd_simulate, cmd_synth, cmd_train, RunConfig, METRICS_FILE};

const CONFIG: &str = r#"
seed = 21

[synth]
length = 3000
noise = 0.05

[discover]
tau = 5
alpha = 0.01

[train]
predictor = "neural"
epochs = 10

[simulate]
mode = "individual"

[evaluate]
snippets = 500
"#;

fn main() -> causal_behaviour::Result<()> {
    let mut cfg = RunConfig::from_toml(CONFIG)?;
    cfg.out_dir = std::env::args().nth(1).unwrap_or_else(|| "pipeline-out".into()).into();
    let cfg = cfg.resolve();
    for (name, step) in [
        ("synth", cmd_synth as fn(&RunConfig) -> causal_behaviour::Result<_>),
        ("discover", cmd_discover),
        ("train", cmd_train),
        ("simulate", cmd_simulate),
        ("evaluate", cmd_evaluate),
    ] {
        let written = step(&cfg)?;
        println!("{name}: {}", written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "));
    }
    println!("{}", std::fs::read_to_string(cfg.out_dir.join(METRICS_FILE)).expect("metrics written"));
    Ok(())
}
