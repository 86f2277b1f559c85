//! Trains the graph-constrained predictor and compares it with the
//! strength-softmax and Markov baselines on held-out data.
//!
//! `cargo run --release --example train_predictor`

use causal_behaviour::data::{generate_synthetic, split, SynthConfig};
use causal_behaviour::discovery::{discover, DiscoveryConfig};
use causal_behaviour::evaluation::evaluate_predictions;
use causal_behaviour::inference::{markov_baseline, train, Predictor, TrainConfig};

fn main() -> causal_behaviour::Result<()> {
    let (series, _) = generate_synthetic(&SynthConfig { length: 4000, seed: 3, noise: 0.0, ..Default::default() })?;
    let graph = discover(&series, &DiscoveryConfig::default())?.graph;
    let (train_part, test_part) = split(&series, 0.8, graph.tau())?;

    let trained = train(&train_part, &graph, &TrainConfig::default())?;
    for (o, curve) in trained.report.loss_curves.iter().enumerate() {
        println!("offset {} loss {:.4} -> {:.4}", o + 1, curve[0], curve[curve.len() - 1]);
    }
    let predictors = [
        Predictor::neural(trained.params, graph.clone())?,
        Predictor::SoftmaxStrength { graph },
        markov_baseline(&train_part)?,
        Predictor::Uniform { catalog: series.catalog.clone() },
    ];
    println!("{:<18} {:>7} {:>7} {:>7}", "predictor", "acc", "acc_dt", "mi");
    for p in &predictors {
        let e = evaluate_predictions(p, &test_part)?;
        println!(
            "{:<18} {:>7.3} {:>7.3} {:>7.3}",
            p.kind(),
            e.accuracy,
            e.accuracy_dtau,
            e.mutual_information.normalized
        );
    }
    Ok(())
}
