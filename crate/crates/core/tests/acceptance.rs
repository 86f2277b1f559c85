//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints its own PASS/FAIL line.

mod common;

use std::time::Instant;

use causal_behaviour::data::{generate_synthetic, split, PlantedTerm, SynthConfig, SyntheticModel, VariableCatalog};
use causal_behaviour::discovery::{discover, precision_recall, DiscoveryConfig};
use causal_behaviour::evaluation::{
    accuracy, embed_snippets, evaluate_predictions, mutual_information, train_discriminator, ConfusionCounts,
    DiscriminatorConfig,
};
use causal_behaviour::inference::{markov_baseline, train, Predictor, TrainConfig};
use causal_behaviour::pipeline::{cmd_discover, cmd_evaluate, cmd_simulate, cmd_synth, cmd_train, RunConfig};
use causal_behaviour::rng::rng;
use causal_behaviour::simulation::{simulate, SimulationConfig};
use common::*;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn planted_graph_recovery() -> Outcome {
    let start = Instant::now();
    let (mut p_sum, mut r_sum) = (0.0, 0.0);
    for seed in 0..10 {
        let cfg = SynthConfig { n_states: 4, n_contexts: 2, tau_true: 2, density: 0.3, noise: 0.1, length: 5000, individuals: 1, seed };
        let (s, truth) = generate_synthetic(&cfg).unwrap();
        let found = discover(&s, &DiscoveryConfig { tau: 5, alpha: 0.01, seed, ..Default::default() }).unwrap();
        let (p, r) = precision_recall(&found.graph, &truth);
        p_sum += p;
        r_sum += r;
    }
    let (p, r, secs) = (p_sum / 10.0, r_sum / 10.0, start.elapsed().as_secs_f64());
    outcome(p >= 0.8 && r >= 0.8 && secs < 60.0, format!("precision {p:.3}, recall {r:.3}, {secs:.1} s"))
}

fn false_positive_control() -> Outcome {
    let alpha = 0.05;
    let (mut reported, mut possible) = (0usize, 0usize);
    for seed in 0..100 {
        let cfg = SynthConfig { noise: 1.0, length: 2000, seed, ..Default::default() };
        let (s, _) = generate_synthetic(&cfg).unwrap();
        let dc = DiscoveryConfig { tau: 3, alpha, seed, ..Default::default() };
        let found = discover(&s, &dc).unwrap();
        reported += found.graph.len();
        possible += s.catalog.n_states() * s.catalog.n_vars() * dc.tau;
    }
    let rate = reported as f64 / possible as f64;
    outcome(rate <= 2.0 * alpha, format!("{reported}/{possible} links = {rate:.4} (limit {:.2})", 2.0 * alpha))
}

fn mediator_removal() -> Outcome {
    // c0 -> s1 -> s2, one tick each.
    let mut clean = 0;
    for seed in 0..10 {
        let cat = VariableCatalog::synthetic(3, 1).unwrap();
        let model = SyntheticModel::new(
            cat,
            1,
            0.05,
            vec![0.0, -2.5, -2.5],
            vec![
                PlantedTerm { source: 3, lag: 1, target: 1, weight: 5.0 },
                PlantedTerm { source: 1, lag: 1, target: 2, weight: 5.0 },
            ],
            vec![0.5],
        )
        .unwrap();
        let s = model.sample(3000, 1, seed).unwrap();
        let found = discover(&s, &DiscoveryConfig { tau: 3, alpha: 0.01, seed, ..Default::default() }).unwrap();
        if !found.graph.contains(3, 2, 2) {
            clean += 1;
        }
    }
    outcome(clean >= 9, format!("mediated link absent in {clean}/10 seeds"))
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let r = gradient_check(20, 2024);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        r.max_relative_error <= 1e-3 && secs < 10.0,
        format!(
            "max relative error {:.2e} over {} coordinates, {} instances redrawn near a kink, {secs:.2} s",
            r.max_relative_error, r.coordinates, r.rejected_near_kink
        ),
    )
}

fn causal_path_invariance() -> Outcome {
    let (violations, checks) = invariance_violations(100, 77);
    outcome(violations == 0 && checks > 0, format!("{violations} changed logits in {checks} perturbations"))
}

fn learnability() -> Outcome {
    let s = cycle_series(4, 2, 2000, 9);
    let (tr, te) = split(&s, 0.8, 5).unwrap();
    let g = cycle_graph(&s.catalog, 5);
    let trained = train(&tr, &g, &TrainConfig::default()).unwrap();
    let neural = Predictor::neural(trained.params, g).unwrap();
    let nn = evaluate_predictions(&neural, &te).unwrap();
    let mk = evaluate_predictions(&markov_baseline(&tr).unwrap(), &te).unwrap();
    outcome(
        nn.accuracy_dtau >= 0.99 && nn.accuracy >= 0.99 && mk.accuracy_dtau >= 0.99,
        format!(
            "neural {:.4} (all offsets {:.4}), Markov {:.4} after {} epochs",
            nn.accuracy_dtau, nn.accuracy, mk.accuracy_dtau, trained.report.config.epochs
        ),
    )
}

fn metric_oracles() -> Outcome {
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    let mut in_range = true;
    for _ in 0..1000 {
        let n = r.random_range(2..8);
        let sparse = r.random_bool(0.3);
        let counts: Vec<Vec<u64>> = (0..n)
            .map(|_| (0..n).map(|_| if sparse && r.random_bool(0.5) { 0 } else { r.random_range(0..1000) }).collect())
            .collect();
        let c = ConfusionCounts::from_matrix(counts.clone()).unwrap();
        if c.total() == 0 {
            continue;
        }
        let mi = mutual_information(&c).unwrap();
        worst = worst.max((mi.raw_bits - mi_by_entropies(&counts)).abs());
        in_range &= (0.0..=1.0).contains(&mi.normalized);
    }
    let diag = ConfusionCounts::from_matrix(vec![vec![7, 0, 0], vec![0, 3, 0], vec![0, 0, 11]]).unwrap();
    let diag_acc = accuracy(&diag).unwrap();
    outcome(
        worst <= 1e-12 && in_range && diag_acc == 1.0,
        format!("entropy identity error {worst:.1e}, normalized in [0, 1]: {in_range}, diagonal accuracy {diag_acc}"),
    )
}

fn discriminator_sanity() -> Outcome {
    let (s, _) = generate_synthetic(&SynthConfig { length: 3000, seed: 3, ..Default::default() }).unwrap();
    let real = embed_snippets(&s, 6, 1000, 3).unwrap();
    let width = s.catalog.n_vars();
    let n = s.catalog.n_states();
    let zeroed: Vec<Vec<f64>> = real
        .vectors
        .iter()
        .map(|v| v.iter().enumerate().map(|(i, &x)| if i % width < n { 0.0 } else { x }).collect())
        .collect();
    let cfg = DiscriminatorConfig { seed: 3, ..Default::default() };
    let same = train_discriminator(&real.vectors, &real.vectors, &cfg).unwrap().accuracy;
    let apart = train_discriminator(&real.vectors, &zeroed, &cfg).unwrap().accuracy;
    outcome(
        (same - 0.5).abs() <= 0.05 && apart >= 0.95,
        format!("identical sets {same:.3}, separable sets {apart:.3}"),
    )
}

fn relative_ordering() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in 0..5 {
        let (s, _) = generate_synthetic(&SynthConfig { length: 3000, seed, ..Default::default() }).unwrap();
        let found = discover(&s, &DiscoveryConfig { seed, ..Default::default() }).unwrap();
        let (tr, _) = split(&s, 0.8, found.graph.tau()).unwrap();
        let trained = train(&tr, &found.graph, &TrainConfig { seed, ..Default::default() }).unwrap();
        let neural = Predictor::neural(trained.params, found.graph).unwrap();
        let uniform = Predictor::Uniform { catalog: s.catalog.clone() };
        let real = embed_snippets(&s, 6, 1000, seed).unwrap();
        let dcfg = DiscriminatorConfig { seed, ..Default::default() };
        let score = |p: &Predictor| {
            let trace = simulate(p, &s, &SimulationConfig { seed, ..Default::default() }).unwrap();
            let fake = embed_snippets(&trace.series, 6, 1000, seed + 1).unwrap();
            train_discriminator(&real.vectors, &fake.vectors, &dcfg).unwrap().accuracy
        };
        let (a, b) = (score(&neural), score(&uniform));
        pass &= a <= b;
        lines.push(format!("{a:.3}<={b:.3}"));
    }
    outcome(pass, format!("neural vs uniform per seed: {}", lines.join(", ")))
}

fn end_to_end_determinism() -> Outcome {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig { seed: 13, out_dir: dir.path().to_path_buf(), ..Default::default() };
        cfg.synth.length = 2000;
        let cfg = cfg.resolve();
        cmd_synth(&cfg).unwrap();
        cmd_discover(&cfg).unwrap();
        cmd_train(&cfg).unwrap();
        cmd_simulate(&cfg).unwrap();
        cmd_evaluate(&cfg).unwrap();
        std::fs::read(dir.path().join("metrics.json")).unwrap()
    };
    let (a, b) = (run(), run());
    outcome(a == b && !a.is_empty(), format!("metrics.json {} bytes, identical: {}", a.len(), a == b))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("planted graph recovery", planted_graph_recovery),
        ("false-positive control", false_positive_control),
        ("mediator removal", mediator_removal),
        ("gradient correctness", gradient_correctness),
        ("causal-path invariance", causal_path_invariance),
        ("learnability", learnability),
        ("metric oracles", metric_oracles),
        ("discriminator sanity", discriminator_sanity),
        ("relative ordering", relative_ordering),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!("criterion {:>2} {name}: {} ({})", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
