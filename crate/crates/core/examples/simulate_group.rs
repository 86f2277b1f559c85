//! Simulates a small group together: each agent's neighbour-behaviour
//! columns are rebuilt from what the other agents were simulated to do.
//!
//! `cargo run --release --example simulate_group`

use causal_behaviour::data::{build_binary_series, parse_records, CatalogSpec, RawRecord};
use causal_behaviour::discovery::{discover, DiscoveryConfig};
use causal_behaviour::inference::{train, Predictor, TrainConfig};
use causal_behaviour::rng::rng;
use causal_behaviour::simulation::{simulate, SimulationConfig, SimulationMode};
use rand::Rng;

fn main() -> causal_behaviour::Result<()> {
    let states = ["rest", "forage", "vigilance"];
    let spec = CatalogSpec {
        states: states.iter().map(|s| s.to_string()).collect(),
        locations: vec!["burrow".into(), "field".into()],
        exogenous: vec![],
    };
    let catalog = spec.build()?;

    // Agents tend to copy what a close neighbour did one tick earlier.
    let ids = ["ada", "bo", "cy"];
    let mut r = rng(0);
    let mut last = [0usize; 3];
    let mut records = Vec::new();
    for t in 0..1500 {
        let close: Vec<Vec<usize>> = (0..3).map(|k| (0..3).filter(|&o| o != k && r.random_bool(0.5)).collect()).collect();
        let mut next = last;
        for k in 0..3 {
            next[k] = match close[k].first() {
                Some(&o) if r.random_bool(0.7) => last[o],
                _ => r.random_range(0..3),
            };
        }
        for k in 0..3 {
            records.push(RawRecord {
                time: t,
                individual: ids[k].into(),
                behaviour: states[next[k]].into(),
                location: if next[k] == 1 { "field" } else { "burrow" }.into(),
                neighbours: close[k].iter().map(|&o| ids[o].to_string()).collect(),
            });
        }
        last = next;
    }
    let log = parse_records(records, Some(&catalog))?;
    let series = build_binary_series(&log, &catalog)?;

    let graph = discover(&series, &DiscoveryConfig { tau: 2, ..Default::default() })?.graph;
    let trained = train(&series, &graph, &TrainConfig { epochs: 5, ..Default::default() })?;
    let predictor = Predictor::neural(trained.params, graph)?;

    let cfg = SimulationConfig { mode: SimulationMode::Group, horizon: Some(20), seed: 7, ..Default::default() };
    let trace = simulate(&predictor, &series, &cfg)?;
    for (k, ind) in trace.series.individuals.iter().enumerate() {
        let line: String = trace.states(k).iter().map(|&s| states[s].chars().next().unwrap()).collect();
        println!("{:>4}: {line}", ind.id);
    }
    trace.write_csv(std::io::stdout().lock())?;
    Ok(())
}
