//! Plants a lagged graph in synthetic data and recovers it.
//!
//! `cargo run --release --example synth_and_discover`

use causal_behaviour::data::{generate_synthetic, SynthConfig};
use causal_behaviour::discovery::{discover, precision_recall, prune_graph, DiscoveryConfig};

fn main() -> causal_behaviour::Result<()> {
    let cfg = SynthConfig { length: 5000, seed: 1, ..Default::default() };
    let (series, planted) = generate_synthetic(&cfg)?;
    let found = discover(&series, &DiscoveryConfig { tau: 5, alpha: 0.01, ..Default::default() })?;

    let cat = series.catalog.clone();
    println!("planted {} links, found {}", planted.len(), found.graph.len());
    for l in found.graph.links() {
        let mark = if planted.contains(l.source, l.lag, l.target) { ' ' } else { '*' };
        println!(
            "{mark} {:>3} -[{}]-> {:<3} strength {:.4}  p {:.1e}",
            cat.name(l.source),
            l.lag,
            cat.name(l.target),
            l.strength,
            l.p_value
        );
    }
    let (p, r) = precision_recall(&found.graph, &planted);
    println!("precision {p:.3} recall {r:.3}  (* = not planted)");
    println!("links with p <= 1e-6: {}", prune_graph(&found.graph, 1e-6).len());
    Ok(())
}
