//! Counts behaviour transitions and prints them as Sankey JSON.
//!
//! `cargo run --example sankey_export`

use causal_behaviour::data::VariableCatalog;
use causal_behaviour::evaluation::sankey_flows;

fn main() -> causal_behaviour::Result<()> {
    let states = ["rest", "forage", "vigilance", "groom"];
    let catalog = VariableCatalog::from_spec(&states.map(String::from), &[], &[])?;
    let day = [0, 0, 1, 1, 1, 2, 1, 1, 3, 0, 0, 2, 2, 1, 0];
    let flows = sankey_flows(&catalog, &day)?;
    for (i, row) in flows.counts.iter().enumerate() {
        println!("{:>10} -> {:?}", flows.labels[i], row);
    }
    println!("{}", serde_json::to_string_pretty(&flows.to_json()).expect("serializable"));
    Ok(())
}
