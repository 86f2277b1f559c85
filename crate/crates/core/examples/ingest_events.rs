//! Turns a small behaviour log into binary series, then drops repeated rows.
//!
//! `cargo run --example ingest_events`

use causal_behaviour::data::{build_binary_series, deduplicate, read_records_csv, parse_records, CatalogSpec};

const LOG: &str = "\
time,individual,behaviour,location,neighbours
0,ada,rest,burrow,bo
0,bo,rest,burrow,ada
1,ada,rest,burrow,bo
1,bo,forage,field,
2,ada,vigilance,burrow,
2,bo,forage,field,
3,ada,forage,field,bo
3,bo,forage,field,ada
";

fn main() -> causal_behaviour::Result<()> {
    let spec = CatalogSpec {
        states: vec!["rest".into(), "forage".into(), "vigilance".into()],
        locations: vec!["burrow".into(), "field".into()],
        exogenous: vec![],
    };
    let catalog = spec.build()?;
    let log = parse_records(read_records_csv(LOG.as_bytes())?, Some(&catalog))?;
    let series = build_binary_series(&log, &catalog)?;

    println!("columns: {}", catalog.names().join(" "));
    for ind in &series.individuals {
        println!("{}:", ind.id);
        for t in 0..ind.len() {
            println!("  t={} {:?}", ind.ticks[t], ind.row(t));
        }
    }
    let dedup = deduplicate(&series);
    for (a, b) in series.individuals.iter().zip(&dedup.individuals) {
        println!("{}: {} rows, {} after deduplication", a.id, a.len(), b.len());
    }
    Ok(())
}
