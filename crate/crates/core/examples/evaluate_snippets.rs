//! Embeds real and simulated snippets, projects them with classical MDS,
//! clusters the projection and trains a real-versus-simulated discriminator.
//!
//! `cargo run --release --example evaluate_snippets`

use causal_behaviour::data::{generate_synthetic, SynthConfig};
use causal_behaviour::evaluation::{
    embed_snippets, kmeans, mds_project, train_discriminator, write_scatter_csv, DiscriminatorConfig,
};
use causal_behaviour::inference::{markov_baseline, Predictor};
use causal_behaviour::simulation::{simulate, SimulationConfig};

fn main() -> causal_behaviour::Result<()> {
    let (series, _) = generate_synthetic(&SynthConfig { length: 3000, seed: 4, ..Default::default() })?;
    let real = embed_snippets(&series, 6, 500, 0)?;

    let generators = [markov_baseline(&series)?, Predictor::Uniform { catalog: series.catalog.clone() }];
    for p in &generators {
        let trace = simulate(p, &series, &SimulationConfig { seed: 1, ..Default::default() })?;
        let fake = embed_snippets(&trace.series, 6, 500, 1)?;
        let report = train_discriminator(&real.vectors, &fake.vectors, &DiscriminatorConfig::default())?;
        println!("{:<8} discriminator accuracy {:.3}", p.kind(), report.accuracy);

        let all: Vec<Vec<f64>> = real.vectors.iter().chain(&fake.vectors).cloned().collect();
        let mds = mds_project(&all)?;
        let km = kmeans(&mds.coords, 4, 0)?;
        println!("         MDS stress {:.3}, k-means inertia {:.1} after {} iterations", mds.stress, km.inertia, km.iterations);
        for c in 0..4 {
            let members: Vec<usize> = (0..all.len()).filter(|&i| km.labels[i] == c).collect();
            let simulated = members.iter().filter(|&&i| i >= real.vectors.len()).count();
            println!("         cluster {c}: {} real, {simulated} simulated", members.len() - simulated);
        }
        if p.kind() == "uniform" {
            let sources: Vec<&str> = (0..all.len()).map(|i| if i < 500 { "real" } else { "simulated" }).collect();
            let mut csv = Vec::new();
            write_scatter_csv(&mut csv, &mds.coords, &km.labels, &sources)?;
            let text = String::from_utf8_lossy(&csv);
            println!("scatter preview:\n{}", text.lines().take(4).collect::<Vec<_>>().join("\n"));
        }
    }
    Ok(())
}
