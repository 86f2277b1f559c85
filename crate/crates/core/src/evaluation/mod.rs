//! Prediction metrics, snippet embeddings with MDS and k-means, the
//! real-versus-simulated discriminator, and behaviour-flow export.

mod discriminator;
mod embedding;
mod metrics;

use std::io::Write;

pub use discriminator::{train_discriminator, DiscriminatorConfig, DiscriminatorReport, MAX_CLASS_RATIO};
pub use embedding::{classical_mds, embed_snippets, kmeans, mds_project, KMeans, MdsProjection, SnippetEmbedding, KMEANS_MAX_ITER};
pub use metrics::{
    accuracy, accuracy_all_offsets, evaluate_predictions, mutual_information, sankey_flows, series_flows,
    ConfusionCounts, FlowMatrix, MutualInformation, PredictionEvaluation, SankeyJson, SankeyLink,
};

use crate::error::{Error, Result};

/// `x,y,cluster,source` rows for external plotting.
pub fn write_scatter_csv<W: Write>(out: W, coords: &[[f64; 2]], clusters: &[usize], sources: &[&str]) -> Result<()> {
    if coords.len() != clusters.len() || coords.len() != sources.len() {
        return Err(Error::Invalid("scatter columns differ in length".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "cluster", "source"])?;
    for ((c, k), s) in coords.iter().zip(clusters).zip(sources) {
        w.write_record([c[0].to_string(), c[1].to_string(), k.to_string(), s.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<scatter csv>", e))?;
    Ok(())
}
