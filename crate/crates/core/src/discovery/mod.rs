//! Lagged causal structure discovery: candidate-parent selection followed by
//! momentary conditional independence (MCI) validation.

mod ci;
mod graph;
mod pcmci;

pub use ci::{cmi_from_strata, g_test_p_value, lagged_cmi, CiTestResult, CiTester, LaggedVar, Stratum};
pub use graph::{precision_recall, CausalGraph, GraphJson, LaggedLink, LinkJson};
pub use pcmci::{
    discover, mci_prune, pc_select_parents, select_parents, Candidate, Discovery, DiscoveryConfig,
    DiscoveryReport, Truncation,
};

/// Subgraph of links with `p_value <= alpha_strict`.
pub fn prune_graph(graph: &CausalGraph, alpha_strict: f64) -> CausalGraph {
    graph.prune(alpha_strict)
}
