use serde::{Deserialize, Serialize};

use crate::discovery::CausalGraph;

/// Node of the time-unrolled graph: a variable at a lag relative to the
/// predicted tick. Lag 0 is the predicted (target) layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Node {
    pub var: usize,
    pub lag: usize,
}

/// The causal graph expanded over `tau + 1` layers. Edges only run from
/// history nodes (lag >= 1) into state nodes of the target layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnrolledGraph {
    pub n_vars: usize,
    pub n_states: usize,
    pub tau: usize,
    pub nodes: Vec<Node>,
    pub edges: Vec<(Node, Node)>,
    /// Parents `(var, lag)` of each target state.
    parents: Vec<Vec<(usize, usize)>>,
}

impl UnrolledGraph {
    pub fn parents(&self, state: usize) -> &[(usize, usize)] {
        &self.parents[state]
    }

    /// Number of parents of `state` visible with `history` rows.
    pub fn parent_count(&self, state: usize, history: usize) -> usize {
        self.parents[state].iter().filter(|&&(_, lag)| lag <= history).count()
    }

    pub fn targets(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.n_states).map(|var| Node { var, lag: 0 })
    }
}

pub fn unroll_adjacency(graph: &CausalGraph) -> UnrolledGraph {
    let cat = graph.catalog();
    let (n_vars, n_states, tau) = (cat.n_vars(), cat.n_states(), graph.tau());
    let mut nodes: Vec<Node> = (0..n_states).map(|var| Node { var, lag: 0 }).collect();
    for lag in 1..=tau {
        nodes.extend((0..n_vars).map(|var| Node { var, lag }));
    }
    let mut parents = vec![Vec::new(); n_states];
    let mut edges = Vec::with_capacity(graph.len());
    for l in graph.links() {
        parents[l.target].push((l.source, l.lag));
        edges.push((
            Node {
                var: l.source,
                lag: l.lag,
            },
            Node {
                var: l.target,
                lag: 0,
            },
        ));
    }
    UnrolledGraph {
        n_vars,
        n_states,
        tau,
        nodes,
        edges,
        parents,
    }
}
