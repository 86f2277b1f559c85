use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::VariableCatalog;
use crate::error::{Error, Result};

/// Directed link `source` at `t + 1 - lag` to state `target` at `t + 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaggedLink {
    pub source: usize,
    pub lag: usize,
    pub target: usize,
    /// Conditional mutual information in nats.
    pub strength: f64,
    pub p_value: f64,
}

impl LaggedLink {
    pub fn key(&self) -> (usize, usize, usize) {
        (self.source, self.lag, self.target)
    }
}

/// Lagged causal graph over a catalog with maximum lag `tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalGraph {
    catalog: VariableCatalog,
    tau: usize,
    links: Vec<LaggedLink>,
}

impl CausalGraph {
    /// Validates and sorts links by (target, lag, source).
    pub fn new(catalog: VariableCatalog, tau: usize, mut links: Vec<LaggedLink>) -> Result<Self> {
        if tau == 0 {
            return Err(Error::Invalid("tau must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for l in &links {
            if l.source >= catalog.n_vars() {
                return Err(Error::Invalid(format!("link source {} out of range", l.source)));
            }
            if !catalog.is_state(l.target) {
                return Err(Error::Invalid(format!("link target {} is not a state", l.target)));
            }
            if l.lag == 0 || l.lag > tau {
                return Err(Error::Invalid(format!("link lag {} outside 1..={tau}", l.lag)));
            }
            if !(l.strength >= 0.0) || !(0.0..=1.0).contains(&l.p_value) {
                return Err(Error::Invalid(format!(
                    "link {:?} has invalid strength {} or p-value {}",
                    l.key(),
                    l.strength,
                    l.p_value
                )));
            }
            if !seen.insert(l.key()) {
                return Err(Error::Invalid(format!("duplicate link {:?}", l.key())));
            }
        }
        links.sort_by_key(|l| (l.target, l.lag, l.source));
        Ok(CausalGraph {
            catalog,
            tau,
            links,
        })
    }

    pub fn empty(catalog: VariableCatalog, tau: usize) -> Result<Self> {
        Self::new(catalog, tau, Vec::new())
    }

    pub fn catalog(&self) -> &VariableCatalog {
        &self.catalog
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn links(&self) -> &[LaggedLink] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// `(source, lag)` parents of state `target`.
    pub fn parents_of(&self, target: usize) -> Vec<(usize, usize)> {
        self.links
            .iter()
            .filter(|l| l.target == target)
            .map(|l| (l.source, l.lag))
            .collect()
    }

    pub fn contains(&self, source: usize, lag: usize, target: usize) -> bool {
        self.links.iter().any(|l| l.key() == (source, lag, target))
    }

    pub fn key_set(&self) -> BTreeSet<(usize, usize, usize)> {
        self.links.iter().map(LaggedLink::key).collect()
    }

    /// Keeps links with `p_value <= alpha_strict`.
    pub fn prune(&self, alpha_strict: f64) -> CausalGraph {
        self.filter(|l| l.p_value <= alpha_strict)
    }

    /// Keeps links with `strength >= min_strength`.
    pub fn filter_strength(&self, min_strength: f64) -> CausalGraph {
        self.filter(|l| l.strength >= min_strength)
    }

    /// Keeps links with `lag <= max_lag` (tau unchanged).
    pub fn restrict_lag(&self, max_lag: usize) -> CausalGraph {
        self.filter(|l| l.lag <= max_lag)
    }

    fn filter(&self, keep: impl Fn(&LaggedLink) -> bool) -> CausalGraph {
        CausalGraph {
            catalog: self.catalog.clone(),
            tau: self.tau,
            links: self.links.iter().copied().filter(|l| keep(l)).collect(),
        }
    }

    /// Same links with a different `tau` (must cover every lag).
    pub fn with_tau(&self, tau: usize) -> Result<CausalGraph> {
        CausalGraph::new(self.catalog.clone(), tau, self.links.clone())
    }

    /// Graph over a state-permuted catalog: new state `i` is old state `perm[i]`.
    pub fn permute_states(&self, perm: &[usize]) -> Result<CausalGraph> {
        let catalog = self.catalog.permute_states(perm)?;
        let n = self.catalog.n_states();
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let map = |v: usize| if v < n { inverse[v] } else { v };
        let links = self
            .links
            .iter()
            .map(|l| LaggedLink {
                source: map(l.source),
                target: map(l.target),
                ..*l
            })
            .collect();
        CausalGraph::new(catalog, self.tau, links)
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            tau: self.tau,
            variables: self.catalog.names(),
            catalog: self.catalog.clone(),
            links: self
                .links
                .iter()
                .map(|l| LinkJson {
                    source: self.catalog.name(l.source).to_string(),
                    lag: l.lag,
                    target: self.catalog.name(l.target).to_string(),
                    strength: l.strength,
                    p: l.p_value,
                })
                .collect(),
        }
    }

    pub fn from_json(json: GraphJson) -> Result<Self> {
        if json.variables != json.catalog.names() {
            return Err(Error::Invalid("graph variables disagree with its catalog".into()));
        }
        let resolve = |name: &str| {
            json.catalog
                .index_of(name)
                .ok_or_else(|| Error::Invalid(format!("unknown variable {name:?} in graph")))
        };
        let links = json
            .links
            .iter()
            .map(|l| {
                Ok(LaggedLink {
                    source: resolve(&l.source)?,
                    lag: l.lag,
                    target: resolve(&l.target)?,
                    strength: l.strength,
                    p_value: l.p,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        CausalGraph::new(json.catalog, json.tau, links)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("graph serializes") + "\n"
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(serde_json::from_str(s)?)
    }

    /// Stable short hash of catalog, tau and links.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json_string().as_bytes());
        hex::encode(&digest[..8])
    }
}

/// On-disk graph layout.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphJson {
    pub tau: usize,
    pub variables: Vec<String>,
    pub catalog: VariableCatalog,
    pub links: Vec<LinkJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkJson {
    pub source: String,
    pub lag: usize,
    pub target: String,
    pub strength: f64,
    pub p: f64,
}

/// Precision and recall of `found` against `truth` over (source, lag, target) triples.
pub fn precision_recall(found: &CausalGraph, truth: &CausalGraph) -> (f64, f64) {
    let f = found.key_set();
    let t = truth.key_set();
    let hit = f.intersection(&t).count() as f64;
    let precision = if f.is_empty() { 1.0 } else { hit / f.len() as f64 };
    let recall = if t.is_empty() { 1.0 } else { hit / t.len() as f64 };
    (precision, recall)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(source: usize, lag: usize, target: usize, p: f64) -> LaggedLink {
        LaggedLink {
            source,
            lag,
            target,
            strength: 0.1,
            p_value: p,
        }
    }

    fn cat() -> VariableCatalog {
        VariableCatalog::synthetic(3, 2).unwrap()
    }

    #[test]
    fn validation() {
        assert!(CausalGraph::new(cat(), 2, vec![link(0, 0, 1, 0.0)]).is_err());
        assert!(CausalGraph::new(cat(), 2, vec![link(0, 3, 1, 0.0)]).is_err());
        assert!(CausalGraph::new(cat(), 2, vec![link(0, 1, 3, 0.0)]).is_err());
        assert!(CausalGraph::new(cat(), 2, vec![link(5, 1, 0, 0.0)]).is_err());
        assert!(CausalGraph::new(cat(), 2, vec![link(0, 1, 1, 0.0), link(0, 1, 1, 0.5)]).is_err());
        assert!(CausalGraph::new(cat(), 2, vec![link(4, 2, 1, 0.0)]).is_ok());
    }

    #[test]
    fn prune_threshold() {
        let g = CausalGraph::new(
            cat(),
            3,
            vec![link(0, 1, 1, 0.001), link(1, 2, 0, 0.04), link(3, 3, 2, 0.2)],
        )
        .unwrap();
        assert_eq!(g.prune(0.01).len(), 1);
        assert_eq!(g.prune(0.2), g);
        assert!(g.prune(0.0).is_empty());
    }

    #[test]
    fn json_roundtrip() {
        let g = CausalGraph::new(cat(), 5, vec![link(3, 1, 0, 0.003)]).unwrap();
        let s = g.to_json_string();
        assert!(s.contains("\"source\": \"c0\""));
        assert!(s.contains("\"p\": 0.003"));
        assert_eq!(CausalGraph::from_json_str(&s).unwrap(), g);
    }

    #[test]
    fn precision_recall_counts() {
        let truth = CausalGraph::new(cat(), 2, vec![link(0, 1, 1, 0.0), link(1, 2, 2, 0.0)]).unwrap();
        let found = CausalGraph::new(cat(), 2, vec![link(0, 1, 1, 0.0), link(2, 1, 2, 0.0)]).unwrap();
        assert_eq!(precision_recall(&found, &truth), (0.5, 0.5));
    }
}
