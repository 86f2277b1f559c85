use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// What a context column encodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    /// The individual itself is at a location.
    Location,
    /// Some close neighbour is at a location.
    NeighborLocation,
    /// Some close neighbour performs a behaviour.
    NeighborBehavior,
    /// An exogenous binary feature with no derivation rule (synthetic data).
    Exogenous,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextVar {
    pub name: String,
    pub kind: ContextKind,
    /// The location or behaviour this column refers to.
    #[serde(rename = "ref")]
    pub subject: String,
}

/// Ordered set of state (behaviour) and context variables.
///
/// Variable indices `0..N` are states and `N..N+M` are contexts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCatalog", into = "RawCatalog")]
pub struct VariableCatalog {
    states: Vec<String>,
    contexts: Vec<ContextVar>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct RawCatalog {
    states: Vec<String>,
    contexts: Vec<ContextVar>,
}

impl TryFrom<RawCatalog> for VariableCatalog {
    type Error = Error;
    fn try_from(raw: RawCatalog) -> Result<Self> {
        VariableCatalog::new(raw.states, raw.contexts)
    }
}

impl From<VariableCatalog> for RawCatalog {
    fn from(c: VariableCatalog) -> Self {
        RawCatalog {
            states: c.states,
            contexts: c.contexts,
        }
    }
}

/// The user-facing catalog file: behaviours and locations; context columns are derived.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CatalogSpec {
    pub states: Vec<String>,
    #[serde(default)]
    pub locations: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exogenous: Vec<String>,
}

impl CatalogSpec {
    pub fn build(&self) -> Result<VariableCatalog> {
        VariableCatalog::from_spec(&self.states, &self.locations, &self.exogenous)
    }
}

impl VariableCatalog {
    pub fn new(states: Vec<String>, contexts: Vec<ContextVar>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::Catalog(format!(
                "at least 2 states required, got {}",
                states.len()
            )));
        }
        let mut index = HashMap::new();
        let names = states.iter().chain(contexts.iter().map(|c| &c.name));
        for (i, name) in names.enumerate() {
            if name.is_empty() {
                return Err(Error::Catalog(format!("variable {i} has an empty name")));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Catalog(format!("duplicate variable name {name:?}")));
            }
        }
        let state_set: HashSet<&str> = states.iter().map(String::as_str).collect();
        for c in &contexts {
            if c.kind == ContextKind::NeighborBehavior && !state_set.contains(c.subject.as_str()) {
                return Err(Error::Catalog(format!(
                    "context {:?} refers to unknown behaviour {:?}",
                    c.name, c.subject
                )));
            }
        }
        Ok(VariableCatalog {
            states,
            contexts,
            index,
        })
    }

    /// Derives the full catalog from behaviours and locations.
    ///
    /// Columns are laid out as states, then `loc:<L>` for every location, then
    /// `nbr_loc:<L>`, then `nbr:<behaviour>`, then exogenous names verbatim.
    pub fn from_spec(states: &[String], locations: &[String], exogenous: &[String]) -> Result<Self> {
        let mut seen = HashSet::new();
        for l in locations {
            if !seen.insert(l) {
                return Err(Error::Catalog(format!("duplicate location {l:?}")));
            }
        }
        let mut contexts = Vec::new();
        for l in locations {
            contexts.push(ContextVar {
                name: format!("loc:{l}"),
                kind: ContextKind::Location,
                subject: l.clone(),
            });
        }
        for l in locations {
            contexts.push(ContextVar {
                name: format!("nbr_loc:{l}"),
                kind: ContextKind::NeighborLocation,
                subject: l.clone(),
            });
        }
        if !locations.is_empty() {
            for s in states {
                contexts.push(ContextVar {
                    name: format!("nbr:{s}"),
                    kind: ContextKind::NeighborBehavior,
                    subject: s.clone(),
                });
            }
        }
        for e in exogenous {
            contexts.push(ContextVar {
                name: e.clone(),
                kind: ContextKind::Exogenous,
                subject: e.clone(),
            });
        }
        VariableCatalog::new(states.to_vec(), contexts)
    }

    /// Catalog with `n` states `s0..` and `m` exogenous contexts `c0..`.
    pub fn synthetic(n: usize, m: usize) -> Result<Self> {
        let states: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let exo: Vec<String> = (0..m).map(|i| format!("c{i}")).collect();
        Self::from_spec(&states, &[], &exo)
    }

    /// The 15 meerkat behaviours of the Meerkat Behaviour Recognition Dataset.
    pub fn meerkat_behaviours() -> Vec<String> {
        [
            "allogroom",
            "carry pup",
            "dig burrow",
            "foraging",
            "groom",
            "high sitting/standing (vigilant)",
            "human interaction",
            "interact with pup",
            "interacting with foreign object",
            "low sitting/standing (stationary)",
            "lying/resting (stationary)",
            "moving",
            "playfight",
            "raised guarding (vigilant)",
            "sunbathe",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn n_vars(&self) -> usize {
        self.states.len() + self.contexts.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn contexts(&self) -> &[ContextVar] {
        &self.contexts
    }

    pub fn name(&self, var: usize) -> &str {
        if var < self.states.len() {
            &self.states[var]
        } else {
            &self.contexts[var - self.states.len()].name
        }
    }

    pub fn names(&self) -> Vec<String> {
        (0..self.n_vars()).map(|v| self.name(v).to_string()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.index_of(name).filter(|&i| i < self.states.len())
    }

    pub fn is_state(&self, var: usize) -> bool {
        var < self.states.len()
    }

    /// Context variable at absolute index `var`, if it is a context.
    pub fn context(&self, var: usize) -> Option<&ContextVar> {
        var.checked_sub(self.states.len())
            .and_then(|c| self.contexts.get(c))
    }

    /// Absolute index of the context column of `kind` referring to `subject`.
    pub fn context_index(&self, kind: ContextKind, subject: &str) -> Option<usize> {
        self.contexts
            .iter()
            .position(|c| c.kind == kind && c.subject == subject)
            .map(|c| c + self.states.len())
    }

    pub fn locations(&self) -> Vec<&str> {
        self.contexts
            .iter()
            .filter(|c| c.kind == ContextKind::Location)
            .map(|c| c.subject.as_str())
            .collect()
    }

    /// Stable short hash of the catalog layout.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("catalog serializes");
        let digest = Sha256::digest(&json);
        hex::encode(&digest[..8])
    }

    /// Catalog with states reordered: new state `i` is old state `perm[i]`.
    pub fn permute_states(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_states() {
            return Err(Error::Catalog("permutation length mismatch".into()));
        }
        let states = perm.iter().map(|&p| self.states[p].clone()).collect();
        VariableCatalog::new(states, self.contexts.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_layout() {
        let c = VariableCatalog::from_spec(
            &["a".into(), "b".into()],
            &["x".into(), "y".into()],
            &[],
        )
        .unwrap();
        assert_eq!(c.n_states(), 2);
        assert_eq!(c.n_contexts(), 6);
        assert_eq!(
            c.names(),
            vec!["a", "b", "loc:x", "loc:y", "nbr_loc:x", "nbr_loc:y", "nbr:a", "nbr:b"]
        );
        assert_eq!(c.context_index(ContextKind::NeighborBehavior, "b"), Some(7));
        assert_eq!(c.state_index("loc:x"), None);
    }

    #[test]
    fn rejects_small_and_duplicate() {
        assert!(VariableCatalog::synthetic(1, 0).is_err());
        assert!(VariableCatalog::from_spec(&["a".into(), "a".into()], &[], &[]).is_err());
        assert!(VariableCatalog::from_spec(&["a".into(), "b".into()], &[], &["a".into()]).is_err());
    }

    #[test]
    fn serde_roundtrip_validates() {
        let c = VariableCatalog::synthetic(3, 2).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        let back: VariableCatalog = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        let bad = r#"{"states":["a"],"contexts":[]}"#;
        assert!(serde_json::from_str::<VariableCatalog>(bad).is_err());
    }

    #[test]
    fn meerkat_catalog_has_fifteen_states() {
        let c = VariableCatalog::from_spec(&VariableCatalog::meerkat_behaviours(), &[], &[]).unwrap();
        assert_eq!(c.n_states(), 15);
    }
}
