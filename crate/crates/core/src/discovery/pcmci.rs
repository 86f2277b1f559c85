use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::MultiSeries;
use crate::discovery::ci::{CiTester, LaggedVar};
use crate::discovery::graph::{CausalGraph, LaggedLink};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    /// Maximum lag.
    pub tau: usize,
    /// Significance level of both stages.
    pub alpha: f64,
    /// Largest conditioning set tried during parent selection.
    pub q_max: usize,
    /// MCI keeps at most this many of the target's other parents...
    pub max_conds_target: usize,
    /// ...and at most this many (shifted) parents of the source.
    pub max_conds_source: usize,
    /// Permutations used by the sparse-table fallback.
    pub permutations: usize,
    pub seed: u64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            tau: 5,
            alpha: 0.05,
            q_max: 3,
            max_conds_target: 4,
            max_conds_source: 2,
            permutations: 199,
            seed: 0,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 {
            return Err(Error::Config("tau must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha {} not in (0, 1]", self.alpha)));
        }
        Ok(())
    }

    fn tester(&self, series: &MultiSeries) -> CiTester {
        let mut t = CiTester::new(series, self.tau);
        t.permutations = self.permutations;
        t.seed = self.seed;
        t
    }
}

/// A surviving candidate parent with its latest test result.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub var: LaggedVar,
    pub statistic: f64,
    pub p_value: f64,
}

/// A conditioning set that was cut down to its strongest members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub source: usize,
    pub lag: usize,
    pub target: usize,
    pub dropped_target_parents: usize,
    pub dropped_source_parents: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub config: DiscoveryConfig,
    /// Candidate parents of every variable after parent selection.
    pub candidates: Vec<Vec<Candidate>>,
    pub truncations: Vec<Truncation>,
    pub strength_measure: String,
}

#[derive(Clone, Debug)]
pub struct Discovery {
    pub graph: CausalGraph,
    pub report: DiscoveryReport,
}

/// PC-style candidate selection for `target` over lags `1..=tau`.
///
/// Round `p` tests every remaining candidate conditioned on the `p`
/// strongest other candidates and removes those with `p_value > alpha`;
/// survivors are re-sorted by statistic, strongest first.
pub fn pc_select_parents(
    tester: &CiTester,
    n_vars: usize,
    target: usize,
    tau: usize,
    alpha: f64,
    q_max: usize,
) -> Result<Vec<Candidate>> {
    let y = LaggedVar::new(target, 0);
    let mut parents: Vec<Candidate> = (1..=tau)
        .flat_map(|lag| (0..n_vars).map(move |var| LaggedVar::new(var, lag)))
        .map(|var| Candidate {
            var,
            statistic: f64::INFINITY,
            p_value: 0.0,
        })
        .collect();
    for p in 0..=q_max {
        if parents.len() <= p {
            break;
        }
        let mut kept = Vec::with_capacity(parents.len());
        for c in &parents {
            let conds: Vec<LaggedVar> = parents
                .iter()
                .filter(|o| o.var != c.var)
                .take(p)
                .map(|o| o.var)
                .collect();
            let r = tester.test(c.var, y, &conds)?;
            if r.p_value <= alpha {
                kept.push(Candidate {
                    var: c.var,
                    statistic: r.statistic,
                    p_value: r.p_value,
                });
            }
        }
        sort_candidates(&mut kept);
        parents = kept;
    }
    Ok(parents)
}

fn sort_candidates(c: &mut [Candidate]) {
    c.sort_by(|a, b| {
        b.statistic
            .total_cmp(&a.statistic)
            .then(a.var.lag.cmp(&b.var.lag))
            .then(a.var.var.cmp(&b.var.var))
    });
}

/// MCI validation of every candidate link into a state variable.
///
/// `candidates[v]` holds the selected parents of variable `v`, strongest first.
pub fn mci_prune(
    tester: &CiTester,
    catalog: &crate::data::VariableCatalog,
    candidates: &[Vec<Candidate>],
    config: &DiscoveryConfig,
) -> Result<(CausalGraph, Vec<Truncation>)> {
    let per_target: Vec<(Vec<LaggedLink>, Vec<Truncation>)> = (0..catalog.n_states())
        .into_par_iter()
        .map(|j| mci_target(tester, candidates, j, config))
        .collect::<Result<_>>()?;
    let mut links = Vec::new();
    let mut truncations = Vec::new();
    for (l, t) in per_target {
        links.extend(l);
        truncations.extend(t);
    }
    Ok((CausalGraph::new(catalog.clone(), config.tau, links)?, truncations))
}

fn mci_target(
    tester: &CiTester,
    candidates: &[Vec<Candidate>],
    target: usize,
    config: &DiscoveryConfig,
) -> Result<(Vec<LaggedLink>, Vec<Truncation>)> {
    let y = LaggedVar::new(target, 0);
    let mut links = Vec::new();
    let mut truncations = Vec::new();
    for c in &candidates[target] {
        let x = c.var;
        let target_parents: Vec<LaggedVar> = candidates[target]
            .iter()
            .map(|o| o.var)
            .filter(|&v| v != x)
            .collect();
        let source_parents: Vec<LaggedVar> = candidates[x.var]
            .iter()
            .map(|o| LaggedVar::new(o.var.var, o.var.lag + x.lag))
            .filter(|v| *v != x && !target_parents.contains(v))
            .collect();
        let dropped_t = target_parents.len().saturating_sub(config.max_conds_target);
        let dropped_s = source_parents.len().saturating_sub(config.max_conds_source);
        if dropped_t + dropped_s > 0 {
            truncations.push(Truncation {
                source: x.var,
                lag: x.lag,
                target,
                dropped_target_parents: dropped_t,
                dropped_source_parents: dropped_s,
            });
        }
        let mut conds: Vec<LaggedVar> = target_parents
            .into_iter()
            .take(config.max_conds_target)
            .collect();
        conds.extend(source_parents.into_iter().take(config.max_conds_source));
        let r = tester.test(x, y, &conds)?;
        if r.p_value <= config.alpha {
            links.push(LaggedLink {
                source: x.var,
                lag: x.lag,
                target,
                strength: r.statistic,
                p_value: r.p_value,
            });
        }
    }
    Ok((links, truncations))
}

/// Parent selection for every variable followed by MCI validation of links into states.
pub fn discover(series: &MultiSeries, config: &DiscoveryConfig) -> Result<Discovery> {
    config.validate()?;
    if series.total_rows() == 0 {
        return Err(Error::EmptySeries);
    }
    let tester = config.tester(series);
    let n_vars = series.width();
    let candidates: Vec<Vec<Candidate>> = (0..n_vars)
        .into_par_iter()
        .map(|v| pc_select_parents(&tester, n_vars, v, config.tau, config.alpha, config.q_max))
        .collect::<Result<_>>()?;
    let (graph, truncations) = mci_prune(&tester, &series.catalog, &candidates, config)?;
    Ok(Discovery {
        graph,
        report: DiscoveryReport {
            config: config.clone(),
            candidates,
            truncations,
            strength_measure: "conditional mutual information (nats)".into(),
        },
    })
}

/// Parent selection for a single target with a fresh tester.
pub fn select_parents(series: &MultiSeries, target: usize, config: &DiscoveryConfig) -> Result<Vec<Candidate>> {
    config.validate()?;
    let tester = config.tester(series);
    pc_select_parents(&tester, series.width(), target, config.tau, config.alpha, config.q_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{PlantedTerm, SyntheticModel, VariableCatalog};

    fn single_parent_model() -> SyntheticModel {
        // Context c0 (index 3) drives state 1 at lag 2.
        let cat = VariableCatalog::synthetic(3, 2).unwrap();
        SyntheticModel::new(
            cat,
            2,
            0.05,
            vec![0.0, -2.0, 0.0],
            vec![PlantedTerm { source: 3, lag: 2, target: 1, weight: 4.0 }],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn planted_single_parent_is_selected() {
        let s = single_parent_model().sample(3000, 1, 4).unwrap();
        let cfg = DiscoveryConfig { tau: 3, alpha: 0.01, ..Default::default() };
        let parents = select_parents(&s, 1, &cfg).unwrap();
        assert!(parents.iter().any(|c| c.var == LaggedVar::new(3, 2)), "{parents:?}");
        assert_eq!(parents[0].var, LaggedVar::new(3, 2));
    }

    #[test]
    fn q_max_zero_is_unconditional_screening() {
        let s = single_parent_model().sample(1500, 1, 5).unwrap();
        let cfg = DiscoveryConfig { tau: 2, alpha: 0.05, q_max: 0, ..Default::default() };
        let parents = select_parents(&s, 1, &cfg).unwrap();
        let tester = CiTester::new(&s, 2);
        let mut expected = Vec::new();
        for lag in 1..=2 {
            for var in 0..s.width() {
                let r = tester.test(LaggedVar::new(var, lag), LaggedVar::new(1, 0), &[]).unwrap();
                if r.p_value <= 0.05 {
                    expected.push(LaggedVar::new(var, lag));
                }
            }
        }
        let mut got: Vec<LaggedVar> = parents.iter().map(|c| c.var).collect();
        got.sort();
        expected.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn empty_candidates_give_empty_graph() {
        let s = single_parent_model().sample(200, 1, 1).unwrap();
        let cfg = DiscoveryConfig::default();
        let tester = CiTester::new(&s, cfg.tau);
        let empty = vec![Vec::new(); s.width()];
        let (g, t) = mci_prune(&tester, &s.catalog, &empty, &cfg).unwrap();
        assert!(g.is_empty());
        assert!(t.is_empty());
    }

    #[test]
    fn window_excludes_longer_lags() {
        let s = single_parent_model().sample(3000, 1, 2).unwrap();
        let cfg = DiscoveryConfig { tau: 1, alpha: 0.01, ..Default::default() };
        let d = discover(&s, &cfg).unwrap();
        assert!(d.graph.links().iter().all(|l| l.lag == 1));
        assert!(!d.graph.contains(3, 2, 1));
    }
}
