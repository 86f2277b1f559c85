//! Autoregressive roll-out of a predictor.
//!
//! Individual mode replays every context column from the ground truth, so
//! other agents behave as recorded. Group mode advances all agents together:
//! at each tick every agent draws its next state from the previous-tick
//! snapshot, then the neighbour-behaviour columns are rebuilt from the new
//! states. Locations are always replayed. Each draw uses its own RNG stream
//! derived from the master seed, the agent id and the tick.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::io::write_series_csv;
use crate::data::{ContextKind, IndividualSeries, MultiSeries, VariableCatalog, Window};
use crate::error::{Error, Result};
use crate::inference::{choose, PredictMode, Predictor};
use crate::rng::{agent_tick_seed, rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulationMode {
    Individual,
    Group,
}

impl SimulationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SimulationMode::Individual => "individual",
            SimulationMode::Group => "group",
        }
    }
}

/// Simulated series plus the information needed to reproduce it.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationTrace {
    /// Rows as fed to the predictor: simulated states with the context actually used.
    pub series: MultiSeries,
    /// Per individual, per row: false for the seeded ground-truth window.
    pub simulated: Vec<Vec<bool>>,
    pub seed: u64,
    pub mode: SimulationMode,
    pub predictor_kind: String,
    pub predictor_hash: String,
}

impl SimulationTrace {
    pub fn states(&self, individual: usize) -> Vec<usize> {
        let ind = &self.series.individuals[individual];
        let n = self.series.catalog.n_states();
        (0..ind.len()).map(|t| ind.state_at(t, n)).collect()
    }

    pub fn metadata(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("seed".to_string(), self.seed.to_string()),
            ("mode".to_string(), self.mode.as_str().to_string()),
            ("predictor".to_string(), self.predictor_kind.clone()),
            ("predictor_hash".to_string(), self.predictor_hash.clone()),
        ])
    }

    /// Series CSV with a `simulated` column; readable by `data::io::load_series`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_series_csv(out, &self.series, &self.metadata(), Some(&self.simulated))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub mode: SimulationMode,
    /// Simulated ticks per individual; `None` covers the rest of the ground truth.
    pub horizon: Option<usize>,
    /// Restrict individual mode to one id.
    pub individual: Option<String>,
    /// Draw states (default) or take the most likely one.
    pub argmax: bool,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            mode: SimulationMode::Individual,
            horizon: None,
            individual: None,
            argmax: false,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    fn predict_mode(&self) -> PredictMode {
        if self.argmax {
            PredictMode::Argmax
        } else {
            PredictMode::Sample
        }
    }
}

fn check_catalog(predictor: &Predictor, truth: &MultiSeries) -> Result<()> {
    if predictor.catalog() != &truth.catalog {
        return Err(Error::CatalogMismatch {
            expected: predictor.catalog().hash(),
            found: truth.catalog.hash(),
        });
    }
    Ok(())
}

fn check_length(ind: &IndividualSeries, w: usize, horizon: usize) -> Result<()> {
    if ind.len() < w + horizon {
        return Err(Error::TooShort(format!(
            "{} has {} ticks, simulation needs {} ({w} initial + {horizon})",
            ind.id,
            ind.len(),
            w + horizon
        )));
    }
    Ok(())
}

fn draw(predictor: &Predictor, window: Window<'_>, mode: PredictMode, seed: u64, id: &str, tick: i64) -> Result<usize> {
    let p = predictor.distribution(window)?;
    let mut r = rng(agent_tick_seed(seed, id, tick));
    Ok(choose(&p, mode, &mut r))
}

fn with_state(row: &[u8], n_states: usize, state: usize) -> Vec<u8> {
    let mut out = row.to_vec();
    out[..n_states].fill(0);
    out[state] = 1;
    out
}

fn roll_out(
    predictor: &Predictor,
    ind: &IndividualSeries,
    horizon: usize,
    mode: PredictMode,
    seed: u64,
) -> Result<(IndividualSeries, Vec<bool>)> {
    let w = predictor.window_len();
    let n = predictor.n_states();
    let width = ind.width();
    check_length(ind, w, horizon)?;
    let mut data = ind.window(0, w).as_slice().to_vec();
    for t in w..w + horizon {
        let window = Window::new(&data[(t - w) * width..], width)?;
        let s = draw(predictor, window, mode, seed, &ind.id, ind.ticks[t])?;
        data.extend(with_state(ind.row(t), n, s));
    }
    let len = w + horizon;
    let series = IndividualSeries::with_neighbours(
        ind.id.clone(),
        ind.ticks[..len].to_vec(),
        data,
        width,
        ind.neighbours[..len].to_vec(),
    )?;
    let simulated = (0..len).map(|t| t >= w).collect();
    Ok((series, simulated))
}

fn trace(
    predictor: &Predictor,
    truth: &MultiSeries,
    parts: Vec<(IndividualSeries, Vec<bool>)>,
    seed: u64,
    mode: SimulationMode,
) -> Result<SimulationTrace> {
    let (individuals, simulated) = parts.into_iter().unzip();
    Ok(SimulationTrace {
        series: MultiSeries::new(truth.catalog.clone(), individuals)?,
        simulated,
        seed,
        mode,
        predictor_kind: predictor.kind().to_string(),
        predictor_hash: predictor.hash(),
    })
}

/// Rolls one individual forward with ground-truth context.
pub fn simulate_individual(
    predictor: &Predictor,
    truth: &MultiSeries,
    individual: &str,
    horizon: usize,
    seed: u64,
) -> Result<SimulationTrace> {
    simulate_individual_with(predictor, truth, individual, horizon, seed, PredictMode::Sample)
}

pub fn simulate_individual_with(
    predictor: &Predictor,
    truth: &MultiSeries,
    individual: &str,
    horizon: usize,
    seed: u64,
    mode: PredictMode,
) -> Result<SimulationTrace> {
    check_catalog(predictor, truth)?;
    let ind = truth
        .get(individual)
        .ok_or_else(|| Error::Invalid(format!("unknown individual {individual:?}")))?;
    let part = roll_out(predictor, ind, horizon, mode, seed)?;
    trace(predictor, truth, vec![part], seed, SimulationMode::Individual)
}

/// Full context rows for every agent at one tick.
///
/// State columns come from `states`; location and neighbour-location columns are
/// copied from `base_rows`; neighbour-behaviour columns are set from the states of
/// each agent's neighbours (`neighbours[k]` lists agent indices close to `k`).
pub fn rebuild_context(
    catalog: &VariableCatalog,
    states: &[usize],
    base_rows: &[&[u8]],
    neighbours: &[Vec<usize>],
) -> Result<Vec<Vec<u8>>> {
    let k = states.len();
    if base_rows.len() != k || neighbours.len() != k {
        return Err(Error::Invalid(format!(
            "{k} states, {} context rows and {} neighbour lists",
            base_rows.len(),
            neighbours.len()
        )));
    }
    let n = catalog.n_states();
    let nbr_cols: Vec<Option<usize>> = catalog
        .states()
        .iter()
        .map(|s| catalog.context_index(ContextKind::NeighborBehavior, s))
        .collect();
    let mut out = Vec::with_capacity(k);
    for a in 0..k {
        if states[a] >= n || base_rows[a].len() != catalog.n_vars() {
            return Err(Error::Invalid(format!("invalid state or row for agent {a}")));
        }
        let mut row = with_state(base_rows[a], n, states[a]);
        for col in nbr_cols.iter().flatten() {
            row[*col] = 0;
        }
        for &b in &neighbours[a] {
            let s = *states
                .get(b)
                .ok_or_else(|| Error::Invalid(format!("neighbour index {b} out of range")))?;
            if let Some(col) = nbr_cols[s] {
                row[col] = 1;
            }
        }
        out.push(row);
    }
    Ok(out)
}

/// Rolls all individuals forward together. Ticks must be aligned across individuals.
pub fn simulate_group(predictor: &Predictor, truth: &MultiSeries, horizon: usize, seed: u64) -> Result<SimulationTrace> {
    simulate_group_with(predictor, truth, horizon, seed, PredictMode::Sample)
}

pub fn simulate_group_with(
    predictor: &Predictor,
    truth: &MultiSeries,
    horizon: usize,
    seed: u64,
    mode: PredictMode,
) -> Result<SimulationTrace> {
    check_catalog(predictor, truth)?;
    let agents = &truth.individuals;
    let Some(first) = agents.first() else {
        return Err(Error::EmptySeries);
    };
    let w = predictor.window_len();
    let width = truth.width();
    let len = w + horizon;
    for a in agents {
        check_length(a, w, horizon)?;
        if a.ticks[..len] != first.ticks[..len] {
            return Err(Error::Invalid(format!(
                "group simulation needs aligned ticks; {} and {} differ",
                first.id, a.id
            )));
        }
    }
    let index: HashMap<&str, usize> = agents.iter().enumerate().map(|(k, a)| (a.id.as_str(), k)).collect();
    let mut data: Vec<Vec<u8>> = agents.iter().map(|a| a.window(0, w).as_slice().to_vec()).collect();
    for t in w..len {
        let states: Vec<usize> = agents
            .par_iter()
            .zip(data.par_iter())
            .map(|(a, d)| {
                let window = Window::new(&d[(t - w) * width..], width)?;
                draw(predictor, window, mode, seed, &a.id, a.ticks[t])
            })
            .collect::<Result<_>>()?;
        let base: Vec<&[u8]> = agents.iter().map(|a| a.row(t)).collect();
        let nbrs: Vec<Vec<usize>> = agents
            .iter()
            .map(|a| {
                a.neighbours[t]
                    .iter()
                    .filter_map(|id| index.get(id.as_str()).copied())
                    .collect()
            })
            .collect();
        for (d, row) in data.iter_mut().zip(rebuild_context(&truth.catalog, &states, &base, &nbrs)?) {
            d.extend(row);
        }
    }
    let parts = agents
        .iter()
        .zip(data)
        .map(|(a, d)| {
            let s = IndividualSeries::with_neighbours(
                a.id.clone(),
                a.ticks[..len].to_vec(),
                d,
                width,
                a.neighbours[..len].to_vec(),
            )?;
            Ok((s, (0..len).map(|t| t >= w).collect()))
        })
        .collect::<Result<Vec<_>>>()?;
    trace(predictor, truth, parts, seed, SimulationMode::Group)
}

/// Runs the configured simulation. Without an explicit horizon each
/// individual (or the group) is simulated to the end of its ground truth.
pub fn simulate(predictor: &Predictor, truth: &MultiSeries, config: &SimulationConfig) -> Result<SimulationTrace> {
    check_catalog(predictor, truth)?;
    let w = predictor.window_len();
    let mode = config.predict_mode();
    match config.mode {
        SimulationMode::Group => {
            let shortest = truth.individuals.iter().map(IndividualSeries::len).min().ok_or(Error::EmptySeries)?;
            let horizon = config.horizon.unwrap_or(shortest.saturating_sub(w));
            simulate_group_with(predictor, truth, horizon, config.seed, mode)
        }
        SimulationMode::Individual => {
            let selected: Vec<&IndividualSeries> = match &config.individual {
                Some(id) => vec![truth
                    .get(id)
                    .ok_or_else(|| Error::Invalid(format!("unknown individual {id:?}")))?],
                None => truth.individuals.iter().collect(),
            };
            if selected.is_empty() {
                return Err(Error::EmptySeries);
            }
            let parts = selected
                .par_iter()
                .map(|ind| {
                    let horizon = config.horizon.unwrap_or(ind.len().saturating_sub(w));
                    roll_out(predictor, ind, horizon, mode, config.seed)
                })
                .collect::<Result<Vec<_>>>()?;
            trace(predictor, truth, parts, config.seed, SimulationMode::Individual)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CatalogSpec;

    fn catalog() -> VariableCatalog {
        CatalogSpec {
            states: vec!["rest".into(), "play".into()],
            locations: vec!["den".into()],
            exogenous: vec![],
        }
        .build()
        .unwrap()
    }

    #[test]
    fn single_agent_has_no_neighbour_behaviour() {
        let cat = catalog();
        let base = vec![0, 0, 1, 1, 1, 1];
        let rows = rebuild_context(&cat, &[1], &[&base], &[vec![]]).unwrap();
        assert_eq!(rows[0], vec![0, 1, 1, 1, 0, 0]);
    }

    #[test]
    fn close_neighbour_behaviour_is_visible() {
        let cat = catalog();
        // columns: rest, play, loc:den, nbr_loc:den, nbr:rest, nbr:play
        let base = vec![1, 0, 1, 0, 0, 0];
        let rows = rebuild_context(&cat, &[0, 1], &[&base, &base], &[vec![1], vec![0]]).unwrap();
        assert_eq!(rows[0], vec![1, 0, 1, 0, 0, 1]);
        assert_eq!(rows[1], vec![0, 1, 1, 0, 1, 0]);
    }

    #[test]
    fn three_agents_asymmetric_closeness() {
        let cat = catalog();
        let base = vec![1, 0, 0, 0, 0, 0];
        // a sees b and c; b sees a; c sees nobody.
        let rows = rebuild_context(&cat, &[0, 1, 1], &[&base, &base, &base], &[vec![1, 2], vec![0], vec![]]).unwrap();
        assert_eq!(&rows[0][4..], &[0, 1]);
        assert_eq!(&rows[1][4..], &[1, 0]);
        assert_eq!(&rows[2][4..], &[0, 0]);
    }

    #[test]
    fn bad_neighbour_index_is_an_error() {
        let cat = catalog();
        let base = vec![1, 0, 0, 0, 0, 0];
        assert!(rebuild_context(&cat, &[0], &[&base], &[vec![3]]).is_err());
        assert!(rebuild_context(&cat, &[0], &[&base], &[]).is_err());
    }
}
