use std::collections::HashMap;

use crate::data::catalog::{ContextKind, VariableCatalog};
use crate::data::events::EventLog;
use crate::error::{Error, Result};

/// A view over consecutive binary rows, oldest first.
#[derive(Clone, Copy, Debug)]
pub struct Window<'a> {
    data: &'a [u8],
    width: usize,
}

impl<'a> Window<'a> {
    pub fn new(data: &'a [u8], width: usize) -> Result<Self> {
        if width == 0 || data.len() % width != 0 {
            return Err(Error::Window(format!(
                "buffer of {} values is not a whole number of rows of width {width}",
                data.len()
            )));
        }
        Ok(Window { data, width })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &'a [u8] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    /// Row `lag` steps back from the predicted tick: lag 1 is the last row.
    pub fn at_lag(&self, lag: usize) -> &'a [u8] {
        self.row(self.len() - lag)
    }

    pub fn value(&self, var: usize, lag: usize) -> u8 {
        self.at_lag(lag)[var]
    }

    /// The most recent `n` rows.
    pub fn last(&self, n: usize) -> Window<'a> {
        let start = (self.len() - n) * self.width;
        Window {
            data: &self.data[start..],
            width: self.width,
        }
    }

    pub fn as_slice(&self) -> &'a [u8] {
        self.data
    }

    /// Checks that every row has exactly one active state among the first `n_states` columns.
    pub fn check_one_hot(&self, n_states: usize) -> Result<()> {
        for i in 0..self.len() {
            if active_state(&self.row(i)[..n_states]).is_none() {
                return Err(Error::Window(format!("row {i} is not one-hot over states")));
            }
        }
        Ok(())
    }
}

/// Index of the single active state, or `None` if the row is not one-hot.
pub fn active_state(states: &[u8]) -> Option<usize> {
    let mut found = None;
    for (i, &v) in states.iter().enumerate() {
        match v {
            0 => {}
            1 if found.is_none() => found = Some(i),
            _ => return None,
        }
    }
    found
}

/// Binary series of one individual: `T` rows of catalog width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndividualSeries {
    pub id: String,
    pub ticks: Vec<i64>,
    data: Vec<u8>,
    /// Close individuals at each tick.
    pub neighbours: Vec<Vec<String>>,
}

impl IndividualSeries {
    pub fn new(id: impl Into<String>, ticks: Vec<i64>, data: Vec<u8>, width: usize) -> Result<Self> {
        let neighbours = vec![Vec::new(); ticks.len()];
        Self::with_neighbours(id, ticks, data, width, neighbours)
    }

    pub fn with_neighbours(
        id: impl Into<String>,
        ticks: Vec<i64>,
        data: Vec<u8>,
        width: usize,
        neighbours: Vec<Vec<String>>,
    ) -> Result<Self> {
        if data.len() != ticks.len() * width || neighbours.len() != ticks.len() {
            return Err(Error::Invalid(format!(
                "series shape mismatch: {} ticks, {} values, width {width}",
                ticks.len(),
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Invalid("series values must be 0 or 1".into()));
        }
        Ok(IndividualSeries {
            id: id.into(),
            ticks,
            data,
            neighbours,
        })
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn width(&self) -> usize {
        if self.ticks.is_empty() {
            0
        } else {
            self.data.len() / self.ticks.len()
        }
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn row(&self, t: usize) -> &[u8] {
        let w = self.width();
        &self.data[t * w..(t + 1) * w]
    }

    /// Rows `start..end` as a window.
    pub fn window(&self, start: usize, end: usize) -> Window<'_> {
        let w = self.width();
        Window {
            data: &self.data[start * w..end * w],
            width: w,
        }
    }

    pub fn state_at(&self, t: usize, n_states: usize) -> usize {
        active_state(&self.row(t)[..n_states]).expect("validated one-hot series")
    }

    /// Column `var` over time.
    pub fn column(&self, var: usize) -> Vec<u8> {
        let w = self.width();
        (0..self.len()).map(|t| self.data[t * w + var]).collect()
    }

    fn slice(&self, start: usize, end: usize) -> IndividualSeries {
        let w = self.width();
        IndividualSeries {
            id: self.id.clone(),
            ticks: self.ticks[start..end].to_vec(),
            data: self.data[start * w..end * w].to_vec(),
            neighbours: self.neighbours[start..end].to_vec(),
        }
    }
}

/// Aligned binary series for a set of individuals over one catalog.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiSeries {
    pub catalog: VariableCatalog,
    pub individuals: Vec<IndividualSeries>,
}

impl MultiSeries {
    /// Builds and validates: unique ids, catalog width, one-hot states.
    pub fn new(catalog: VariableCatalog, individuals: Vec<IndividualSeries>) -> Result<Self> {
        let s = MultiSeries {
            catalog,
            individuals,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let width = self.catalog.n_vars();
        let n = self.catalog.n_states();
        let mut ids = std::collections::HashSet::new();
        for ind in &self.individuals {
            if !ids.insert(ind.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate individual {:?}", ind.id)));
            }
            if !ind.is_empty() && ind.width() != width {
                return Err(Error::Invalid(format!(
                    "individual {:?} has width {}, catalog has {width}",
                    ind.id,
                    ind.width()
                )));
            }
            if ind.ticks.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Invalid(format!(
                    "ticks of {:?} are not strictly increasing",
                    ind.id
                )));
            }
            for t in 0..ind.len() {
                if active_state(&ind.row(t)[..n]).is_none() {
                    return Err(Error::Invalid(format!(
                        "individual {:?} row {t} is not one-hot over states",
                        ind.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.catalog.n_vars()
    }

    pub fn total_rows(&self) -> usize {
        self.individuals.iter().map(|i| i.len()).sum()
    }

    pub fn get(&self, id: &str) -> Option<&IndividualSeries> {
        self.individuals.iter().find(|i| i.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.individuals.iter().map(|i| i.id.as_str()).collect()
    }

    /// Per-individual concatenation of `self` followed by `other`.
    pub fn concat(&self, other: &MultiSeries) -> Result<MultiSeries> {
        if self.catalog != other.catalog {
            return Err(Error::Invalid("catalog mismatch".into()));
        }
        let mut out = self.individuals.clone();
        for ind in &other.individuals {
            match out.iter_mut().find(|i| i.id == ind.id) {
                Some(a) => {
                    a.ticks.extend_from_slice(&ind.ticks);
                    a.data.extend_from_slice(&ind.data);
                    a.neighbours.extend_from_slice(&ind.neighbours);
                }
                None => out.push(ind.clone()),
            }
        }
        MultiSeries::new(self.catalog.clone(), out)
    }
}

/// Turns an event log into one binary series per individual.
///
/// Fails on any tick gap; see [`build_binary_series_segmented`].
pub fn build_binary_series(log: &EventLog, catalog: &VariableCatalog) -> Result<MultiSeries> {
    build(log, catalog, false)
}

/// Like [`build_binary_series`] but splits individuals at tick gaps into
/// segments named `<id>@<first tick>`.
pub fn build_binary_series_segmented(log: &EventLog, catalog: &VariableCatalog) -> Result<MultiSeries> {
    build(log, catalog, true)
}

fn build(log: &EventLog, catalog: &VariableCatalog, segment: bool) -> Result<MultiSeries> {
    let width = catalog.n_vars();
    let lookup = log.by_key();
    let mut individuals: Vec<IndividualSeries> = Vec::new();
    let mut current: Option<(String, Vec<i64>, Vec<u8>, Vec<Vec<String>>)> = None;
    let flush = |cur: Option<(String, Vec<i64>, Vec<u8>, Vec<Vec<String>>)>,
                     out: &mut Vec<IndividualSeries>|
     -> Result<()> {
        if let Some((id, ticks, data, nbrs)) = cur {
            out.push(IndividualSeries::with_neighbours(id, ticks, data, width, nbrs)?);
        }
        Ok(())
    };

    for (i, r) in log.records.iter().enumerate() {
        let state = catalog.state_index(&r.behaviour).ok_or_else(|| Error::Schema {
            row: i,
            message: format!("unknown behaviour {:?}", r.behaviour),
        })?;
        let mut row = vec![0u8; width];
        row[state] = 1;
        if !r.location.is_empty() {
            let col = catalog
                .context_index(ContextKind::Location, &r.location)
                .ok_or_else(|| Error::Schema {
                    row: i,
                    message: format!("unknown location {:?}", r.location),
                })?;
            row[col] = 1;
        }
        for nb in &r.neighbours {
            let Some(other) = lookup.get(&(r.time, nb.as_str())) else {
                continue;
            };
            if !other.location.is_empty() {
                if let Some(col) = catalog.context_index(ContextKind::NeighborLocation, &other.location) {
                    row[col] = 1;
                }
            }
            if let Some(col) = catalog.context_index(ContextKind::NeighborBehavior, &other.behaviour) {
                row[col] = 1;
            }
        }

        let continues = match &current {
            Some((_, ticks, _, _)) => {
                let same = log.records[i - 1].individual == r.individual;
                let last = *ticks.last().expect("segment is never empty");
                if same && r.time != last + 1 {
                    if !segment {
                        return Err(Error::Gap {
                            individual: r.individual.clone(),
                            from: last,
                            to: r.time,
                        });
                    }
                    false
                } else {
                    same
                }
            }
            None => false,
        };
        if !continues {
            flush(current.take(), &mut individuals)?;
            let id = if segment {
                format!("{}@{}", r.individual, r.time)
            } else {
                r.individual.clone()
            };
            current = Some((id, Vec::new(), Vec::new(), Vec::new()));
        }
        let (_, ticks, data, nbrs) = current.as_mut().expect("segment just opened");
        ticks.push(r.time);
        data.extend_from_slice(&row);
        nbrs.push(r.neighbours.clone());
    }
    flush(current, &mut individuals)?;
    MultiSeries::new(catalog.clone(), individuals)
}

/// Drops every tick whose full row equals the preceding row of the same individual.
pub fn deduplicate(series: &MultiSeries) -> MultiSeries {
    let individuals = series
        .individuals
        .iter()
        .map(|ind| {
            let w = ind.width();
            let mut ticks = Vec::new();
            let mut data = Vec::new();
            let mut nbrs = Vec::new();
            for t in 0..ind.len() {
                if t > 0 && ind.row(t) == ind.row(t - 1) {
                    continue;
                }
                ticks.push(ind.ticks[t]);
                data.extend_from_slice(ind.row(t));
                nbrs.push(ind.neighbours[t].clone());
            }
            IndividualSeries::with_neighbours(ind.id.clone(), ticks, data, w, nbrs)
                .expect("subset of a valid series")
        })
        .collect();
    MultiSeries {
        catalog: series.catalog.clone(),
        individuals,
    }
}

/// Temporal split per individual; the earlier `fraction` of each series is train.
pub fn split(series: &MultiSeries, fraction: f64, tau: usize) -> Result<(MultiSeries, MultiSeries)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction {fraction} not in (0, 1)")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for ind in &series.individuals {
        let cut = (ind.len() as f64 * fraction).floor() as usize;
        let (a, b) = (cut, ind.len() - cut);
        if a < tau + 1 || b < tau + 1 {
            return Err(Error::TooShort(format!(
                "splitting {:?} ({} ticks) at {fraction} leaves {a}/{b} ticks, need at least {} each",
                ind.id,
                ind.len(),
                tau + 1
            )));
        }
        train.push(ind.slice(0, cut));
        test.push(ind.slice(cut, ind.len()));
    }
    Ok((
        MultiSeries {
            catalog: series.catalog.clone(),
            individuals: train,
        },
        MultiSeries {
            catalog: series.catalog.clone(),
            individuals: test,
        },
    ))
}

/// Relabels individuals by `map`; unmapped ids keep their name.
pub fn relabel(series: &MultiSeries, map: &HashMap<String, String>) -> Result<MultiSeries> {
    let rename = |id: &String| map.get(id).cloned().unwrap_or_else(|| id.clone());
    let individuals = series
        .individuals
        .iter()
        .map(|ind| {
            let mut ind = ind.clone();
            ind.id = rename(&ind.id);
            for n in ind.neighbours.iter_mut().flatten() {
                *n = rename(n);
            }
            ind
        })
        .collect();
    MultiSeries::new(series.catalog.clone(), individuals)
}
