use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Read};

use serde::{Deserialize, Serialize};

use crate::data::catalog::VariableCatalog;
use crate::error::{Error, Result};

/// One raw observation: what an individual did, and where, at one tick.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub time: i64,
    pub individual: String,
    pub behaviour: String,
    #[serde(default)]
    pub location: String,
    #[serde(default, deserialize_with = "neighbours_field")]
    pub neighbours: Vec<String>,
}

fn split_ids(s: &str) -> Vec<String> {
    s.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn neighbours_field<'de, D>(d: D) -> std::result::Result<Vec<String>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Ids {
        Joined(String),
        List(Vec<String>),
    }
    Ok(match Option::<Ids>::deserialize(d)? {
        None => Vec::new(),
        Some(Ids::Joined(s)) => split_ids(&s),
        Some(Ids::List(v)) => v,
    })
}

/// Validated behaviour log, sorted by individual then time.
#[derive(Clone, Debug)]
pub struct EventLog {
    pub catalog: VariableCatalog,
    pub records: Vec<RawRecord>,
}

impl EventLog {
    /// Ids in first-seen order of the sorted log.
    pub fn individuals(&self) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        for r in &self.records {
            if seen.last() != Some(&r.individual) {
                seen.push(r.individual.clone());
            }
        }
        seen
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record lookup by (time, individual).
    pub fn by_key(&self) -> HashMap<(i64, &str), &RawRecord> {
        self.records
            .iter()
            .map(|r| ((r.time, r.individual.as_str()), r))
            .collect()
    }
}

/// Validates raw rows into an [`EventLog`].
///
/// Without a catalog, one is inferred: behaviours and locations sorted by name.
pub fn parse_records(rows: Vec<RawRecord>, catalog: Option<&VariableCatalog>) -> Result<EventLog> {
    let catalog = match catalog {
        Some(c) => c.clone(),
        None => infer_catalog(&rows)?,
    };
    let locations: BTreeSet<&str> = catalog.locations().into_iter().collect();
    let mut seen: HashMap<(i64, &str), usize> = HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        if r.individual.is_empty() {
            return Err(Error::Schema {
                row: i,
                message: "empty individual id".into(),
            });
        }
        if catalog.state_index(&r.behaviour).is_none() {
            return Err(Error::Schema {
                row: i,
                message: format!("unknown behaviour {:?}", r.behaviour),
            });
        }
        if !r.location.is_empty() && !locations.contains(r.location.as_str()) {
            return Err(Error::Schema {
                row: i,
                message: format!("unknown location {:?}", r.location),
            });
        }
        if seen.insert((r.time, r.individual.as_str()), i).is_some() {
            return Err(Error::Conflict {
                individual: r.individual.clone(),
                time: r.time,
            });
        }
    }
    drop(seen);
    let mut records = rows;
    records.sort_by(|a, b| a.individual.cmp(&b.individual).then(a.time.cmp(&b.time)));
    Ok(EventLog { catalog, records })
}

fn infer_catalog(rows: &[RawRecord]) -> Result<VariableCatalog> {
    let states: BTreeSet<&str> = rows.iter().map(|r| r.behaviour.as_str()).collect();
    let locations: BTreeSet<&str> = rows
        .iter()
        .map(|r| r.location.as_str())
        .filter(|l| !l.is_empty())
        .collect();
    let states: Vec<String> = states.into_iter().map(String::from).collect();
    let locations: Vec<String> = locations.into_iter().map(String::from).collect();
    VariableCatalog::from_spec(&states, &locations, &[])
}

/// Reads `time,individual,behaviour,location,neighbours` CSV (header required).
pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for required in ["time", "individual", "behaviour"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Schema {
                row: 0,
                message: format!("missing column {required:?}"),
            });
        }
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<RawRecord>().enumerate() {
        out.push(rec.map_err(|e| Error::Schema {
            row: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Reads one JSON object per line with the CSV column names as keys.
pub fn read_records_jsonl<R: BufRead>(reader: R) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<jsonl>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Schema {
            row: i,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
