//! File formats for series.
//!
//! Event logs come in as `time,individual,behaviour,location,neighbours` CSV or
//! JSONL. Binary series (synthetic data, simulation traces) use a wide CSV:
//!
//! ```text
//! # catalog: {"states":[...],"contexts":[...]}
//! # seed: 7
//! time,individual,neighbours,<variable>...[,simulated]
//! ```
//!
//! Comment lines carry `key: value` metadata; the catalog entry is required.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::data::catalog::{CatalogSpec, VariableCatalog};
use crate::data::events::{parse_records, read_records_csv, read_records_jsonl};
use crate::data::series::{build_binary_series, build_binary_series_segmented, IndividualSeries, MultiSeries};
use crate::error::{Error, Result};

const FIXED_COLUMNS: [&str; 3] = ["time", "individual", "neighbours"];

#[derive(Clone, Debug)]
pub struct SeriesFile {
    pub series: MultiSeries,
    pub metadata: BTreeMap<String, String>,
    /// Per individual, per tick: whether the row was produced by a simulator.
    pub simulated: Option<Vec<Vec<bool>>>,
}

pub fn write_series_csv<W: Write>(
    out: W,
    series: &MultiSeries,
    metadata: &BTreeMap<String, String>,
    simulated: Option<&[Vec<bool>]>,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    let io = |e| Error::io("<series csv>", e);
    writeln!(out, "# catalog: {}", serde_json::to_string(&series.catalog)?).map_err(io)?;
    for (k, v) in metadata {
        if k == "catalog" || k.contains(':') || v.contains('\n') {
            return Err(Error::Invalid(format!("unsupported metadata entry {k:?}")));
        }
        writeln!(out, "# {k}: {v}").map_err(io)?;
    }
    out.flush().map_err(io)?;
    let mut wtr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(series.catalog.names());
    if simulated.is_some() {
        header.push("simulated".into());
    }
    wtr.write_record(&header)?;
    for (k, ind) in series.individuals.iter().enumerate() {
        for t in 0..ind.len() {
            let mut rec = vec![
                ind.ticks[t].to_string(),
                ind.id.clone(),
                ind.neighbours[t].join(";"),
            ];
            rec.extend(ind.row(t).iter().map(|v| v.to_string()));
            if let Some(sim) = simulated {
                rec.push(u8::from(sim[k][t]).to_string());
            }
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush().map_err(io)?;
    Ok(())
}

pub fn read_series_csv(text: &str) -> Result<SeriesFile> {
    let mut metadata = BTreeMap::new();
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        body_start += line.len();
        if let Some((k, v)) = rest.split_once(':') {
            metadata.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let catalog: VariableCatalog = serde_json::from_str(
        metadata
            .remove("catalog")
            .ok_or_else(|| Error::Schema {
                row: 0,
                message: "series file has no catalog metadata".into(),
            })?
            .as_str(),
    )?;
    let mut rdr = csv::Reader::from_reader(text[body_start..].as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let names = catalog.names();
    let has_sim = header.last().map(String::as_str) == Some("simulated");
    let expected_len = FIXED_COLUMNS.len() + names.len() + usize::from(has_sim);
    if header.len() != expected_len
        || header[..3] != FIXED_COLUMNS
        || header[3..3 + names.len()] != names[..]
    {
        return Err(Error::Schema {
            row: 0,
            message: "series header does not match the catalog".into(),
        });
    }

    let width = names.len();
    let mut order: Vec<String> = Vec::new();
    let mut parts: BTreeMap<String, (Vec<i64>, Vec<u8>, Vec<Vec<String>>, Vec<bool>)> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row_err = |m: String| Error::Schema { row: i + 1, message: m };
        let time: i64 = rec[0].parse().map_err(|e| row_err(format!("bad time: {e}")))?;
        let id = rec[1].to_string();
        let entry = parts.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Default::default()
        });
        entry.0.push(time);
        for c in 0..width {
            match &rec[3 + c] {
                "0" => entry.1.push(0),
                "1" => entry.1.push(1),
                other => return Err(row_err(format!("non-binary value {other:?}"))),
            }
        }
        entry.2.push(
            rec[2]
                .split(';')
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect(),
        );
        if has_sim {
            entry.3.push(&rec[3 + width] == "1");
        }
    }
    let mut individuals = Vec::new();
    let mut simulated = Vec::new();
    for id in order {
        let (ticks, data, nbrs, sim) = parts.remove(&id).expect("id recorded");
        individuals.push(IndividualSeries::with_neighbours(id, ticks, data, width, nbrs)?);
        simulated.push(sim);
    }
    Ok(SeriesFile {
        series: MultiSeries::new(catalog, individuals)?,
        metadata,
        simulated: has_sim.then_some(simulated),
    })
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn load_catalog_spec(path: &Path) -> Result<VariableCatalog> {
    let spec: CatalogSpec = serde_json::from_str(&read_to_string(path)?)?;
    spec.build()
}

/// Loads any supported input: wide series CSV, event CSV or event JSONL.
pub fn load_series(path: &Path, catalog: Option<&VariableCatalog>, segment_gaps: bool) -> Result<SeriesFile> {
    let text = read_to_string(path)?;
    let is_jsonl = path.extension().is_some_and(|e| e == "jsonl");
    if !is_jsonl && text.starts_with('#') {
        let file = read_series_csv(&text)?;
        if let Some(c) = catalog {
            if *c != file.series.catalog {
                return Err(Error::Invalid("series catalog differs from the supplied catalog".into()));
            }
        }
        return Ok(file);
    }
    let rows = if is_jsonl {
        read_records_jsonl(text.as_bytes())?
    } else {
        read_records_csv(text.as_bytes())?
    };
    let log = parse_records(rows, catalog)?;
    let series = if segment_gaps {
        build_binary_series_segmented(&log, &log.catalog)?
    } else {
        build_binary_series(&log, &log.catalog)?
    };
    Ok(SeriesFile {
        series,
        metadata: BTreeMap::new(),
        simulated: None,
    })
}
