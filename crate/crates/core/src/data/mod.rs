//! Variable catalogs, event-log ingestion, binary series and synthetic data.

mod catalog;
mod events;
pub mod io;
mod series;
mod synth;

pub use catalog::{CatalogSpec, ContextKind, ContextVar, VariableCatalog};
pub use events::{parse_records, read_records_csv, read_records_jsonl, EventLog, RawRecord};
pub use series::{
    active_state, build_binary_series, build_binary_series_segmented, deduplicate, relabel, split,
    IndividualSeries, MultiSeries, Window,
};
pub(crate) use synth::sample_index;
pub use synth::{
    generate_synthetic, generate_synthetic_with_model, PlantedTerm, SynthConfig, SyntheticModel,
};
