//! Claims data model, line-delimited JSON ingestion and synthetic populations.

mod io;
pub mod synth;
mod types;

pub use io::{
    ingest_claims, read_ground_truth, write_claims, write_claims_file, write_ground_truth,
    GroundTruth, Record,
};
pub use synth::{generate_population, Population, SignalSpec, SyntheticConfig, SyntheticVocab};
pub use types::*;
