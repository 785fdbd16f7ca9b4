//! Data ingestion, export, and the synthetic-data generator.

pub mod adapter;
pub mod long_csv;
pub mod synth;

pub use adapter::{adapt_directory, parse_adapter_spec, AdaptSummary, AdapterSpec, LabelRule};
pub use long_csv::{
    infer_vocabulary, load_long_csv, load_variables, save_long_csv, save_variables,
    LoadedDataset, LongFormatRecord,
};
pub use synth::{mask_dropout, synthesize, SignalKind, SynthesisConfig};
