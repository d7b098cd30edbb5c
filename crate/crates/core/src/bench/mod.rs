//! Experiment harness: repeated stratified 75/25 splits, all ten models per
//! repetition, and table output.

mod config;
mod run;
mod synth;
mod table;

pub use config::{DatasetSource, DatasetSpec, ExperimentConfig, ModelKind, TableFormat};
pub use run::{
    load_dataset, run_experiment, run_repetition, DatasetError, ExperimentOutcome, RepetitionAudit,
    RepetitionResult, VariantAudit,
};
pub use synth::{generate_synthetic, SyntheticSpec};
pub use table::{emit_table, write_table, ModelResult, ResultsTable, TableRow};
