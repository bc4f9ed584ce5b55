//! Signal generation, experiments and persistence.

pub mod experiment;
pub mod io;
pub mod signal;

pub use experiment::{
    decode_signal, l2_distance, records_csv, run_experiment, run_trial, score, trial_seeds, wilson_interval,
    write_records_csv, DecoderSpec, ExperimentConfig, ExperimentResult, Summary, TrialRecord, SCHEMA_VERSION,
};
pub use signal::{gen_signal, Signal, SignalSpec, SupportModel, TailModel, ValueModel};
