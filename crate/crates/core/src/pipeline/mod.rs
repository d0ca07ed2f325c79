//! Experiment harness: manifests, speaker splits, training, frame-level
//! evaluation, seed-averaged trials and grid search.

pub mod config;
pub mod experiment;
pub mod grid;
pub mod manifest;
pub mod report;

pub use config::{DataConfig, ExperimentConfig, GridAxis};
pub use experiment::{
    build_reservoir, build_reservoir_for, evaluate, frame_recognition_rate, load_split, load_utterance, mean_std,
    run_trials, train_model, train_readout, EvalCounts, TrainedModel, TrialResult, Utterance,
};
pub use grid::{grid_points, grid_search, GridRow};
pub use manifest::{load_manifest, parse_manifest, split_by_speaker, DatasetManifest, ManifestEntry, Split};
pub use report::{config_columns, model_columns, write_grid_csv, write_model_csv, write_results, write_trial_csv};
