//! Experiment configuration, ensemble orchestration, persistence, and
//! plot-data emission. Everything here runs on `Real = f64`.

pub mod config;
pub mod ensemble;
pub mod persist;
pub mod plots;

pub use config::{load_config, ExperimentConfig};
pub use ensemble::{run_ensemble, EnsembleReport};
