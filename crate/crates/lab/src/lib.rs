//! Experiment drivers for the reduced three-field elasticity pencil:
//! configuration, convergence studies, spectral spread, eigenfunction export
//! and reference eigenvalues.

pub mod cli;
pub mod config;
pub mod convergence;
pub mod eigenfunction;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod reference;
pub mod spread;
pub mod svg;

pub use config::{ExperimentConfig, Overrides};
pub use error::{LabError, LabResult};
pub use pipeline::{solve_case, Case, CaseRecord, Solved};
