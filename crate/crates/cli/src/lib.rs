//! Batch front end: JSON experiment configs in, JSON reports, CSV series and
//! SVG plots out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csv;
pub mod error;
pub mod plot;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::CliError;
pub use report::{Report, Status};
pub use run::{execute, write_outputs, Outcome, Targets};
