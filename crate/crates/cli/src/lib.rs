//! Files, processes and the command line around `exposlam-core`: dataset
//! layout (PNG frames, PFM depth, TUM ground truth, JSON metadata and
//! manifests), TOML experiment configs, the external-enhancer hook and the
//! five pipeline stages.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod external;
pub mod formats;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
