//! File formats, reports and the command line for the calibration toolkit.
//!
//! The numerical work lives in [`calib_core`]; this crate adds prediction-log
//! IO ([`io`]), reliability diagrams and comparison tables ([`report`]), run
//! manifests ([`manifest`]), the three-arm experiment driver ([`experiment`])
//! and the `calib` binary's argument handling ([`cli`]).

pub mod cli;
pub mod error;
pub mod experiment;
pub mod io;
pub mod manifest;
pub mod report;

pub use calib_core as core;
pub use error::{Error, Result};
