//! Simulation and optimization toolkit for a transmon qubit whose energy
//! relaxation is limited by a bath of electric-field tunable two-level
//! defects (TLS).
//!
//! The crate is organized bottom-up:
//!
//! - [`environment`]: TLS defects, thermal and metastable fluctuators, and the
//!   qubit relaxation rate they produce at a given DC field.
//! - [`bath`]: seeded random generation of defect baths.
//! - [`measurement`] and [`spectroscopy`]: emulated T1 decay measurements
//!   (binomial shot noise, readout error, exponential fits) and swap
//!   spectroscopy rasters.
//! - [`optimizer`]: the two-pass DC-field sweep that maximizes T1.
//! - [`benchmark`]: paired reference/optimized monitoring, gain statistics
//!   and multi-frequency campaigns.
//! - [`loss_budget`]: analytic T1 limits imposed by the DC gate itself.
//! - [`config`] and [`runner`]: run configuration, persistence and dispatch
//!   used by the `tlsopt` command line tool.

pub mod bath;
pub mod benchmark;
pub mod config;
pub mod constants;
mod error;
pub mod environment;
pub mod fit;
pub mod fixtures;
pub mod io;
pub mod loss_budget;
pub mod measurement;
pub mod optimizer;
pub mod rng;
pub mod runner;
pub mod spectroscopy;
pub mod stats;

pub use error::{Error, Result};

/// Version string recorded in every run record.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
