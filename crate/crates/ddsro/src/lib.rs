//! Data-driven stochastic robust optimization.
//!
//! Pipeline: ingest labeled uncertainty data (`dataio`), fit a Dirichlet
//! process mixture per class (`dpmm`), turn the surviving components into
//! budgeted polytopic uncertainty sets (`sets`), and solve the two-stage
//! stochastic robust program by decomposition (`robust`) on top of a
//! self-contained simplex/branch-and-bound kernel (`lp`). `models` carries
//! the concrete problem builders and comparator solvers.

pub mod dataio;
pub mod dpmm;
pub mod error;
pub mod linalg;
pub mod lp;
pub mod models;
pub mod robust;
pub mod sets;

pub use error::{Error, Result};
