//! Numerical laboratory for Szegő-type trace asymptotics of ergodic lattice
//! operators.

pub mod decay_verify;
mod dense;
pub mod error;
pub mod functional_calculus;
pub mod harness;
pub mod lattice_models;
pub mod regions_traces;
pub mod stats;
pub mod szego_coefficients;

pub use error::{LabError, Result};
