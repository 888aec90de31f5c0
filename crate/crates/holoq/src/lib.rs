//! Geometric phases of open quantum systems under cyclic adiabatic driving.

pub mod adiabatic;
pub mod error;
pub mod geophase;
pub mod models;
pub mod path;
pub mod spectral;
pub mod superop;

pub use error::{Error, Result};
