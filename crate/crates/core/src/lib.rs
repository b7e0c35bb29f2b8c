//! Extinction and electromagnetically induced transparency of a weak probe
//! beam scattered by a single trapped ion.

pub mod atom;
pub mod config;
pub mod detection;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod output;
pub mod run;
pub mod scattering;
pub mod spectra;

pub use error::{Error, Result};
