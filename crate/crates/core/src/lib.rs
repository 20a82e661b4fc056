//! Simulation and analysis of a linear-optics parity-code experiment: a
//! post-selected CNOT gate, bit-flip parity encoding, polarization tomography
//! and a parity-encoded teleportation model.

pub mod cnotgate;
pub mod codec;
pub mod error;
pub mod harness;
pub mod measure;
pub mod optics;
pub mod qcore;
pub mod teleport;
pub mod tomo;

pub use error::{Error, Result};
