//! Workbench for the 3CX surface code and the Bacon-Shor code sharing one
//! heavy-hex lattice: circuit generation, detector derivation, noise,
//! matching decoding and Bell-state figures of merit.

pub mod analysis;
pub mod blossom;
pub mod circuit;
pub mod circuitgen;
pub mod codes;
pub mod decoder;
pub mod dem;
pub mod error;
pub mod flow;
pub mod gf2;
pub mod lattice;
pub mod protocol;
pub mod sampler;
pub mod tableau;

pub use error::{Error, Result};
