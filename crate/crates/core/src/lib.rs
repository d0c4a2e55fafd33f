//! Wave-packet laboratory: the extension operator for the parabola, wave
//! packet decompositions, space-time L^p norms, the exponent polytope,
//! polynomial partitioning and decoupling diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoupling;
pub mod error;
pub mod exponents;
pub mod extension;
pub mod families;
pub mod grid;
pub mod harness;
pub mod norms;
pub mod partition;
pub mod profile;
pub mod wavepacket;

pub use error::{Result, WplError};
pub use grid::{SpaceTimeField, SpaceTimeGrid, Tube};
pub use profile::FrequencyProfile;
