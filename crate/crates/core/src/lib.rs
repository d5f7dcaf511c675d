//! Over-the-air federated learning with dithered lattice coding.
//!
//! Devices normalize, dither and lattice-quantize their model updates and
//! transmit simultaneously without channel knowledge. The server equalizes
//! the superposition, decodes an integer combination of the lattice points
//! and turns it into a weighted aggregate.

pub mod channel;
pub mod error;
pub mod fl;
pub mod harness;
pub mod lattice;
mod linalg;
pub mod receiver;
pub mod rng;
pub mod transceiver;

pub use error::{Error, Result};
