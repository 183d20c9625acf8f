//! Optimal placement of on-orbit servicing depots for satellite constellations.
//!
//! The pipeline computes low-thrust round-trip costs between candidate depot
//! slots and client satellites with a Q-law controller, prices each slot with a
//! Hohmann launch model expressed as equivalent mass to LEO, solves the binary
//! facility location program exactly, and refines each open depot in
//! continuous element space with differential evolution.

pub mod cost;
pub mod elements;
pub mod error;
pub mod launch;
pub mod oflp;
pub mod pipeline;
pub mod qlaw;
pub mod refine;
pub mod scenario;
pub mod slots;

pub use error::{Error, Result};
