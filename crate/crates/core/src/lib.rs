//! Exact finite-level models of type-space dynamics for p-adic algebraic groups.

pub mod borel;
pub mod error;
pub mod flows;
pub mod graph;
pub mod padic;
pub mod proj;
pub mod residues;
pub mod rng;
pub mod sl2;
pub mod types1;
pub mod verify;

pub use error::{Error, Result};
