//! Perturbative Wightman functions of a self-interacting scalar field on a
//! conformally perturbed (1+1)-dimensional lattice.
//!
//! The crate is `no_std` with `alloc`. File and command-line handling lives
//! in the companion `yf-cli` crate.
#![no_std]

extern crate alloc;

pub mod ccr_algebra;
pub mod graphs;
pub mod lattice;
pub mod propagators;
pub mod reconstruct;
pub mod scalar;
pub mod star_calc;
pub mod trees;

/// Crate version, recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
