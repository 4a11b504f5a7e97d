//! Experiment runner for the perturbative field engine: configuration,
//! identity checks, the non-quasifree demonstration, reconstruction and
//! JSON reports.

pub mod config;
pub mod demo;
pub mod oracle;
pub mod recon;
pub mod report;
pub mod run;
pub mod suite;
pub mod wightman;

pub use yf_core;
