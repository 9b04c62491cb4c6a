//! Experiment driver for variance-optimal shadow post-processing: builds
//! the product-observable and Pauli-sum families, runs (theta, N) sweeps in
//! parallel, and emits CSV tables, scaling fits, JSON reports and SVG
//! charts.

pub mod check;
pub mod config;
pub mod error;
pub mod experiments;
pub mod inputs;
pub mod report;
pub mod svg;
pub mod sweep;
