//! Stable, spatially contiguous sampling regions from scattered latency
//! measurements.
//!
//! The pipeline interpolates point measurements onto a regular grid,
//! aggregates the surface over hexagonal (or polygon) cells, partitions the
//! cells with SKATER regionalization and scores boundary stability across
//! temporal slices and bootstrap replicates.

pub mod aggregate;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod export;
pub mod geo;
pub mod ingest;
pub mod interpolate;
pub mod knn;
pub mod pipeline;
pub mod regionalize;
pub mod rng;
pub mod synth;
pub mod volatility;

pub use error::{Error, Result};
