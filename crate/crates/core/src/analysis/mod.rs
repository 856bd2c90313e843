//! Configuration, persistence, aggregation, loss landscapes and plots.

pub mod checkpoint;
pub mod config;
pub mod landscape;
pub mod metrics;
pub mod plots;
