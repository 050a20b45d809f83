//! Learn virtual prices for public facilities from known residential prices
//! over a geospatial POI graph, and use them to value residential blocks.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod exact;
pub mod geo;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
