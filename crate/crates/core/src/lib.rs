pub mod dataset;
pub mod error;
pub mod experiment;
pub mod explain;
pub mod gbdt;
pub mod metrics;
pub mod seeds;
pub mod synthgen;

pub use error::{Error, Result};
