pub mod cli;
pub mod config;
pub mod dip;
pub mod error;
pub mod features;
pub mod forecast;
pub mod gbdt;
pub mod ingest;
pub mod resample;
pub mod synthetic;

pub use error::{Error, Result};
