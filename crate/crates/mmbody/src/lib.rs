//! File formats, dataset layout and end-to-end pipeline over
//! [`mmbody_core`].

pub mod cli;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod fsutil;

pub use error::{Error, Result};
pub use mmbody_core as core;
