//! Core algorithms for synthetic mmWave body scans and multi-task body
//! composition regression.
//!
//! The crate is `no_std` with `alloc`. Enable the `std` feature for
//! `std::error::Error` impls and `parallel` for rayon-backed data
//! parallelism; results are identical either way.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod anthro;
pub mod error;
pub mod geom;
pub mod loss;
pub mod meshkit;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod par;
pub mod procgen;
pub mod rng;
pub mod scan;
pub mod surface;
pub mod targets;
pub mod train;
pub mod volgrid;

pub use error::{Error, Result};
