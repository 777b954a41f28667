// Index-based loops mirror the matrix algebra they implement; suppressing
// the iterator-style lint keeps the kernels close to their derivations.
#![allow(clippy::needless_range_loop)]

pub mod arima;
pub mod data;
pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod garch;
pub mod guide;
pub mod harness;
pub mod linalg;
pub mod neural;
pub mod optimize;
pub mod pca;
pub mod rng;
pub mod synth;
pub mod var;
pub mod vasicek;

pub use error::{Error, Result};
