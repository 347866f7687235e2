//! Heat conduction in a thin plate heated through its two faces.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod convolution;
pub mod error;
pub mod fd_oracle;
pub mod planar;
pub mod plate;
pub mod spectrum;
pub mod transverse;
pub mod verify;

pub use error::{Error, Result};
