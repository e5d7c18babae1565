//! Exact-arithmetic laboratory for rank-one transformations.
//!
//! `U` acts on functions by `U f = f o T^{-1}`, so `U` maps the indicator of
//! a level to the indicator of the level above it.

pub mod error;
pub mod real;
pub mod tower;
pub mod product;
pub mod spectral;
pub mod weak;

pub use error::{Error, Result};
pub use tower::*;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
