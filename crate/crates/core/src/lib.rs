//! Wasserstein geometry on the circle and the first-order behaviour of
//! push-forwards by expanding circle maps.

pub mod error;
pub mod experiments;
pub mod fourier;
pub mod dynamics;
pub mod measures;
pub mod numeric;
pub mod operators;
pub mod transport;

pub use error::{Error, Result};
