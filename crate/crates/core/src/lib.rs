//! Data-driven smooth goodness-of-fit test for the hidden component `Y` of an
//! additive convolution `X = Y + Z` with known noise law.

pub mod cli;
pub mod error;
pub mod measures;
pub mod nullmodel;
pub mod orthopoly;
pub mod quadrature;
pub mod simlab;
pub mod teststat;

pub use error::{Error, Result};
