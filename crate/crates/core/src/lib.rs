//! Verification engine for 2-Riemannian geometry on boxes in R^n.

pub mod catalog;
pub mod cli;
pub mod connection;
pub mod curvature;
pub mod error;
pub mod exprlang;
pub mod fields;
pub mod flatness;
pub mod jets;
pub mod metric;
pub mod quadrature;
pub mod stationary;
pub mod twoinner;

pub use error::{Error, Result};
