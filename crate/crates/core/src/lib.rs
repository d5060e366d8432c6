//! Multi-parameter fractional and multifractional Brownian fields.
//!
//! The crate evaluates the covariance kernels of the Lévy fractional Brownian
//! field, the fractional Brownian sheet and their multifractional versions,
//! synthesizes exact Gaussian samples on lattices, and estimates regularity
//! and local self-similarity from samples or directly from kernels.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod hurst;
pub mod io;
pub mod kernels;
pub mod quad;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
