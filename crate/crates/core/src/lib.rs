//! Numerical toolkit for Hausdorff contents and Choquet-type quasi-norms on
//! dyadic grids.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: dyadic grids, cell sets, grid functions and samplers.
//! - [`content`]: the exact dyadic Hausdorff content of a cell set, computed
//!   by dynamic programming over the dyadic tree, plus a brute-force oracle.
//! - [`choquet`]: content distribution functions and the Choquet integral,
//!   `L^p` and Lorentz quasi-norms built on them.
//! - [`operators`]: the fractional maximal operator, the Riesz potential and
//!   Hedberg-type pointwise diagnostics.
//! - [`domains`]: John domains with explicit constants.
//! - [`interp`]: K-functional numerics for pairs of Choquet spaces.
//! - [`verify`]: experiment runners producing reproducible reports.

pub mod choquet;
pub mod content;
pub mod domains;
mod error;
pub mod grid;
pub mod interp;
pub mod operators;
pub mod verify;

pub use error::{Error, Result};
