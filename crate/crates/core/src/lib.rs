//! Stochastic collocation for elliptic problems on randomly deformed domains.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyticity;
pub mod domain_map;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod runner;
pub mod sparse_grid;
pub mod uq;

pub use error::{Error, Result};
