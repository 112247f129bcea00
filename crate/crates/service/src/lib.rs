//! Study bundles, the batch runner and the HTTP review service built on
//! `lvam-core`.

// Negated comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod api;
pub mod bundle;
pub mod error;
pub mod runner;

pub use error::{Error, Result};
