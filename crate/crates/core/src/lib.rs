//! Robust finite mixtures of linear regressions with skew-t errors.
//!
//! The crate fits g-component mixture regression models whose component
//! errors follow the Azzalini skew-t distribution, or one of its normal,
//! Student-t and skew-normal special cases, by an ECM algorithm built on the
//! normal / truncated-normal / gamma hierarchical representation of the
//! skew-t. It also ships the Monte Carlo harness used to compare those four
//! error families.

// `!(x > 0.0)` is the NaN-rejecting form used by every domain check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod em;
pub mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod numerics;

pub use error::{Error, Result};
