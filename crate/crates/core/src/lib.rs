//! Frequency dynamics of power systems with synchronous generators and
//! grid-following converters.
//!
//! The crate builds reduced network descriptions that couple SG internal
//! voltages with GFL current phasors, extracts equivalent inertia/governor
//! parameters for GFLs, and integrates multi-generator, center-of-inertia,
//! nonlinear reference and baseline models under load steps.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod caseio;
pub mod exec;
pub mod gfl;
pub mod linalg;
pub mod network;
pub mod sg;
pub mod sim;

pub use linalg::{CMatrix, ComplexValue, Phasor};
