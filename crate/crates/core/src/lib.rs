//! Recovery of a complex vector, up to a global phase, from interferometric
//! products `b_i conj(b_j)` of `b = A x` observed on the edges of a graph.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`). The
//! double-precision aliases below cover the common case.

// `!(x >= 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod graphs;
pub mod harness;
pub mod lifting;
pub mod model;
pub mod numerics;
pub mod scalar;

pub use error::{Error, Result};
pub use graphs::MeasurementGraph;
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type Matrix = numerics::CMatrix<f64>;
pub type EdgeData = model::EdgeData<f64>;
pub type ForwardOperator = model::ForwardOperator<f64>;
pub type EdgeNorms = numerics::EdgeNorms<f64>;
pub type EigenPair = numerics::EigenPair<f64>;
pub type SpectralReport = graphs::SpectralReport<f64>;
