//! Verification laboratory for rescaling limits of expanding vacuum
//! spacetimes.
//!
//! The crate computes curvature of explicit Lorentzian metrics with an
//! exact symbolic kernel, applies type-III and type-II rescalings, measures
//! C0 convergence to limit metrics on compact sets, and checks the
//! constraint identities of the limiting geometry (vanishing scalar
//! curvature, trace-free effective stress-energy).

pub mod adm;
pub mod catalog;
pub mod cli;
pub mod expr;
pub mod geometry;
pub mod rescaling;
pub mod report;
pub mod scalar;

pub use expr::{parse, Bindings, EvalError, Expr, ParseError};
pub use geometry::{Chart, Frame, GeometryError, Metric, Signature, TensorField};

/// Default scalar type for numeric work.
pub type Real = f64;
/// Bindings over the default scalar.
pub type BindingsF64 = Bindings<f64>;
/// Bindings over f32, for callers that want the narrow type.
pub type BindingsF32 = Bindings<f32>;
