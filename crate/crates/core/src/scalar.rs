//! Scalar abstraction for the numeric evaluation layer.
//!
//! The symbolic core is exact; everything numeric (evaluation, grids,
//! finite differences, quadrature) is generic over [`Scalar`] so that f32
//! and f64 both work. Concrete aliases at the crate root default to f64.

use num_traits::{Float, FromPrimitive};

pub trait Scalar: Float + FromPrimitive + std::fmt::Debug + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + std::fmt::Debug + Send + Sync + 'static {}
