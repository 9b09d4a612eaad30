//! Special functions, quadrature and dense Hermitian linear algebra.

pub mod bessel;
pub mod linalg;
pub mod panel;
pub mod quad;

use std::fmt::Debug;

/// Floating-point scalar accepted by the generic numerical kernels (f32 or f64).
pub trait Real:
    num_traits::Float + num_traits::FloatConst + num_traits::FromPrimitive + Debug + Send + Sync + 'static
{
    fn c(v: f64) -> Self {
        Self::from_f64(v).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}
