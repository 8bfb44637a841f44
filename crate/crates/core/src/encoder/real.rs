use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Scalar type the encoder math is written against. Training runs in `f32`;
/// `f64` exists so gradients can be checked against finite differences.
pub trait Real: Float + FromPrimitive + Sum + Debug + Default + Send + Sync + 'static {
    fn erf(self) -> Self;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap()
    }
}

impl Real for f32 {
    fn erf(self) -> Self {
        libm::erff(self)
    }
}

impl Real for f64 {
    fn erf(self) -> Self {
        libm::erf(self)
    }
}
