use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the crate.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + LowerExp + Display + Debug + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}
