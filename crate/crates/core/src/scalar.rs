//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All algorithms are written against [`Real`], which is satisfied by `f32`
//! and `f64`. Decompositions come from nalgebra's `RealField`; conversions to
//! and from literals and file text go through num-traits.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the identification pipeline.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` literal or parsed value into this scalar type.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Real type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real types always convert to f64")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}
