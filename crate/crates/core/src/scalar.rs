//! Floating-point scalar abstraction shared by every numerical routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the library is generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute tolerance for probability checks on user-supplied tables.
    const INPUT_TOL: f64;
    /// Absolute tolerance for probability checks on computed outputs.
    const OUTPUT_TOL: f64;

    /// Converts an `f64` literal into this type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count into this type.
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const INPUT_TOL: f64 = 1e-12;
    const OUTPUT_TOL: f64 = 1e-10;
}

impl Real for f32 {
    const INPUT_TOL: f64 = 1e-5;
    const OUTPUT_TOL: f64 = 1e-4;
}
