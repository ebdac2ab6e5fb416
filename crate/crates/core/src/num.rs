//! Floating-point scalar abstraction for the statistics code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};

/// f32 or f64
pub trait Real: Float + FromPrimitive + NumCast + Sum + Debug + Display + Send + Sync + 'static {
    /// Converts a count or byte value, exactly where the type allows.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite value")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
