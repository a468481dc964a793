//! Scalar abstraction so the numeric core runs at any float width.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssignOps};

/// Element type of tensors. Implemented for `f32` and `f64`; the shipped
/// pipeline uses `f64` (see the aliases at the crate root).
pub trait Scalar:
    Float + NumAssignOps + Sum + Copy + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal (hyperparameters,
    /// RNG draws). Panics only for values outside the type's range, which
    /// never happens for the constants used here.
    fn from_f64(x: f64) -> Self {
        Self::from(x).expect("f64 constant not representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
