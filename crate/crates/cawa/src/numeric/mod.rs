//! Minimal dense-tensor engine: the handful of differentiable ops the model
//! needs, ADAM, seeded RNG plumbing, and a finite-difference gradient checker.

pub mod adam;
pub mod gradcheck;
pub mod ops;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use adam::AdamState;
pub use gradcheck::{gradient_check, GradCheckTarget};
pub use scalar::Scalar;
pub use tensor::{Parameter, Tensor};
