//! Dense matrix kernels, parameters and the finite-difference checker.

mod activation;
mod gradcheck;
mod matrix;
mod norm;
mod param;

pub use activation::{activation, activation_backward, ActivationKind};
pub use gradcheck::{grad_check, GradCheckReport};
pub use matrix::{axpy, concat, dot, Axis, Matrix};
pub use norm::{rms_norm_rows, rms_norm_rows_backward, RMS_EPS};
pub use param::{glorot_uniform, ParamGroup, ParamId, ParamStore, Parameter};
