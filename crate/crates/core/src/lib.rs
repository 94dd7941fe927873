//! Dynamic relevance graph networks for multiple-choice question answering
//! over knowledge-graph subgraphs.
//!
//! The core is generic over [`Scalar`] (`f32` for training, `f64` for
//! verification); concrete aliases live at the crate root.

pub mod encoding;
pub mod error;
pub mod kg;
pub mod model;
pub mod numerics;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::{Precision, Scalar};

pub type Matrix32 = numerics::Matrix<f32>;
pub type Matrix64 = numerics::Matrix<f64>;
pub type ParamStore32 = numerics::ParamStore<f32>;
pub type ParamStore64 = numerics::ParamStore<f64>;
pub type Model32 = model::Model<f32>;
pub type Model64 = model::Model<f64>;
