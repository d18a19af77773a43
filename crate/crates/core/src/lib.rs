//! Reduction-of-variables solver for problems constrained by bilinear matrix
//! inequalities.
//!
//! Variables are split into an external part `α` searched by an immune
//! optimizer and an internal part `X` that enters the constraint linearly
//! once `α` is fixed. Each candidate `α` is scored with an eigenvalue problem
//! over `X`, so the outer search never sees the BMI.

pub mod bench;
pub mod control;
pub mod error;
pub mod hmoia;
pub mod linalg;
pub mod lmi;
pub mod pole;
pub mod problem;

pub use error::{Error, Result};
