//! Affine matrix functions, an expression builder for block LMIs and the
//! eigenvalue problem (EVP) solver.

mod amf;
mod builder;
mod evp;

pub use amf::{AffineMatrixFunction, AmfBlock, InternalKind, InternalVariable};
pub use builder::{Affine, LmiBuilder, Var};
pub use evp::{solve_evp, EvpOptions, EvpResult, EvpStatus};
