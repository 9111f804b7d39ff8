//! Riemannian geometry of SPD matrices and Cholesky space, embeddings of
//! Gaussian distributions into matrix groups, and a geometric classifier for
//! two-person skeleton interactions trained with Riemannian Adam.
//!
//! The narrative guide lives in `book/`; its code listings are compiled and
//! run as doc-tests through the [`book`] module.

pub mod adam;
pub mod book;
pub mod cholesky_space;
pub mod cli;
pub mod data;
pub mod diag;
pub mod error;
pub mod gaussian;
pub mod mat;
pub mod net;
pub mod rgaussian;
pub mod rng;
pub mod selfcheck;
pub mod spd;
pub mod tape;

pub use cholesky_space::{LowerTriPos, TriTangent};
pub use error::{GeomError, Result};
pub use mat::{Mat, MatrixFnKind, SymEig};
pub use spd::{MetricConfig, SpdPoint, SymTangent};
