//! The guide's chapters, compiled as doc-tests.
//!
//! Each module's documentation is a chapter of the mdbook under `book/`;
//! `cargo test --doc` runs every code listing in the book, so the prose and
//! the library cannot drift apart.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/spd-manifold.md")]
pub mod spd_manifold {}

#[doc = include_str!("../../../book/src/cholesky-space.md")]
pub mod cholesky_space {}

#[doc = include_str!("../../../book/src/gaussian-embedding.md")]
pub mod gaussian_embedding {}

#[doc = include_str!("../../../book/src/riemannian-gaussians.md")]
pub mod riemannian_gaussians {}

#[doc = include_str!("../../../book/src/autodiff.md")]
pub mod autodiff {}

#[doc = include_str!("../../../book/src/network.md")]
pub mod network {}

#[doc = include_str!("../../../book/src/optimizer.md")]
pub mod optimizer {}

#[doc = include_str!("../../../book/src/data-and-cli.md")]
pub mod data_and_cli {}
