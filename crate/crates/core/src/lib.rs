//! Spherical functions of positive type for the action of `U(n) x U(n)` on
//! complex `n x n` matrices, modified Pólya functions, and their limits as
//! `n` grows.

pub mod cli;
pub mod dd;
pub mod error;
pub mod limits;
pub(crate) mod linalg;
pub mod montecarlo;
pub mod polya;
pub mod quad;
pub mod special;
pub mod spherical;
pub mod symfunc;
pub mod validate;

pub use error::{Error, Result};
