//! Denotational semantics for a quantum programming language: programs denote
//! arrows between finite-dimensional W*-algebras (direct sums of matrix
//! algebras), given concretely as matrices of completely positive maps.

pub mod classical;
pub mod cli;
pub mod cpmap;
pub mod error;
pub mod frontend;
pub mod matrix;
pub mod qcat;
pub mod random;
pub mod signature;

pub use cpmap::{ChoiMatrix, KrausMap};
pub use error::{Error, Result};
pub use matrix::{CMatrix, Tolerance, C64};
pub use qcat::{EffectVector, KleeneOptions, QArrow, StateVector};
pub use signature::{BlockKey, Signature};
