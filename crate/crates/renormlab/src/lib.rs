//! Period-doubling renormalization for reversible area-preserving twist maps.
//!
//! Maps are given by symmetric generating functions `S(x, x')` with
//! `u = -d1 S` and `u' = d2 S`. The crate computes the renormalization
//! fixed point, the tower of renormalizations over it, the invariant Cantor
//! set with its dyadic coding, and the smoothness of conjugacies between
//! Cantor sets of maps in the same class.

pub mod cantor;
pub mod distortion;
pub mod error;
pub mod map;
pub mod renorm;
pub mod rigidity;
pub mod symfun;

pub use error::{Error, Result};
