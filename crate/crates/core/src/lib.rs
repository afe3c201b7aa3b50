//! Non-commutative Haar systems on the dyadic matrix tower with a
//! non-tracial product state, their coefficient expansions, and numerical
//! certification of partial-sum projection norms in weighted Schatten norms.

pub mod algebra;
pub mod cli;
pub mod error;
pub mod haar;
pub mod matrix;
pub mod normlab;
pub mod tensor;

pub use algebra::{Alpha, Weight};
pub use error::{Error, Result};
pub use haar::{HaarSystem, RademacherQuad, Side};
pub use matrix::{Diagonal, Exponent, NormSide, NormSpec, SquareMatrix, C64};
