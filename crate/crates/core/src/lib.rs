//! Numerical laboratory for pointwise C¹ and C^{1,1} regularity of solutions to
//! semilinear nondivergence-form elliptic equations
//! `a_ij D_ij u + b_i D_i u = f(x, u)` in two dimensions.

pub mod campanato;
pub mod cli;
pub mod elliptic;
pub mod error;
pub mod fields;
pub mod modulus;
pub mod quadrature;
pub mod semilinear;

pub use error::{Error, Result};

/// A point of the plane.
pub type Point = [f64; 2];
