//! Numerical laboratory for the curvature of Hodge bundles over families of
//! complex tori.

pub mod bundle;
pub mod error;
pub mod expr;
pub mod family;
pub mod fiber;
pub mod finsler;
pub mod grid;
pub mod harness;
pub mod jet;
pub mod linalg;
pub mod par;
pub mod small;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
