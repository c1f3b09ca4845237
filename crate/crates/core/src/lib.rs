//! Explicit spectral bounds and certified eigenvalues for transfer operators
//! built from holomorphic maps and weights.

// `!(x > y)` rejects NaN along with the failing comparison
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apriori;
pub mod ball;
pub mod certify;
pub mod determinant;
pub mod geometry;
pub mod oracle;
pub mod round;
pub mod systems;
