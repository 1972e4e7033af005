//! Dense and sparse matrices, composable actions, factorisations and GMRES.

mod action;
mod dense;
mod gmres;
mod ldl;
mod sparse;

pub use action::{
    block, dense, identity, lin_comb, product, scaled, solve_complex, solve_real, sparse, sum,
    to_dense, Action, BlockAction, DenseAction, LinearAction,
};
pub use dense::DenseMatrix;
pub use gmres::{gmres, GmresOptions, SolveReport};
pub use ldl::{rcm, LdlFactor, Scalar};
pub use sparse::CsrMatrix;

use std::sync::Arc;

use crate::{Result, C64};

/// Factorises a symmetric positive definite mass matrix and returns `M^-1`.
pub fn mass_inverse(mass: &CsrMatrix) -> Result<Action> {
    let f = LdlFactor::<f64>::new(&[(mass, 1.0)], true)?;
    Ok(solve_real(Arc::new(f)))
}

/// Euclidean norm.
pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `||a - b|| / ||b||`.
pub fn relative_difference(a: &[C64], b: &[C64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    d / norm(b).max(f64::MIN_POSITIVE)
}
