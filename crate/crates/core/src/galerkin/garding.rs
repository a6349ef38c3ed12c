use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::galerkin::assemble::AssembledOperator;

/// Certified constants of `C1 ||w||^2_{H^1} <= L[w, w] + C2 ||w||^2_{L^2}` on the span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GardingConstants {
    pub c1: f64,
    pub c2: f64,
    /// `lambda_min(S, H)`, the coercivity of the diffusion part alone.
    pub diffusion: f64,
}

/// Smallest eigenvalue of the pencil `(x, h)` with `h` symmetric positive definite.
pub fn min_generalized_eigenvalue(x: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<f64> {
    let chol = h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinearSolve("Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let xs = 0.5 * (x + x.transpose());
    // L^{-1} X L^{-T}
    let y = l
        .solve_lower_triangular(&xs)
        .ok_or_else(|| Error::LinearSolve("triangular solve".into()))?;
    let z = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::LinearSolve("triangular solve".into()))?;
    let z = 0.5 * (&z + z.transpose());
    let eig = SymmetricEigen::new(z).eigenvalues;
    Ok(eig.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Certifies the Garding inequality for the assembled form.
///
/// `C2` is the smallest shift making `L + C2 M - C1* H` nonnegative for the
/// target `C1* = lambda_min(S, H) / 2`; `C1` is then recomputed from the
/// shifted pencil, so it is the constant actually certified.
pub fn garding_constants(op: &AssembledOperator) -> Result<GardingConstants> {
    let h = op.h1_gram();
    let l = op.bilinear();
    let diffusion = min_generalized_eigenvalue(&op.stiffness, &h)?;
    let target = 0.5 * diffusion;
    let shifted = &l - target * &h;
    let c2 = (-min_generalized_eigenvalue(&shifted, &op.mass)?).max(0.0);
    let c1 = min_generalized_eigenvalue(&(&l + c2 * &op.mass), &h)?;
    if !(c1 > 0.0) {
        return Err(Error::Certificate { c1 });
    }
    Ok(GardingConstants { c1, c2, diffusion })
}
