use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::galerkin::{radial_sign_forms, BasisOptions, BasisSet};
use crate::geometry::ModelParams;
use crate::weighted::{FactoredField, WeightedSpace};

/// Exponent offset of the equivalence family `rho^{b/4 + 1/2 + delta} psi`.
pub const EQUIVALENCE_DELTA: f64 = 0.05;

/// Which side of `mu = 1` the embedding is probed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingBranch {
    /// `mu = beta`, functions vanishing on the boundary (the basis itself).
    Beta,
    /// `mu = b/2`, the reduced polynomials of the basis without the boundary factor.
    HalfB,
}

/// `||phi||_{L^2_{mu-2}} / ||phi||_{H^1_mu}` for every member of the family.
pub fn embedding_ratios(p: &ModelParams, k_r: usize, k_theta: usize, branch: EmbeddingBranch) -> Result<Vec<f64>> {
    let n_radial = 2 * k_r + 24;
    let n_angular = 2 * k_theta + 16;
    let basis = BasisSet::new(p, p.beta(), BasisOptions::new(k_r, k_theta, n_radial, n_angular))?;
    let space = WeightedSpace::new(2, p.b(), n_radial, n_angular);
    let mu = match branch {
        EmbeddingBranch::Beta => p.beta(),
        EmbeddingBranch::HalfB => 0.5 * p.b(),
    };
    (0..basis.len())
        .map(|i| {
            let mut f = basis.factored(i)?;
            if branch == EmbeddingBranch::HalfB {
                f.power = 0.0;
            }
            let (lhs, rhs) = space.embedding_defect(&f, mu)?;
            Ok(lhs / rhs)
        })
        .collect()
}

/// Largest ratios `a / c` and `c / a` over the family, with
/// `a = ||F||_{H^1_{-b/2}}` and `c = ||F / rho^{b/2}||_{H^1_{b/2}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceBounds {
    pub b: f64,
    pub a_over_c: f64,
    pub c_over_a: f64,
}

impl EquivalenceBounds {
    pub fn max(&self) -> f64 {
        self.a_over_c.max(self.c_over_a)
    }
}

/// Equivalence ratios over `F = rho^{b/4 + 1/2 + delta} psi_i`, the lowest
/// power for which both norms are finite, with `psi_i` the reduced basis polynomials.
pub fn equivalence_bounds(b: f64, k_r: usize, k_theta: usize) -> Result<EquivalenceBounds> {
    let p = ModelParams::at_rest(b)?;
    let n_radial = 2 * k_r + 32;
    let n_angular = 2 * k_theta + 16;
    let basis = BasisSet::new(&p, p.beta().max(-0.5), BasisOptions::new(k_r, k_theta, n_radial, n_angular))?;
    let space = WeightedSpace::new(2, b, n_radial, n_angular);
    let power = 0.25 * b + 0.5 + EQUIVALENCE_DELTA;
    let mut out = EquivalenceBounds { b, a_over_c: 0.0, c_over_a: 0.0 };
    for i in 0..basis.len() {
        let mut f: FactoredField = basis.factored(i)?;
        f.power = power;
        let (a, c) = space.equivalence_ratio(&f)?;
        out.a_over_c = out.a_over_c.max(a / c);
        out.c_over_a = out.c_over_a.max(c / a);
    }
    Ok(out)
}

/// Outcome of the sign identity check on random combinations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignIdentityReport {
    pub gamma: f64,
    pub samples: usize,
    /// Largest `int m . grad(u^2) rho^{gamma-1}` over the samples; must be <= 0.
    pub max_lhs: f64,
    /// Largest `|lhs - rhs| / |rhs|`.
    pub max_mismatch: f64,
}

/// Evaluates both sides of the sign identity on `samples` random unit-norm combinations.
pub fn sign_identity(p: &ModelParams, gamma: f64, options: BasisOptions, samples: usize, seed: u64) -> Result<SignIdentityReport> {
    let basis = BasisSet::new(p, gamma, options)?;
    let (lhs, rhs) = radial_sign_forms(&basis, p.n());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SignIdentityReport { gamma, samples, max_lhs: f64::NEG_INFINITY, max_mismatch: 0.0 };
    for _ in 0..samples {
        let mut d = DVector::from_fn(basis.len(), |_, _| rng.random_range(-1.0..1.0));
        d /= d.norm();
        let l = d.dot(&(&lhs * &d));
        let r = d.dot(&(&rhs * &d));
        out.max_lhs = out.max_lhs.max(l);
        out.max_mismatch = out.max_mismatch.max((l - r).abs() / r.abs());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_identity_on_small_basis() {
        let p = ModelParams::at_rest(4.0).unwrap();
        let rep = sign_identity(&p, 0.75, BasisOptions::new(4, 3, 32, 32), 20, 1).unwrap();
        assert!(rep.max_lhs < 0.0);
        assert!(rep.max_mismatch < 1e-10, "{rep:?}");
    }

    #[test]
    fn embedding_ratios_are_finite() {
        let p = ModelParams::at_rest(4.0).unwrap();
        for branch in [EmbeddingBranch::Beta, EmbeddingBranch::HalfB] {
            let r = embedding_ratios(&p, 3, 2, branch).unwrap();
            assert!(r.iter().all(|x| x.is_finite() && *x > 0.0));
        }
    }
}
