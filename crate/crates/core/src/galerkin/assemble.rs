use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Mat3, ModelParams};
use crate::galerkin::basis::BasisSet;

/// Which weighted problem the operator discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Weighting {
    /// The W-problem with weight `rho^beta`.
    Beta,
    /// The relaxed problem with weight `rho^gamma` and the extra drift
    /// `(beta - gamma) m . grad u rho^{gamma-1}`.
    Gamma(f64),
}

/// Time-independent pieces of the operator; the velocity gradient enters
/// linearly through the `(a, b)` components.
#[derive(Debug, Clone)]
pub struct OperatorParts {
    n: usize,
    b: f64,
    weighting: Weighting,
    mass: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    /// `int m_b d_a phi_i phi_j rho^mu`
    drift: [[DMatrix<f64>; 2]; 2],
    /// `int phi_i phi_j rho^{mu-1}`
    reaction0: DMatrix<f64>,
    /// `int m_a m_b phi_i phi_j rho^{mu-1}`
    reaction: [[DMatrix<f64>; 2]; 2],
    degenerate: Option<DMatrix<f64>>,
}

/// Matrices at one time. Entry `(j, i)` pairs trial function `i` with test function `j`.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub drift: DMatrix<f64>,
    pub reaction: DMatrix<f64>,
    pub degenerate: Option<DMatrix<f64>>,
}

impl AssembledOperator {
    /// The form `L` (or `L_0`): stiffness plus drift terms, without reaction.
    pub fn bilinear(&self) -> DMatrix<f64> {
        let mut a = &self.stiffness + &self.drift;
        if let Some(d0) = &self.degenerate {
            a += d0;
        }
        a
    }

    /// `A = L - R`, the matrix of the full evolution operator.
    pub fn system(&self) -> DMatrix<f64> {
        self.bilinear() - &self.reaction
    }

    /// Gram matrix of `H^1_mu`: `int (|grad phi|^2 + phi^2) rho^mu`.
    pub fn h1_gram(&self) -> DMatrix<f64> {
        2.0 * &self.stiffness + &self.mass
    }
}

fn column(v: &DVector<f64>, f: impl Fn(usize) -> f64) -> DVector<f64> {
    DVector::from_fn(v.len(), |q, _| v[q] * f(q))
}

impl OperatorParts {
    pub fn new(p: &ModelParams, basis: &BasisSet, weighting: Weighting) -> Result<Self> {
        let mu = match weighting {
            Weighting::Beta => p.beta(),
            Weighting::Gamma(g) => g,
        };
        if (basis.exponent() - mu).abs() > 1e-12 {
            return Err(Error::ExponentMismatch { basis: basis.exponent(), requested: mu });
        }
        if (basis.b() - p.b()).abs() > 0.0 {
            return Err(Error::InvalidParameter("basis and model disagree on b".into()));
        }
        let [t0, t1, t2] = basis.tables();
        let w0 = t0.weights();
        let w1 = t1.weights();
        let w2 = t2.weights();
        let x1 = |q: usize, c: usize| t1.rule.nodes()[q].point.x[c];
        let x2 = |q: usize, c: usize| t2.rule.nodes()[q].point.x[c];

        let mass = sym(t0.weighted_product(&t0.psi, &w0, &t0.psi));
        let stiffness = sym(
            0.5 * (t2.weighted_product(&t2.grad[0], &w2, &t2.grad[0])
                + t2.weighted_product(&t2.grad[1], &w2, &t2.grad[1])),
        );
        let drift = [0, 1].map(|a| {
            [0, 1].map(|bb| t1.weighted_product(&t1.psi, &column(&w1, |q| x1(q, bb)), &t1.grad[a]))
        });
        let reaction0 = sym(t1.weighted_product(&t1.psi, &w1, &t1.psi));
        let reaction = [0, 1].map(|a| {
            [0, 1].map(|bb| sym(t1.weighted_product(&t1.psi, &column(&w1, |q| x1(q, a) * x1(q, bb)), &t1.psi)))
        });
        let degenerate = match weighting {
            Weighting::Beta => None,
            Weighting::Gamma(g) => {
                let mut d0 = t2.weighted_product(&t2.psi, &column(&w2, |q| x2(q, 0)), &t2.grad[0]);
                d0 += t2.weighted_product(&t2.psi, &column(&w2, |q| x2(q, 1)), &t2.grad[1]);
                Some((p.beta() - g) * d0)
            }
        };
        Ok(OperatorParts { n: p.n(), b: p.b(), weighting, mass, stiffness, drift, reaction0, reaction, degenerate })
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn len(&self) -> usize {
        self.mass.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    /// Drift matrix `int kappa m . grad phi_i phi_j rho^mu`.
    pub fn drift(&self, k: &Mat3) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.len(), self.len());
        for a in 0..2 {
            for bb in 0..2 {
                if k[a][bb] != 0.0 {
                    d += k[a][bb] * &self.drift[a][bb];
                }
            }
        }
        d
    }

    /// Reaction matrix `int c phi_i phi_j rho^{mu-1}`.
    pub fn reaction(&self, k: &Mat3) -> DMatrix<f64> {
        let mut r = (self.n as f64 * (0.5 * self.b - 1.0)) * &self.reaction0;
        for a in 0..2 {
            for bb in 0..2 {
                if k[a][bb] != 0.0 {
                    r += (2.0 * k[a][bb]) * &self.reaction[a][bb];
                }
            }
        }
        r
    }

    pub fn at(&self, k: &Mat3) -> AssembledOperator {
        AssembledOperator {
            mass: self.mass.clone(),
            stiffness: self.stiffness.clone(),
            drift: self.drift(k),
            reaction: self.reaction(k),
            degenerate: self.degenerate.clone(),
        }
    }

    /// `A(kappa) = S + D(kappa) [+ D_0] - R(kappa)`.
    pub fn system(&self, k: &Mat3) -> DMatrix<f64> {
        let mut a = &self.stiffness + self.drift(k) - self.reaction(k);
        if let Some(d0) = &self.degenerate {
            a += d0;
        }
        a
    }

    /// Form `L` (or `L_0`) without the reaction term.
    pub fn bilinear(&self, k: &Mat3) -> DMatrix<f64> {
        let mut a = &self.stiffness + self.drift(k);
        if let Some(d0) = &self.degenerate {
            a += d0;
        }
        a
    }
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (&m + m.transpose())
}

/// Assembles the operator of the chosen problem at time `t`.
pub fn assemble(p: &ModelParams, basis: &BasisSet, t: f64, weighting: Weighting) -> Result<AssembledOperator> {
    Ok(OperatorParts::new(p, basis, weighting)?.at(&p.kappa_at(t)))
}

/// Quadratic forms `(L, R)` with `d^T L d = int m . grad(u^2) rho^{mu-1}` and
/// `d^T R d = -int u^2 (n rho^{mu-1} + 2 (1 - mu) |m|^2 rho^{mu-2})` for
/// `u = sum d_i phi_i`; the two agree after integration by parts.
pub fn radial_sign_forms(basis: &BasisSet, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mu = basis.exponent();
    let [_, t1, t2] = basis.tables();
    let w1 = t1.weights();
    let w2 = t2.weights();
    let x2 = |q: usize, c: usize| t2.rule.nodes()[q].point.x[c];
    let mut lhs = t2.weighted_product(&t2.psi, &column(&w2, |q| x2(q, 0)), &t2.grad[0]);
    lhs += t2.weighted_product(&t2.psi, &column(&w2, |q| x2(q, 1)), &t2.grad[1]);
    let lhs = sym(2.0 * lhs);
    let r1 = t1.weighted_product(&t1.psi, &w1, &t1.psi);
    let r2 = t2.weighted_product(&t2.psi, &column(&w2, |q| t2.rule.nodes()[q].point.norm_sq()), &t2.psi);
    let rhs = sym(-(n as f64 * r1 + 2.0 * (1.0 - mu) * r2));
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::basis::BasisOptions;
    use crate::geometry::KappaSchedule;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn zero_flow_has_no_drift() {
        let p = ModelParams::at_rest(4.0).unwrap();
        let basis = BasisSet::new(&p, 0.0, BasisOptions::new(4, 3, 24, 24)).unwrap();
        let op = assemble(&p, &basis, 0.5, Weighting::Beta).unwrap();
        assert!(op.drift.abs().max() < 1e-14);
        // constant reaction coefficient n (b/2 - 1) = 2
        let parts = OperatorParts::new(&p, &basis, Weighting::Beta).unwrap();
        assert!((op.reaction.clone() - 2.0 * &parts.reaction0).abs().max() < 1e-14);
    }

    #[test]
    fn stiffness_of_rho() {
        // phi = rho unnormalized: S = 1/2 int 4 |m|^2 = 16 pi; scale^2 = 3 / (64 pi)
        let p = ModelParams::at_rest(4.0).unwrap();
        let basis = BasisSet::new(&p, 0.0, BasisOptions::new(1, 0, 8, 8)).unwrap();
        let op = assemble(&p, &basis, 0.0, Weighting::Beta).unwrap();
        let scale = basis.functions()[0].scale;
        assert_relative_eq!(op.stiffness[(0, 0)] / (scale * scale), 16.0 * PI, max_relative = 1e-13);
    }

    #[test]
    fn exponent_mismatch_is_rejected() {
        let p = ModelParams::at_rest(4.0).unwrap();
        let basis = BasisSet::new(&p, 0.5, BasisOptions::new(2, 1, 8, 8)).unwrap();
        assert!(matches!(
            OperatorParts::new(&p, &basis, Weighting::Beta),
            Err(Error::ExponentMismatch { .. })
        ));
        assert!(OperatorParts::new(&p, &basis, Weighting::Gamma(0.5)).is_ok());
    }

    #[test]
    fn mass_row_of_rho_vanishes_at_b4() {
        // rho is the first basis function; int f = const means its test row of A is zero
        let p = ModelParams::new(2, 4.0, KappaSchedule::Shear { rate: 1.0 }, 1.0).unwrap();
        let basis = BasisSet::new(&p, 0.0, BasisOptions::new(4, 3, 32, 32)).unwrap();
        let parts = OperatorParts::new(&p, &basis, Weighting::Beta).unwrap();
        let a = parts.system(&p.kappa_at(0.3));
        assert!(a.row(0).abs().max() < 1e-12, "{}", a.row(0).abs().max());
    }
}
