//! Gauss-Jacobi rules and Jacobi polynomial evaluation.
//!
//! Nodes come from the Golub-Welsch eigenproblem and are then polished with a
//! few Newton steps on the orthonormal recurrence; weights use the Christoffel
//! form `1 / sum_k p_k(x)^2`, which keeps full relative accuracy near the
//! singular endpoint.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Nodes and weights on `[-1, 1]` for the weight `(1-x)^a (1+x)^c`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussJacobi {
    pub a: f64,
    pub c: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Monic three-term recurrence coefficients `(alpha_k, beta_k)`; `beta_0` is the total mass.
fn recurrence(a: f64, c: f64, len: usize) -> (Vec<f64>, Vec<f64>) {
    let mut alpha = Vec::with_capacity(len);
    let mut beta = Vec::with_capacity(len);
    let ab = a + c;
    for k in 0..len {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        let al = if k == 0 {
            (c - a) / (ab + 2.0)
        } else {
            (c * c - a * a) / (s * (s + 2.0))
        };
        alpha.push(al);
        let be = if k == 0 {
            let ln_mass = (ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0)
                + ln_gamma(c + 1.0)
                - ln_gamma(ab + 2.0);
            ln_mass.exp()
        } else if k == 1 {
            4.0 * (1.0 + a) * (1.0 + c) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            4.0 * kf * (kf + a) * (kf + c) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
        beta.push(be);
    }
    (alpha, beta)
}

impl GaussJacobi {
    pub fn new(points: usize, a: f64, c: f64) -> Result<Self> {
        if points == 0 {
            return Err(Error::Quadrature("rule needs at least one node".into()));
        }
        if !(a > -1.0) || !(c > -1.0) {
            return Err(Error::Integrability { exponent: a.min(c) });
        }
        let (alpha, beta) = recurrence(a, c, points + 1);
        let jac = DMatrix::from_fn(points, points, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[j].sqrt()
            } else if j + 1 == i {
                beta[i].sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jac);
        let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());

        let sq: Vec<f64> = beta.iter().map(|v| v.sqrt()).collect();
        // orthonormal values p_0..p_{N} and derivative of p_N at x
        let eval = |x: f64| -> (f64, f64, f64) {
            let mut p_prev = 0.0;
            let mut p = 1.0 / sq[0];
            let mut dp_prev = 0.0;
            let mut dp = 0.0;
            let mut sum_sq = p * p;
            for k in 0..points {
                let sub = if k == 0 { 0.0 } else { sq[k] };
                let p_next = ((x - alpha[k]) * p - sub * p_prev) / sq[k + 1];
                let dp_next = (p + (x - alpha[k]) * dp - sub * dp_prev) / sq[k + 1];
                p_prev = p;
                p = p_next;
                dp_prev = dp;
                dp = dp_next;
                if k + 1 < points {
                    sum_sq += p * p;
                }
            }
            (p, dp, sum_sq)
        };

        let mut weights = Vec::with_capacity(points);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (p, dp, _) = eval(*x);
                if dp == 0.0 {
                    break;
                }
                let step = p / dp;
                if !step.is_finite() || step.abs() > 1e-6 {
                    break;
                }
                *x -= step;
            }
            let (_, _, sum_sq) = eval(*x);
            weights.push(1.0 / sum_sq);
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Quadrature(format!("non-positive Gauss-Jacobi weight (a={a}, c={c})")));
        }
        Ok(GaussJacobi { a, c, nodes, weights })
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// Values `P_k^{(a,c)}(x)` and derivatives for `k = 0..len` (classical normalization).
pub fn jacobi_values(len: usize, a: f64, c: f64, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; len];
    let mut dp = vec![0.0; len];
    if len == 0 {
        return (p, dp);
    }
    p[0] = 1.0;
    if len > 1 {
        p[1] = 0.5 * (a - c) + 0.5 * (a + c + 2.0) * x;
        dp[1] = 0.5 * (a + c + 2.0);
    }
    for k in 1..len.saturating_sub(1) {
        let kf = k as f64;
        let s = 2.0 * kf + a + c;
        let a1 = 2.0 * (kf + 1.0) * (kf + a + c + 1.0) * s;
        let a2 = (s + 1.0) * (a * a - c * c);
        let a3 = s * (s + 1.0) * (s + 2.0);
        let a4 = 2.0 * (kf + a) * (kf + c) * (s + 2.0);
        p[k + 1] = ((a2 + a3 * x) * p[k] - a4 * p[k - 1]) / a1;
        dp[k + 1] = ((a2 + a3 * x) * dp[k] + a3 * p[k] - a4 * dp[k - 1]) / a1;
    }
    (p, dp)
}
