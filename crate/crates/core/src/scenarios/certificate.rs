use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ModelParams, Point};

/// Parameters of the exponential-weight transform together with the certified
/// maximum of its reaction coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaximumPrincipleCert {
    pub alpha: f64,
    pub k: f64,
    /// Exact maximum over `|m|^2 in [0, b]` of the quadratic upper bound.
    pub sup_bound: f64,
    /// Largest value of the coefficient itself on a polar grid and time sample.
    pub sup_grid: f64,
    /// `max_t lambda_max(sym kappa(t))`
    pub lambda: f64,
}

/// `c(m) = -K rho^2 + alpha [n b + (2 alpha + 2 - n - b) |m|^2] + (b - 2 alpha) rho m . kappa m`.
pub fn transformed_coefficient(p: &ModelParams, alpha: f64, k: f64, t: f64, m: &Point) -> f64 {
    let (n, b) = (p.n() as f64, p.b());
    let u = m.norm_sq();
    let rho = b - u;
    let km = crate::geometry::apply(&p.kappa_at(t), m);
    -k * rho * rho + alpha * (n * b + (2.0 * alpha + 2.0 - n - b) * u) + (b - 2.0 * alpha) * rho * m.dot(&km)
}

fn lambda_max_sym(p: &ModelParams) -> f64 {
    let n = p.n();
    let mut lam = f64::NEG_INFINITY;
    for i in 0..=200 {
        let k = p.kappa_at(p.horizon() * i as f64 / 200.0);
        let sym = nalgebra::DMatrix::from_fn(n, n, |a, c| 0.5 * (k[a][c] + k[c][a]));
        let ev = nalgebra::SymmetricEigen::new(sym).eigenvalues;
        lam = lam.max(ev.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    lam
}

/// Maximum over `u in [0, b]` of
/// `q(u) = -K (b-u)^2 + alpha n b + alpha (2 alpha + 2 - n - b) u + (b - 2 alpha) Lambda (b-u) u`,
/// which bounds `c` because `m . kappa m <= Lambda |m|^2` and `(b - 2 alpha) rho >= 0`.
pub fn quadratic_bound(p: &ModelParams, alpha: f64, k: f64, lambda: f64) -> Result<f64> {
    let (n, b) = (p.n() as f64, p.b());
    if !(alpha < 0.5 * b - 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be < b/2 - 1 = {}", 0.5 * b - 1.0)));
    }
    let e = b - 2.0 * alpha;
    // q(u) = a2 u^2 + a1 u + a0
    let a2 = -k - e * lambda;
    let a1 = 2.0 * k * b + alpha * (2.0 * alpha + 2.0 - n - b) + e * lambda * b;
    let a0 = -k * b * b + alpha * n * b;
    let q = |u: f64| (a2 * u + a1) * u + a0;
    let mut best = q(0.0).max(q(b));
    if a2 < 0.0 {
        let v = -a1 / (2.0 * a2);
        if v > 0.0 && v < b {
            best = best.max(q(v));
        }
    }
    Ok(best)
}

fn grid_max(p: &ModelParams, alpha: f64, k: f64) -> f64 {
    let sb = p.sqrt_b();
    let mut best = f64::NEG_INFINITY;
    for it in 0..=20 {
        let t = p.horizon() * it as f64 / 20.0;
        for i in 0..=64 {
            let r = sb * i as f64 / 64.0;
            for j in 0..64 {
                let m = Point::polar(r, std::f64::consts::TAU * j as f64 / 64.0);
                best = best.max(transformed_coefficient(p, alpha, k, t, &m));
            }
        }
    }
    best
}

/// Searches `alpha in (0, b/2 - 1)` (bisection order) and `K = 1, 2, 4, ...` for a
/// pair whose quadratic bound is negative.
pub fn positivity_certificate(p: &ModelParams) -> Result<MaximumPrincipleCert> {
    let top = 0.5 * p.b() - 1.0;
    let lambda = lambda_max_sym(p);
    let mut fractions = Vec::new();
    for level in 1..=6u32 {
        let den = 2u32.pow(level);
        for num in (1..den).step_by(2) {
            fractions.push(num as f64 / den as f64);
        }
    }
    for frac in fractions {
        let alpha = top * frac;
        for e in 0..=30 {
            let k = 2f64.powi(e);
            let sup = quadratic_bound(p, alpha, k, lambda)?;
            if sup < 0.0 {
                let sup_grid = grid_max(p, alpha, k);
                return Ok(MaximumPrincipleCert { alpha, k, sup_bound: sup, sup_grid, lambda });
            }
        }
    }
    Err(Error::CertificateSearch(format!(
        "no (alpha, K) found for b = {}, max sym kappa eigenvalue {lambda}",
        p.b()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::KappaSchedule;

    #[test]
    fn b4_at_rest() {
        let p = ModelParams::at_rest(4.0).unwrap();
        let cert = positivity_certificate(&p).unwrap();
        assert_eq!((cert.alpha, cert.k), (0.5, 1.0));
        // -u^2 + 6.5 u - 12 peaks at u = 3.25
        assert!((cert.sup_bound - (-1.4375)).abs() < 1e-14);
        assert!(cert.sup_grid <= cert.sup_bound + 1e-12);
    }

    #[test]
    fn b3_and_shear() {
        let p = ModelParams::at_rest(3.0).unwrap();
        let cert = positivity_certificate(&p).unwrap();
        assert!(cert.alpha < 0.5 && cert.sup_bound < 0.0);
        let p = ModelParams::new(2, 4.0, KappaSchedule::Shear { rate: 2.0 }, 1.0).unwrap();
        let cert = positivity_certificate(&p).unwrap();
        assert!(cert.sup_bound < 0.0 && cert.sup_grid < 0.0);
    }

    #[test]
    fn alpha_above_threshold_is_rejected() {
        let p = ModelParams::at_rest(4.0).unwrap();
        assert!(quadratic_bound(&p, 1.0, 1.0, 0.0).is_err());
    }
}
