use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::{rho_unchecked, Point};
use crate::weighted::jacobi::GaussJacobi;

/// A quadrature node carrying the (stably evaluated) weight function value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadNode {
    pub point: Point,
    pub rho: f64,
    pub weight: f64,
}

/// Product rule on a ball for integrands against `rho^mu dm`.
///
/// The radial factor is folded into a Gauss-Jacobi rule through `u = r^2`:
/// `r^{n-1} (b - r^2)^mu dr` becomes `(1-x)^mu (1+x)^{(n-2)/2}` on `[-1, 1]`.
/// Angles use equispaced points in 2-D and a Gauss-Legendre x equispaced
/// product in 3-D.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    n: usize,
    b: f64,
    mu: f64,
    radius: f64,
    n_radial: usize,
    n_angular: usize,
    nodes: Vec<QuadNode>,
}

fn angular_points(n: usize, n_angular: usize) -> Result<Vec<([f64; 3], f64)>> {
    match n {
        2 => Ok((0..n_angular)
            .map(|k| {
                let th = TAU * k as f64 / n_angular as f64;
                ([th.cos(), th.sin(), 0.0], TAU / n_angular as f64)
            })
            .collect()),
        3 => {
            let polar = GaussJacobi::new((n_angular / 2).max(1), 0.0, 0.0)?;
            let mut out = Vec::with_capacity(polar.nodes.len() * n_angular);
            for (ct, wt) in polar.nodes.iter().zip(&polar.weights) {
                let st = (1.0 - ct * ct).max(0.0).sqrt();
                for k in 0..n_angular {
                    let ph = TAU * k as f64 / n_angular as f64;
                    out.push(([st * ph.cos(), st * ph.sin(), *ct], wt * TAU / n_angular as f64));
                }
            }
            Ok(out)
        }
        _ => Err(Error::Unsupported(format!("dimension {n}"))),
    }
}

impl QuadratureRule {
    /// Rule on `B(0, sqrt(b))` for the weight `rho^mu`, `mu > -1`.
    pub fn new(n: usize, b: f64, mu: f64, n_radial: usize, n_angular: usize) -> Result<Self> {
        if !(mu > -1.0) {
            return Err(Error::Integrability { exponent: mu });
        }
        Self::build(n, b, mu, b.sqrt(), n_radial, n_angular)
    }

    /// Unweighted rule on the concentric sub-ball `B(0, radius)`.
    pub fn sub_ball(n: usize, b: f64, radius: f64, n_radial: usize, n_angular: usize) -> Result<Self> {
        if !(radius > 0.0 && radius <= b.sqrt()) {
            return Err(Error::InvalidParameter(format!("sub-ball radius {radius}")));
        }
        Self::build(n, b, 0.0, radius, n_radial, n_angular)
    }

    /// Full-ball rule for `rho^mu` whose radial nodes are graded toward the
    /// boundary through `1 - x = 2 y^q`.
    ///
    /// Polynomials of degree `p` in `|m|^2` are still integrated exactly while
    /// `p q < 2 n_radial`; integrands carrying `log rho` factors converge like
    /// `n_radial^{-2 q (mu + 1)}` instead of `n_radial^{-2 (mu + 1)}`.
    pub fn graded(n: usize, b: f64, mu: f64, n_radial: usize, n_angular: usize, q: u32) -> Result<Self> {
        if !(mu > -1.0) {
            return Err(Error::Integrability { exponent: mu });
        }
        if n_radial == 0 || n_angular == 0 || q == 0 {
            return Err(Error::InvalidParameter("quadrature resolution must be >= 1".into()));
        }
        let qf = q as f64;
        let half = 0.5 * (n as f64 - 2.0);
        let a = qf * mu + qf - 1.0;
        let gj = GaussJacobi::new(n_radial, 0.0, a)?;
        let scale = 0.5 * (0.5 * b).powf(mu + half + 1.0) * 2f64.powf(mu - a) * qf;
        let ang = angular_points(n, n_angular)?;
        let mut nodes = Vec::with_capacity(gj.nodes.len() * ang.len());
        for (t, wt) in gj.nodes.iter().zip(&gj.weights) {
            let y = 0.5 * (1.0 + t);
            let yq = y.powi(q as i32);
            let r = (b * (1.0 - yq)).max(0.0).sqrt();
            let rho = b * yq;
            let jac = (2.0 - 2.0 * yq).powf(half);
            for (dir, wa) in &ang {
                nodes.push(QuadNode {
                    point: Point { x: [r * dir[0], r * dir[1], r * dir[2]] },
                    rho,
                    weight: scale * wt * jac * wa,
                });
            }
        }
        Ok(QuadratureRule { n, b, mu, radius: b.sqrt(), n_radial, n_angular, nodes })
    }

    fn build(n: usize, b: f64, mu: f64, radius: f64, n_radial: usize, n_angular: usize) -> Result<Self> {
        if n_radial == 0 || n_angular == 0 {
            return Err(Error::InvalidParameter("quadrature resolution must be >= 1".into()));
        }
        let half = 0.5 * (n as f64 - 2.0);
        let gj = GaussJacobi::new(n_radial, mu, half)?;
        let r2 = radius * radius;
        // the Jacobi weight is (R^2 - u)^mu; on the full ball R^2 = b so this is rho^mu
        let scale = 0.5 * (0.5 * r2).powf(mu + half + 1.0);
        let ang = angular_points(n, n_angular)?;
        let full = (radius - b.sqrt()).abs() == 0.0;
        let mut nodes = Vec::with_capacity(gj.nodes.len() * ang.len());
        for (x, wx) in gj.nodes.iter().zip(&gj.weights) {
            let u = 0.5 * r2 * (1.0 + x);
            let r = u.sqrt();
            let rho = if full { 0.5 * b * (1.0 - x) } else { rho_unchecked(b, r) };
            for (dir, wa) in &ang {
                nodes.push(QuadNode {
                    point: Point { x: [r * dir[0], r * dir[1], r * dir[2]] },
                    rho,
                    weight: scale * wx * wa,
                });
            }
        }
        Ok(QuadratureRule { n, b, mu, radius, n_radial, n_angular, nodes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes(&self) -> &[QuadNode] {
        &self.nodes
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.n_radial, self.n_angular)
    }

    /// Total degree of polynomials in `m` integrated exactly (times the weight).
    pub fn order(&self) -> usize {
        let radial = 4 * self.n_radial - 2;
        let angular = match self.n {
            2 => self.n_angular - 1,
            _ => (2 * (self.n_angular / 2).max(1) - 1).min(self.n_angular - 1),
        };
        radial.min(angular)
    }

    /// `sum_q w_q F(node_q)` with compensated summation.
    pub fn integrate_nodes<F: Fn(&QuadNode) -> f64>(&self, f: F) -> Result<f64> {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for node in &self.nodes {
            let v = node.weight * f(node);
            if !v.is_finite() {
                return Err(Error::Quadrature(format!(
                    "non-finite integrand at |m| = {:.6}",
                    node.point.norm()
                )));
            }
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
        }
        Ok(sum + comp)
    }

    pub fn integrate<F: Fn(&Point) -> f64>(&self, f: F) -> Result<f64> {
        self.integrate_nodes(|node| f(&node.point))
    }
}

/// `int_B F rho^mu dm` for a rule built with exponent `mu`.
pub fn integrate_weighted<F: Fn(&Point) -> f64>(f: F, mu: f64, q: &QuadratureRule) -> Result<f64> {
    if (q.mu() - mu).abs() > 1e-14 {
        return Err(Error::ExponentMismatch { basis: q.mu(), requested: mu });
    }
    q.integrate(f)
}

/// Closed form of `int_B rho^mu dm` in 2-D.
pub fn weight_mass_2d(b: f64, mu: f64) -> f64 {
    PI * b.powf(mu + 1.0) / (mu + 1.0)
}

/// A node on a sphere `|m| = r` together with its distance to the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceNode {
    pub point: Point,
    pub rho: f64,
    pub dist: f64,
    pub weight: f64,
}

/// Surface rule on `dB_r` (a circle in 2-D, a sphere in 3-D).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRule {
    pub radius: f64,
    pub nodes: Vec<TraceNode>,
}

impl TraceRule {
    pub fn new(n: usize, b: f64, radius: f64, n_angular: usize) -> Result<Self> {
        let sb = b.sqrt();
        if !(radius > 0.0 && radius < sb) {
            return Err(Error::InvalidParameter(format!("trace radius {radius} not in (0, {sb})")));
        }
        Self::at_distance(n, b, sb - radius, n_angular)
    }

    /// Rule on the sphere at distance `d` from the boundary.
    pub fn at_distance(n: usize, b: f64, d: f64, n_angular: usize) -> Result<Self> {
        let sb = b.sqrt();
        let radius = sb - d;
        let area_scale = radius.powi(n as i32 - 1);
        let rho = d * (sb + radius);
        let nodes = angular_points(n, n_angular)?
            .into_iter()
            .map(|(dir, w)| TraceNode {
                point: Point { x: [radius * dir[0], radius * dir[1], radius * dir[2]] },
                rho,
                dist: d,
                weight: w * area_scale,
            })
            .collect();
        Ok(TraceRule { radius, nodes })
    }

    pub fn integrate<F: Fn(&TraceNode) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().map(|node| node.weight * f(node)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weight_mass_matches_closed_form() {
        for &b in &[2.1, 3.0, 4.0, 7.5] {
            for &mu in &[-0.95, -0.5, 0.0, 0.3, 1.0, 2.0, 3.7] {
                let q = QuadratureRule::new(2, b, mu, 16, 8).unwrap();
                assert_relative_eq!(q.integrate(|_| 1.0).unwrap(), weight_mass_2d(b, mu), max_relative = 1e-13);
                assert!(q.nodes().iter().all(|n| n.weight > 0.0));
            }
        }
    }

    #[test]
    fn area_of_ball() {
        let q = QuadratureRule::new(2, 4.0, 0.0, 8, 8).unwrap();
        assert_relative_eq!(integrate_weighted(|_| 1.0, 0.0, &q).unwrap(), 4.0 * PI, max_relative = 1e-14);
        assert!(integrate_weighted(|_| 1.0, 0.5, &q).is_err());
        let q3 = QuadratureRule::new(3, 4.0, 0.0, 8, 8).unwrap();
        assert_relative_eq!(q3.integrate(|_| 1.0).unwrap(), 4.0 / 3.0 * PI * 8.0, max_relative = 1e-13);
        let sub = QuadratureRule::sub_ball(2, 4.0, 1.8, 8, 8).unwrap();
        assert_relative_eq!(sub.integrate(|_| 1.0).unwrap(), PI * 1.8 * 1.8, max_relative = 1e-14);
    }

    #[test]
    fn nan_is_reported() {
        let q = QuadratureRule::new(2, 4.0, 0.0, 4, 4).unwrap();
        assert!(matches!(q.integrate(|_| f64::NAN), Err(Error::Quadrature(_))));
        assert!(matches!(QuadratureRule::new(2, 4.0, -1.0, 4, 4), Err(Error::Integrability { .. })));
    }

    #[test]
    fn circle_length() {
        let t = TraceRule::new(2, 4.0, 1.0, 32).unwrap();
        assert_relative_eq!(t.integrate(|_| 1.0), TAU, max_relative = 1e-14);
        let t3 = TraceRule::new(3, 4.0, 1.5, 16).unwrap();
        assert_relative_eq!(t3.integrate(|_| 1.0), 4.0 * PI * 2.25, max_relative = 1e-13);
        assert!(TraceRule::new(2, 4.0, 2.0, 8).is_err());
    }

    #[test]
    fn graded_rule_matches_plain_rule() {
        for &mu in &[-0.5, 0.0, 0.75, 2.5] {
            let plain = QuadratureRule::new(2, 4.0, mu, 24, 16).unwrap();
            let graded = QuadratureRule::graded(2, 4.0, mu, 48, 16, 4).unwrap();
            let f = |m: &Point| 1.0 + m.x[0] * m.x[0] * m.x[1] * m.x[1] + m.norm_sq().powi(3);
            assert_relative_eq!(plain.integrate(f).unwrap(), graded.integrate(f).unwrap(), max_relative = 1e-13);
        }
        // int rho^mu log(rho) over the disk, b = 1: pi (-1/(mu+1)^2)
        let mu = 0.25;
        let graded = QuadratureRule::graded(2, 1.0, mu, 40, 4, 4).unwrap();
        let v = graded.integrate_nodes(|n| n.rho.ln()).unwrap();
        assert_relative_eq!(v, -PI / (mu + 1.0).powi(2), max_relative = 1e-12);
    }

    #[test]
    fn order_reports_exactness() {
        let q = QuadratureRule::new(2, 4.0, 0.5, 6, 10).unwrap();
        let d = q.order();
        assert_eq!(d, 9);
        // m1^8 is within the exact range; check against the radial closed form
        let exact = {
            // int cos^8 dth = 35 pi / 64; radial part (1/2) int_0^4 u^4 (4-u)^0.5 du
            let gj = GaussJacobi::new(10, 0.5, 0.0).unwrap();
            let radial = 0.5 * 2f64.powf(1.5) * gj.integrate(|x| (2.0 * (1.0 + x)).powi(4));
            35.0 * PI / 64.0 * radial
        };
        assert_relative_eq!(q.integrate(|m| m.x[0].powi(8)).unwrap(), exact, max_relative = 1e-13);
    }
}
