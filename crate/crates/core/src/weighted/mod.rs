//! Quadrature against the singular weights `rho^mu`, weighted Sobolev norms,
//! Hardy-type embedding ratios, boundary traces and the comparison between
//! `H^1_{-b/2}` and `rho^{b/2} H^1_{b/2}`.
//!
//! Fields that vanish at the boundary like a power of `rho` are carried in the
//! factored form [`FactoredField`] so that the power is absorbed into the
//! Gauss-Jacobi weight instead of being sampled near the singularity.

mod jacobi;
mod quadrature;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

pub use jacobi::{jacobi_values, GaussJacobi};
pub use quadrature::{
    integrate_weighted, weight_mass_2d, QuadNode, QuadratureRule, TraceNode, TraceRule,
};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryLimit, Point, RadiusLadder};

type ScalarFn = dyn Fn(&Point) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&Point) -> [f64; 3] + Send + Sync;

/// A field `F = rho^power * psi` with `psi` smooth up to the boundary.
#[derive(Clone)]
pub struct FactoredField {
    pub power: f64,
    psi: Arc<ScalarFn>,
    grad_psi: Arc<VectorFn>,
}

impl std::fmt::Debug for FactoredField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FactoredField").field("power", &self.power).finish_non_exhaustive()
    }
}

impl FactoredField {
    pub fn new<P, G>(power: f64, psi: P, grad_psi: G) -> Self
    where
        P: Fn(&Point) -> f64 + Send + Sync + 'static,
        G: Fn(&Point) -> [f64; 3] + Send + Sync + 'static,
    {
        FactoredField { power, psi: Arc::new(psi), grad_psi: Arc::new(grad_psi) }
    }

    /// `c * rho^power`.
    pub fn rho_power(power: f64, c: f64) -> Self {
        Self::new(power, move |_| c, |_| [0.0; 3])
    }

    pub fn zero() -> Self {
        Self::rho_power(0.0, 0.0)
    }

    pub fn psi(&self, m: &Point) -> f64 {
        (self.psi)(m)
    }

    pub fn grad_psi(&self, m: &Point) -> [f64; 3] {
        (self.grad_psi)(m)
    }

    /// Value at a point whose weight `rho` is already known.
    pub fn value(&self, m: &Point, rho: f64) -> f64 {
        pow(rho, self.power) * self.psi(m)
    }

    /// `rho^{1-power} grad F = -2 power m psi + rho grad psi`.
    pub fn reduced_gradient(&self, m: &Point, rho: f64) -> [f64; 3] {
        let psi = self.psi(m);
        let g = self.grad_psi(m);
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = -2.0 * self.power * m.x[i] * psi + rho * g[i];
        }
        out
    }

    pub fn gradient(&self, m: &Point, rho: f64) -> [f64; 3] {
        if self.power == 0.0 {
            return self.grad_psi(m);
        }
        let s = pow(rho, self.power - 1.0);
        self.reduced_gradient(m, rho).map(|v| s * v)
    }

    /// `F / rho^k` as a factored field.
    pub fn divide_rho(&self, k: f64) -> Self {
        FactoredField { power: self.power - k, psi: self.psi.clone(), grad_psi: self.grad_psi.clone() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let (psi, grad) = (self.psi.clone(), self.grad_psi.clone());
        Self::new(self.power, move |m| c * psi(m), move |m| grad(m).map(|v| c * v))
    }
}

fn pow(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if p == 1.0 {
        x
    } else {
        x.powf(p)
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Weighted integration and norms on the ball at a fixed resolution.
///
/// Rules are built lazily per weight exponent and cached.
#[derive(Debug)]
pub struct WeightedSpace {
    n: usize,
    b: f64,
    n_radial: usize,
    n_angular: usize,
    cache: Mutex<HashMap<u64, Arc<QuadratureRule>>>,
}

impl Clone for WeightedSpace {
    fn clone(&self) -> Self {
        WeightedSpace::new(self.n, self.b, self.n_radial, self.n_angular)
    }
}

impl WeightedSpace {
    pub fn new(n: usize, b: f64, n_radial: usize, n_angular: usize) -> Self {
        WeightedSpace { n, b, n_radial, n_angular, cache: Mutex::new(HashMap::new()) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.n_radial, self.n_angular)
    }

    /// Rule for the weight `rho^mu`; fails for `mu <= -1`.
    pub fn rule(&self, mu: f64) -> Result<Arc<QuadratureRule>> {
        // round so that algebraically equal exponents share a rule
        let key = ((mu * 1e12).round() / 1e12).to_bits();
        if let Some(rule) = self.cache.lock().unwrap().get(&key) {
            return Ok(rule.clone());
        }
        let rule = Arc::new(QuadratureRule::new(self.n, self.b, mu, self.n_radial, self.n_angular)?);
        self.cache.lock().unwrap().insert(key, rule.clone());
        Ok(rule)
    }

    /// `int_B F rho^mu dm`.
    pub fn integrate(&self, f: &FactoredField, mu: f64) -> Result<f64> {
        let rule = self.rule(f.power + mu)?;
        rule.integrate(|m| f.psi(m))
    }

    /// `||F||^2_{L^2_mu}`.
    pub fn l2_sq(&self, f: &FactoredField, mu: f64) -> Result<f64> {
        let rule = self.rule(2.0 * f.power + mu)?;
        rule.integrate(|m| f.psi(m).powi(2))
    }

    /// `int_B |grad F|^2 rho^mu dm`.
    pub fn grad_sq(&self, f: &FactoredField, mu: f64) -> Result<f64> {
        if f.power == 0.0 {
            let rule = self.rule(mu)?;
            return rule.integrate(|m| {
                let g = f.grad_psi(m);
                dot(&g, &g)
            });
        }
        let rule = self.rule(2.0 * f.power - 2.0 + mu)?;
        rule.integrate_nodes(|node| {
            let g = f.reduced_gradient(&node.point, node.rho);
            dot(&g, &g)
        })
    }

    pub fn norm_l2(&self, f: &FactoredField, mu: f64) -> Result<f64> {
        Ok(self.l2_sq(f, mu)?.sqrt())
    }

    pub fn norm_h1(&self, f: &FactoredField, mu: f64) -> Result<f64> {
        Ok((self.l2_sq(f, mu)? + self.grad_sq(f, mu)?).sqrt())
    }

    /// `(||F||_{L^2_{mu-2}}, ||F||_{H^1_mu})`.
    ///
    /// For `mu < 1` the field must vanish on the boundary (`power > 0`).
    pub fn embedding_defect(&self, f: &FactoredField, mu: f64) -> Result<(f64, f64)> {
        if mu == 1.0 {
            return Err(Error::InvalidParameter("embedding needs mu != 1".into()));
        }
        if mu < 1.0 && f.power <= 0.0 {
            return Err(Error::Integrability { exponent: 2.0 * f.power + mu - 2.0 });
        }
        Ok((self.norm_l2(f, mu - 2.0)?, self.norm_h1(f, mu)?))
    }

    /// `(||F||_{H^1_{-b/2}}, ||F / rho^{b/2}||_{H^1_{b/2}})`.
    pub fn equivalence_ratio(&self, f: &FactoredField) -> Result<(f64, f64)> {
        let half = 0.5 * self.b;
        if !(self.b > 2.0) {
            return Err(Error::ConditionB { b: self.b });
        }
        let a = self.norm_h1(f, -half)?;
        let c = self.norm_h1(&f.divide_rho(half), half)?;
        Ok((a, c))
    }

    /// `(int_{dB_r} F^2 dS)^{1/2}` with `F` evaluated on trace nodes.
    pub fn circle_trace_norm<F: Fn(&TraceNode) -> f64>(&self, f: F, r: f64) -> Result<f64> {
        let rule = TraceRule::new(self.n, self.b, r, self.n_angular)?;
        Ok(rule.integrate(|node| f(node).powi(2)).sqrt())
    }

    /// Trace norms on the radius ladder, extrapolated to the boundary.
    pub fn trace_profile<F: Fn(&TraceNode) -> f64>(&self, ladder: &RadiusLadder, f: F) -> Result<BoundaryLimit> {
        let sb = self.b.sqrt();
        let mut err = None;
        let lim = ladder.limit(sb, |d| match TraceRule::at_distance(self.n, self.b, d, self.n_angular) {
            Ok(rule) => rule.integrate(|node| f(node).powi(2)).sqrt(),
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(lim),
        }
    }

    /// Profile of `||F d^{-1}||_{L^2(dB_r)}` toward the boundary.
    pub fn distance_trace_profile(&self, f: &FactoredField, ladder: &RadiusLadder) -> Result<BoundaryLimit> {
        self.trace_profile(ladder, |node| f.value(&node.point, node.rho) / node.dist)
    }

    /// Boundary value of `||F rho^{(gamma-1)/2}||_{L^2(dB_r)}`.
    pub fn t0_trace_norm(&self, f: &FactoredField, gamma: f64, ladder: &RadiusLadder) -> Result<BoundaryLimit> {
        if !(gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("T0 trace needs gamma < 1, got {gamma}")));
        }
        let shifted = f.divide_rho(0.5 * (1.0 - gamma));
        self.trace_profile(ladder, |node| shifted.value(&node.point, node.rho))
    }
}
