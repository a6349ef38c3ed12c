use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Result;
use crate::galerkin::{BasisSet, SolutionTrajectory};
use crate::geometry::{ModelParams, RadiusLadder, BoundaryLimit};
use crate::weighted::{QuadratureRule, TraceRule};

/// One output row of the diagnostic time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    pub mass: f64,
    pub min_f: f64,
    /// `||f||_{L^2_{-b/2}}`, by quadrature of the reconstructed density.
    pub norm_f_l2_neg_b2: f64,
    /// `||w||_{L^2_mu}` from the mass matrix.
    pub norm_w_l2: f64,
    pub norm_w_h1: f64,
}

/// Basis values divided by `rho^p` on the nodes of one rule; `f = rho^{p+1} (table d)`.
struct NodeTable {
    rule: Arc<QuadratureRule>,
    basis: DMatrix<f64>,
    rho: DVector<f64>,
    power: f64,
}

impl NodeTable {
    fn new(basis: &BasisSet, rule: Arc<QuadratureRule>, power: f64) -> Self {
        let tab = basis.tabulate(rule.clone());
        let s = basis.power();
        let rho = DVector::from_iterator(rule.nodes().len(), rule.nodes().iter().map(|n| n.rho));
        let mut table = tab.psi;
        if s != power {
            for (q, mut row) in table.row_iter_mut().enumerate() {
                row *= rho[q].powf(s - power);
            }
        }
        NodeTable { rule, basis: table, rho, power }
    }

    /// `f / rho^p` at every node for one time.
    fn quotient(&self, traj: &SolutionTrajectory, k: usize) -> DVector<f64> {
        let mut v = &self.basis * &traj.coeffs[k];
        if let Some(l) = traj.lift() {
            let t = traj.times[k];
            for (q, node) in self.rule.nodes().iter().enumerate() {
                v[q] += l.value(t, &node.point) / self.rho[q].powf(self.power);
            }
        }
        v
    }
}

/// Precomputed tables for the per-step diagnostics of a trajectory.
pub struct Monitor {
    /// rule for `rho^{p+1}`: mass and nodal minimum
    mass: NodeTable,
    /// rule for `rho^{2p + 2 - b/2}`: `||f||_{L^2_{-b/2}}`
    norm: Option<NodeTable>,
    gram: DMatrix<f64>,
    h1: DMatrix<f64>,
}

impl Monitor {
    /// `h1` is the `H^1_mu` Gram matrix of the basis.
    pub fn new(p: &ModelParams, basis: &BasisSet, lifted: bool, h1: DMatrix<f64>) -> Result<Self> {
        // f = rho^{s+1} psi without a lift, f = rho (w + g) with one
        let power = if lifted { 0.0 } else { basis.power() };
        let o = basis.options();
        let mass_rule = basis.companion_rule(power + 1.0)?;
        let norm_mu = 2.0 * power + 2.0 - 0.5 * p.b();
        // independent nodes: graded radial rule at a different count
        let norm = if norm_mu > -1.0 {
            let rule = QuadratureRule::graded(2, p.b(), norm_mu, o.n_radial + 8, o.n_angular, 2)?;
            Some(NodeTable::new(basis, Arc::new(rule), power))
        } else {
            None
        };
        Ok(Monitor { mass: NodeTable::new(basis, mass_rule, power), norm, gram: basis.gram().clone(), h1 })
    }

    pub fn row(&self, traj: &SolutionTrajectory, k: usize) -> Result<SeriesRow> {
        let v = self.mass.quotient(traj, k);
        let nodes = self.mass.rule.nodes();
        let mut mass = 0.0;
        let mut min_f = f64::INFINITY;
        for (q, node) in nodes.iter().enumerate() {
            mass += node.weight * v[q];
            min_f = min_f.min(v[q] * self.mass.rho[q].powf(self.mass.power + 1.0));
        }
        let norm_f = match &self.norm {
            Some(t) => {
                let v = t.quotient(traj, k);
                t.rule.nodes().iter().zip(v.iter()).map(|(n, x)| n.weight * x * x).sum::<f64>().sqrt()
            }
            None => f64::INFINITY,
        };
        let d = &traj.coeffs[k];
        Ok(SeriesRow {
            t: traj.times[k],
            mass,
            min_f,
            norm_f_l2_neg_b2: norm_f,
            norm_w_l2: d.dot(&(&self.gram * d)).max(0.0).sqrt(),
            norm_w_h1: d.dot(&(&self.h1 * d)).max(0.0).sqrt(),
        })
    }

    pub fn series(&self, traj: &SolutionTrajectory) -> Result<Vec<SeriesRow>> {
        (0..traj.len()).map(|k| self.row(traj, k)).collect()
    }
}

/// `||f d^{-1}||_{L^2(dB_r)}` along the radius ladder at time index `k`.
pub fn trace_profile(traj: &SolutionTrajectory, k: usize, ladder: &RadiusLadder) -> Result<BoundaryLimit> {
    let basis = traj.basis();
    let b = basis.b();
    let n_angular = basis.options().n_angular;
    let sb = b.sqrt();
    let mut err = None;
    let lim = ladder.limit(sb, |d| match TraceRule::at_distance(2, b, d, n_angular) {
        Ok(rule) => rule
            .integrate(|node| {
                let f = traj.f(k, &node.point);
                (f / node.dist).powi(2)
            })
            .sqrt(),
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

/// Least-squares slope of `log v` against `log d` over the last `tail` ladder samples.
pub fn decay_exponent(limit: &BoundaryLimit, tail: usize) -> f64 {
    let pts: Vec<(f64, f64)> = limit
        .samples
        .iter()
        .rev()
        .take(tail)
        .filter(|s| s.2 > 0.0)
        .map(|s| (s.1.ln(), s.2.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
