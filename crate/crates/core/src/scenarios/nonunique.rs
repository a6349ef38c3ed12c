use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::galerkin::{integrate, time_grid, BasisOptions, BasisSet, Lift, OperatorParts, SolutionTrajectory, Weighting};
use crate::geometry::{BoundaryLimit, Mat3, ModelParams, Point, RadiusLadder};
use crate::scenarios::data::{Forcing, Resolution};
use crate::scenarios::monitor::{trace_profile, Monitor, SeriesRow};
use crate::scenarios::weak::{weak_residual, TestSet, WeakResidual};
use crate::weighted::{QuadratureRule, TraceRule};

/// Zero initial data with the boundary value of `f / rho` prescribed by `g`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonUniqueProblem {
    pub params: ModelParams,
    pub forcing: Forcing,
    /// Weight exponent; `None` selects the midpoint of the admissible window.
    pub gamma: Option<f64>,
    pub resolution: Resolution,
    /// Radial degrees of the `rho log rho` family added to the basis.
    pub log_modes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonUniqueReport {
    pub gamma: f64,
    pub basis_size: usize,
    pub series: Vec<SeriesRow>,
    /// `max |f(0, .)|` on the monitor nodes.
    pub initial_max: f64,
    /// `||f(T)||_{L^2(B_{0.9 sqrt b})}`
    pub interior_norm: f64,
    /// `||f(T) d^{-1}||_{L^2(dB_r)}` at `r = sqrt(b) / 2`.
    pub interior_trace: f64,
    pub trace_final: BoundaryLimit,
    /// `2 sqrt(b) ||g(T)||_{L^2(dB)}`, the limit implied by `w = 0` on the boundary.
    pub trace_expected: f64,
    pub weak_residual: WeakResidual,
}

/// Lower end `max(beta, -1)` of the admissible window for `gamma`.
pub fn gamma_lower(p: &ModelParams) -> f64 {
    p.beta().max(-1.0)
}

pub fn default_gamma(p: &ModelParams) -> f64 {
    0.5 * (gamma_lower(p) + 1.0)
}

fn check_gamma(p: &ModelParams, gamma: f64) -> Result<()> {
    let lower = gamma_lower(p);
    if !(gamma > lower && gamma < 1.0) {
        return Err(Error::GammaWindow { gamma, lower });
    }
    Ok(())
}

/// Right-hand side pieces of the `w`-equation that are linear in the forcing profile.
struct ForcingLoads {
    /// `int s phi_j rho^gamma`
    mass: DVector<f64>,
    /// part of `B(s)` independent of `kappa`
    base: DVector<f64>,
    /// `kappa_ab` coefficients of `B(s)`
    flow: [[DVector<f64>; 2]; 2],
}

impl ForcingLoads {
    /// `B(s)_j = 1/2 int grad s . grad phi_j rho^gamma + (beta - gamma) int m . grad s phi_j rho^{gamma-1}
    ///         + int kappa m . grad s phi_j rho^gamma - int c s phi_j rho^{gamma-1}`
    fn new(p: &ModelParams, basis: &BasisSet, forcing: &Forcing, gamma: f64) -> Self {
        // s = 1: tables[1] carries rho^{1+gamma}, tables[2] carries rho^gamma
        let [_, t1, t2] = basis.tables();
        let len = basis.len();
        let c0 = p.n() as f64 * (0.5 * p.b() - 1.0);
        let mut mass = DVector::zeros(len);
        let mut base = DVector::zeros(len);
        let mut flow = [[DVector::zeros(len), DVector::zeros(len)], [DVector::zeros(len), DVector::zeros(len)]];
        for (q, node) in t1.rule.nodes().iter().enumerate() {
            let m = &node.point;
            let s = forcing.profile(m);
            let gs = forcing.profile_gradient(m);
            let row = t1.psi.row(q);
            for j in 0..len {
                let wp = node.weight * row[j];
                mass[j] += wp * s;
                for a in 0..2 {
                    for bb in 0..2 {
                        flow[a][bb][j] += wp * m.x[bb] * gs[a];
                    }
                }
            }
        }
        for (q, node) in t2.rule.nodes().iter().enumerate() {
            let m = &node.point;
            let s = forcing.profile(m);
            let gs = forcing.profile_gradient(m);
            let mgs = m.x[0] * gs[0] + m.x[1] * gs[1];
            for j in 0..len {
                let psi = t2.psi[(q, j)];
                let g = [t2.grad[0][(q, j)], t2.grad[1][(q, j)]];
                base[j] += node.weight
                    * (0.5 * (gs[0] * g[0] + gs[1] * g[1]) + (p.beta() - gamma) * mgs * psi - c0 * s * psi);
                for a in 0..2 {
                    for bb in 0..2 {
                        flow[a][bb][j] -= node.weight * 2.0 * m.x[a] * m.x[bb] * s * psi;
                    }
                }
            }
        }
        ForcingLoads { mass, base, flow }
    }

    fn b_vector(&self, k: &Mat3) -> DVector<f64> {
        let mut v = self.base.clone();
        for a in 0..2 {
            for bb in 0..2 {
                if k[a][bb] != 0.0 {
                    v += k[a][bb] * &self.flow[a][bb];
                }
            }
        }
        v
    }
}

/// Builds the problem for `w = f / rho - g` in the `gamma`-weighted space and
/// returns the trajectory of `f = (w + g) rho`.
pub fn solve_nonunique(prob: &NonUniqueProblem) -> Result<(SolutionTrajectory, NonUniqueReport)> {
    let p = &prob.params;
    let res = prob.resolution;
    res.validate()?;
    let gamma = prob.gamma.unwrap_or_else(|| default_gamma(p));
    check_gamma(p, gamma)?;
    prob.forcing.check(p)?;
    let options =
        BasisOptions::new(res.k_r, res.k_theta, res.n_radial_quad, res.n_angular_quad).with_log_modes(prob.log_modes);
    let basis = Arc::new(BasisSet::new(p, gamma, options)?);
    if basis.power() != 1.0 {
        return Err(Error::Unsupported("forcing loads assume a first-order boundary factor".into()));
    }
    let parts = OperatorParts::new(p, &basis, Weighting::Gamma(gamma))?;
    let loads = ForcingLoads::new(p, &basis, &prob.forcing, gamma);
    let forcing = prob.forcing.clone();
    let load = move |t0: f64, t1: f64, k: &Mat3| -> Result<DVector<f64>> {
        let rate = (forcing.amplitude(t1) - forcing.amplitude(t0)) / (t1 - t0);
        let mean = 0.5 * (forcing.amplitude(t0) + forcing.amplitude(t1));
        Ok(-(rate * &loads.mass + mean * loads.b_vector(k)))
    };
    let d0 = DVector::zeros(basis.len());
    let coeffs = integrate(p, &parts, &d0, res.n_timesteps, Some(&load))?;
    let times = time_grid(p.horizon(), res.n_timesteps);
    let lift: Arc<dyn Lift> = Arc::new(prob.forcing.clone());
    let traj = SolutionTrajectory::new(times, coeffs, basis.clone(), Some(lift));

    let h1: DMatrix<f64> = 2.0 * parts.stiffness() + parts.mass();
    let monitor = Monitor::new(p, &basis, true, h1)?;
    let series = monitor.series(&traj)?;
    let last = traj.len() - 1;
    let tests = TestSet::standard(p);
    let sub = QuadratureRule::sub_ball(2, p.b(), tests.radius, tests.n_radial, tests.n_angular)?;
    let interior_norm = sub.integrate(|m| traj.f(last, m).powi(2))?.sqrt();
    let initial_max = sub.nodes().iter().map(|n| traj.f(0, &n.point).abs()).fold(0.0, f64::max);
    let mid = TraceRule::new(2, p.b(), 0.5 * p.sqrt_b(), res.n_angular_quad)?;
    let interior_trace = mid
        .integrate(|node| (traj.f(last, &node.point) / node.dist).powi(2))
        .sqrt();
    let boundary = TraceRule::at_distance(2, p.b(), 0.0, res.n_angular_quad)?;
    let t_end = traj.times[last];
    let trace_expected = 2.0 * p.sqrt_b() * boundary.integrate(|node| prob.forcing.value(t_end, &node.point).powi(2)).sqrt();
    let report = NonUniqueReport {
        gamma,
        basis_size: basis.len(),
        series,
        initial_max,
        interior_norm,
        interior_trace,
        trace_final: trace_profile(&traj, last, &RadiusLadder::default())?,
        trace_expected,
        weak_residual: weak_residual(p, &traj, &tests)?,
    };
    Ok((traj, report))
}

/// `||f_1(T) - f_2(T)||_{L^2(B_R)}` for two trajectories on the same time grid.
pub fn separation(p: &ModelParams, a: &SolutionTrajectory, b: &SolutionTrajectory, radius: f64) -> Result<f64> {
    let rule = QuadratureRule::sub_ball(2, p.b(), radius, 24, 48)?;
    let (ka, kb) = (a.len() - 1, b.len() - 1);
    Ok(rule.integrate(|m: &Point| (a.f(ka, m) - b.f(kb, m)).powi(2))?.sqrt())
}
