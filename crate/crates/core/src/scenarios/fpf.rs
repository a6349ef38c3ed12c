use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::galerkin::{
    garding_constants, integrate, time_grid, BasisSet, GardingConstants, OperatorParts,
    SolutionTrajectory, Weighting,
};
use crate::geometry::{BoundaryLimit, ModelParams, RadiusLadder};
use crate::scenarios::data::{InitialData, Resolution};
use crate::scenarios::monitor::{trace_profile, Monitor, SeriesRow};
use crate::scenarios::weak::{weak_residual, TestSet, WeakResidual};
use crate::weighted::{FactoredField, QuadratureRule};

/// The Fokker-Planck problem with the sharp boundary requirement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpfProblem {
    pub params: ModelParams,
    pub initial: InitialData,
    pub resolution: Resolution,
}

/// Diagnostics gathered along one solve.
#[derive(Debug, Clone, Serialize)]
pub struct FpfReport {
    pub basis_size: usize,
    pub boundary_power: f64,
    pub gram_condition: f64,
    /// `||w_0 - P w_0||_{L^2_beta}` for the projection `P` onto the span.
    pub projection_error: f64,
    pub series: Vec<SeriesRow>,
    /// `max_t |mass(t) - mass(0)| / |mass(0)|`
    pub mass_drift: f64,
    pub min_f: f64,
    /// `max_t ||w(t)||_{L^2_beta} / ||w_0||_{L^2_beta}`
    pub energy_ratio: f64,
    /// `max_t | ||f||_{L^2_{-b/2}} - ||w||_{L^2_beta} |`, relative to `max_t ||w||`
    pub norm_identity_gap: f64,
    /// Constants at a sample of times: smallest `C1`, largest `C2`.
    pub garding: GardingConstants,
    pub trace_final: BoundaryLimit,
    pub weak_residual: WeakResidual,
}

/// Projects `f_0 / rho` onto the basis in `L^2_mu`; returns the coefficients
/// and the projection error.
pub fn project_initial(p: &ModelParams, basis: &BasisSet, initial: &InitialData) -> Result<(DVector<f64>, f64)> {
    if *initial == InitialData::Zero {
        return Ok((DVector::zeros(basis.len()), 0.0));
    }
    let field = initial.field(p)?;
    project_field(p, basis, &field)
}

fn project_field(p: &ModelParams, basis: &BasisSet, field: &FactoredField) -> Result<(DVector<f64>, f64)> {
    let b = p.b();
    let q = field.power;
    // f_0 in L^2_{-b/2} iff int chi^2 rho^{2q - b/2} < inf
    if !(2.0 * q - 0.5 * b > -1.0) {
        return Err(Error::Inadmissible(format!(
            "rho^{q} has infinite L^2_(-b/2) norm for b = {b}"
        )));
    }
    let mu = basis.exponent();
    let s = basis.power();
    let rule = basis.companion_rule(q - 1.0 + s + mu)?;
    let tab = basis.tabulate(rule.clone());
    let chi = DVector::from_iterator(rule.nodes().len(), rule.nodes().iter().map(|n| n.point).map(|m| field.psi(&m)));
    let w = tab.weights();
    let rhs = tab.psi.tr_mul(&w.component_mul(&chi));
    let chol = basis
        .gram()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Basis { condition: basis.condition_number() })?;
    let d = chol.solve(&rhs);
    let full_rule = QuadratureRule::new(2, b, 2.0 * q - 2.0 + mu, basis.options().n_radial, basis.options().n_angular)?;
    let full = full_rule.integrate(|m| field.psi(m).powi(2))?;
    let err = (full - d.dot(&(basis.gram() * &d))).max(0.0).sqrt();
    Ok((d, err))
}

/// Solves the W-problem for `w = f / rho` and reconstructs `f`.
pub fn solve_fpf(prob: &FpfProblem) -> Result<(SolutionTrajectory, FpfReport)> {
    let p = &prob.params;
    let res = prob.resolution;
    res.validate()?;
    let basis = Arc::new(BasisSet::new(p, p.beta(), res.w_basis(p))?);
    let parts = OperatorParts::new(p, &basis, Weighting::Beta)?;
    let (d0, projection_error) = project_initial(p, &basis, &prob.initial)?;
    let coeffs = integrate(p, &parts, &d0, res.n_timesteps, None)?;
    let times = time_grid(p.horizon(), res.n_timesteps);
    let traj = SolutionTrajectory::new(times, coeffs, basis.clone(), None);
    let report = fpf_report(p, &parts, &traj, projection_error)?;
    Ok((traj, report))
}

fn sampled_garding(p: &ModelParams, parts: &OperatorParts) -> Result<GardingConstants> {
    let mut out = GardingConstants { c1: f64::INFINITY, c2: 0.0, diffusion: f64::INFINITY };
    for i in 0..=10 {
        let t = p.horizon() * i as f64 / 10.0;
        let g = garding_constants(&parts.at(&p.kappa_at(t)))?;
        out.c1 = out.c1.min(g.c1);
        out.c2 = out.c2.max(g.c2);
        out.diffusion = out.diffusion.min(g.diffusion);
    }
    Ok(out)
}

fn fpf_report(
    p: &ModelParams,
    parts: &OperatorParts,
    traj: &SolutionTrajectory,
    projection_error: f64,
) -> Result<FpfReport> {
    let basis = traj.basis();
    let h1: DMatrix<f64> = 2.0 * parts.stiffness() + parts.mass();
    let monitor = Monitor::new(p, basis, false, h1)?;
    let series = monitor.series(traj)?;
    let m0 = series[0].mass;
    let mass_drift = series.iter().map(|r| (r.mass - m0).abs()).fold(0.0, f64::max) / m0.abs().max(1e-300);
    let min_f = series.iter().map(|r| r.min_f).fold(f64::INFINITY, f64::min);
    let w0 = series[0].norm_w_l2;
    let wmax = series.iter().map(|r| r.norm_w_l2).fold(0.0, f64::max);
    let energy_ratio = if w0 > 0.0 { wmax / w0 } else { 0.0 };
    let norm_identity_gap = series
        .iter()
        .map(|r| (r.norm_f_l2_neg_b2 - r.norm_w_l2).abs())
        .fold(0.0, f64::max)
        / wmax.max(1e-300);
    let trace_final = trace_profile(traj, traj.len() - 1, &RadiusLadder::default())?;
    let weak = weak_residual(p, traj, &TestSet::standard(p))?;
    Ok(FpfReport {
        basis_size: basis.len(),
        boundary_power: basis.power(),
        gram_condition: basis.condition_number(),
        projection_error,
        series,
        mass_drift,
        min_f,
        energy_ratio,
        norm_identity_gap,
        garding: sampled_garding(p, parts)?,
        trace_final,
        weak_residual: weak,
    })
}

/// Outcome of the numerical positivity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityReport {
    pub min_f: f64,
    pub time_of_min: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// True when `f` is already negative at `t = 0`.
    pub negative_initially: bool,
}

/// Minimum of `f` over monitor nodes and output times; passes iff `min >= -tol`.
pub fn check_positivity(series: &[SeriesRow], tol: f64) -> PositivityReport {
    let (mut min_f, mut at) = (f64::INFINITY, 0.0);
    for r in series {
        if r.min_f < min_f {
            min_f = r.min_f;
            at = r.t;
        }
    }
    let negative_initially = series.first().is_some_and(|r| r.min_f < -tol);
    PositivityReport { min_f, time_of_min: at, tolerance: tol, pass: min_f >= -tol, negative_initially }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::KappaSchedule;

    fn small() -> Resolution {
        Resolution { k_r: 4, k_theta: 3, n_radial_quad: 24, n_angular_quad: 24, n_timesteps: 20 }
    }

    #[test]
    fn equilibrium_is_steady() {
        let prob = FpfProblem { params: ModelParams::at_rest(4.0).unwrap(), initial: InitialData::Equilibrium, resolution: small() };
        let (_, rep) = solve_fpf(&prob).unwrap();
        let first = rep.series[0].norm_f_l2_neg_b2;
        for r in &rep.series {
            assert!((r.norm_f_l2_neg_b2 - first).abs() < 1e-12 * first);
        }
        assert!(rep.projection_error < 1e-12);
        assert!(rep.weak_residual.relative < 1e-10, "{:?}", rep.weak_residual);
        assert!((rep.series[0].mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inadmissible_data_is_rejected() {
        let prob = FpfProblem {
            params: ModelParams::at_rest(4.0).unwrap(),
            initial: InitialData::RhoPower { power: 0.4 },
            resolution: small(),
        };
        assert!(matches!(solve_fpf(&prob), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn signed_data_is_flagged() {
        let prob = FpfProblem {
            params: ModelParams::new(2, 4.0, KappaSchedule::Zero, 0.1).unwrap(),
            initial: InitialData::Signed,
            resolution: small(),
        };
        let (_, rep) = solve_fpf(&prob).unwrap();
        let pos = check_positivity(&rep.series, 1e-6);
        assert!(pos.negative_initially && !pos.pass);
    }
}
