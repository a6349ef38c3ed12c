use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::config::{RunConfig, Scenario};
use crate::diagnostics::output::{fmt_f64, series_csv, trace_csv, write_json, write_text};
use crate::error::{Error, Result};
use crate::galerkin::{garding_constants, BasisOptions, BasisSet, OperatorParts, Weighting};
use crate::geometry::{KappaSchedule, ModelParams};
use crate::scenarios::{
    check_positivity, default_gamma, embedding_ratios, equivalence_bounds, separation, sign_identity, solve_fpf,
    solve_nonunique, threshold_sweep, EmbeddingBranch, FpfProblem, FpfReport, InitialData, NonUniqueProblem,
    NonUniqueReport, SweepRow,
};

/// Tolerance of the linear solves; separations are measured against it.
pub const SOLVER_TOLERANCE: f64 = 1e-10;
pub const MASS_TOLERANCE: f64 = 1e-8;
pub const WEAK_TOLERANCE: f64 = 1e-6;
pub const POSITIVITY_TOLERANCE: f64 = 1e-6;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    InvariantFailure = 1,
    ConfigError = 2,
    NumericalFailure = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn from_error(e: &Error) -> Self {
        if e.is_config() {
            Status::ConfigError
        } else {
            Status::NumericalFailure
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Metadata<'a> {
    config_hash: String,
    version: &'static str,
    config: &'a RunConfig,
}

fn metadata(cfg: &RunConfig) -> Metadata<'_> {
    Metadata { config_hash: cfg.hash(), version: env!("CARGO_PKG_VERSION"), config: cfg }
}

#[derive(Debug, Clone, Serialize)]
struct FpfOutput<'a> {
    #[serde(flatten)]
    meta: Metadata<'a>,
    report: &'a FpfReport,
    positivity: crate::scenarios::PositivityReport,
    invariants: Vec<SuiteResult>,
}

#[derive(Debug, Clone, Serialize)]
struct NonUniqueOutput<'a> {
    #[serde(flatten)]
    meta: Metadata<'a>,
    report: &'a NonUniqueReport,
    invariants: Vec<SuiteResult>,
}

/// One named pass/fail verdict with the quantity it was decided on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl SuiteResult {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        SuiteResult { name: name.into(), pass, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn all_finite(rows: &[crate::scenarios::SeriesRow]) -> bool {
    rows.iter().all(|r| {
        [r.t, r.mass, r.min_f, r.norm_f_l2_neg_b2, r.norm_w_l2, r.norm_w_h1].iter().all(|x| x.is_finite())
    })
}

fn fpf_invariants(cfg: &RunConfig, rep: &FpfReport) -> Vec<SuiteResult> {
    let mut out = vec![
        SuiteResult::new(
            "conservation",
            rep.mass_drift < MASS_TOLERANCE,
            format!("relative mass drift {:.3e}", rep.mass_drift),
        ),
        SuiteResult::new("finite", all_finite(&rep.series), "all series values finite".into()),
    ];
    if cfg.initial.nonnegative() {
        let pos = check_positivity(&rep.series, POSITIVITY_TOLERANCE);
        out.push(SuiteResult::new("positivity", pos.pass, format!("min f {:.3e}", pos.min_f)));
    }
    out
}

/// Executes the configured scenario and writes its artifacts.
pub fn run(cfg: &RunConfig) -> Result<Vec<SuiteResult>> {
    let dir = cfg.output_dir();
    match cfg.scenario {
        Scenario::Sweep => sweep(cfg),
        Scenario::Check => check(cfg),
        Scenario::Nonunique => {
            let prob = NonUniqueProblem {
                params: cfg.params.clone(),
                forcing: cfg.nonunique.forcing.clone(),
                gamma: cfg.nonunique.gamma,
                resolution: cfg.resolution,
                log_modes: cfg.nonunique.log_modes,
            };
            let (_, rep) = solve_nonunique(&prob)?;
            let invariants = vec![
                SuiteResult::new("finite", all_finite(&rep.series), "all series values finite".into()),
                SuiteResult::new(
                    "weak_residual",
                    rep.weak_residual.relative < WEAK_TOLERANCE,
                    format!("relative weak residual {:.3e}", rep.weak_residual.relative),
                ),
            ];
            write_text(&dir, "timeseries.csv", &series_csv(&rep.series))?;
            write_text(&dir, "trace_profile.csv", &trace_csv(&rep.trace_final))?;
            write_json(&dir, "report.json", &NonUniqueOutput { meta: metadata(cfg), report: &rep, invariants: invariants.clone() })?;
            Ok(invariants)
        }
        _ => {
            let prob = FpfProblem { params: cfg.params.clone(), initial: cfg.initial.clone(), resolution: cfg.resolution };
            let (_, rep) = solve_fpf(&prob)?;
            let invariants = fpf_invariants(cfg, &rep);
            write_text(&dir, "timeseries.csv", &series_csv(&rep.series))?;
            write_text(&dir, "trace_profile.csv", &trace_csv(&rep.trace_final))?;
            let positivity = check_positivity(&rep.series, POSITIVITY_TOLERANCE);
            write_json(
                &dir,
                "report.json",
                &FpfOutput { meta: metadata(cfg), report: &rep, positivity, invariants: invariants.clone() },
            )?;
            Ok(invariants)
        }
    }
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("b,status,exponent,expected,limit\n");
    for row in rows {
        match row {
            SweepRow::Accepted { b, exponent, expected, limit, .. } => out.push_str(&format!(
                "{},accepted,{},{},{}\n",
                fmt_f64(*b),
                fmt_f64(*exponent),
                fmt_f64(*expected),
                fmt_f64(*limit)
            )),
            SweepRow::Rejected { b, reason } => out.push_str(&format!("{},{reason},,,\n", fmt_f64(*b))),
        }
    }
    out
}

fn entry_dir(dir: &Path, b: f64) -> std::path::PathBuf {
    dir.join(format!("b_{b}"))
}

/// Equilibrium trace profiles over `[sweep] b_values`, one subdirectory per entry.
pub fn sweep(cfg: &RunConfig) -> Result<Vec<SuiteResult>> {
    let dir = cfg.output_dir();
    let rows = threshold_sweep(&cfg.sweep.b_values);
    rows.par_iter().try_for_each(|row| -> Result<()> {
        let sub = entry_dir(&dir, row.b());
        match row {
            SweepRow::Accepted { profile, .. } => {
                let mut text = String::from("r,trace_norm\n");
                for (r, v) in profile {
                    text.push_str(&format!("{},{}\n", fmt_f64(*r), fmt_f64(*v)));
                }
                write_text(&sub, "trace_profile.csv", &text)
            }
            SweepRow::Rejected { reason, .. } => write_text(&sub, "rejected.txt", &format!("{reason}\n")),
        }
    })?;
    write_text(&dir, "sweep.csv", &sweep_csv(&rows))?;
    #[derive(Serialize)]
    struct SweepOutput<'a> {
        #[serde(flatten)]
        meta: Metadata<'a>,
        rows: &'a [SweepRow],
    }
    write_json(&dir, "report.json", &SweepOutput { meta: metadata(cfg), rows: &rows })?;
    Ok(rows
        .iter()
        .filter_map(|row| match row {
            SweepRow::Accepted { b, exponent, expected, .. } => Some(SuiteResult::new(
                &format!("decay_exponent b={b}"),
                (exponent - expected).abs() < 0.05,
                format!("fitted {exponent:.4}, expected {expected:.4}"),
            )),
            SweepRow::Rejected { .. } => None,
        })
        .collect())
}

fn suite<F: FnOnce() -> Result<(bool, String)>>(name: &str, f: F) -> SuiteResult {
    match f() {
        Ok((pass, detail)) => SuiteResult::new(name, pass, detail),
        Err(e) => SuiteResult::new(name, false, format!("error: {e}")),
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// The invariant suite at the configured `b` and resolution.
pub fn check(cfg: &RunConfig) -> Result<Vec<SuiteResult>> {
    let p = &cfg.params;
    let b = p.b();
    let res = cfg.resolution;
    let rest = ModelParams::at_rest(b)?.with_horizon(p.horizon())?;
    let mut out = Vec::new();
    out.push(suite("embedding", || {
        let mut detail = Vec::new();
        let mut pass = true;
        for branch in [EmbeddingBranch::Beta, EmbeddingBranch::HalfB] {
            let lo = max_of(&embedding_ratios(&rest, (res.k_r / 2).max(1), res.k_theta / 2, branch)?);
            let hi = max_of(&embedding_ratios(&rest, res.k_r, res.k_theta, branch)?);
            pass &= hi.is_finite() && (hi - lo).abs() <= 0.1 * lo;
            detail.push(format!("{branch:?} C0 {lo:.4} -> {hi:.4}"));
        }
        Ok((pass, detail.join(", ")))
    }));
    out.push(suite("trace", || {
        let rows = threshold_sweep(&[b]);
        match &rows[0] {
            SweepRow::Accepted { exponent, expected, limit, .. } => Ok((
                (exponent - expected).abs() < 0.05 && limit.abs() < 1e-6,
                format!("equilibrium limit {limit:.3e}, decay exponent {exponent:.4} (expected {expected:.4})"),
            )),
            SweepRow::Rejected { reason, .. } => Ok((false, reason.clone())),
        }
    }));
    out.push(suite("equivalence", || {
        let e = equivalence_bounds(b, 4, 2)?;
        let near = equivalence_bounds(2.0 + 0.5 * (b - 2.0), 4, 2)?;
        Ok((
            e.max().is_finite() && near.max() >= e.max(),
            format!("max ratio {:.4} at b={b}, {:.4} at b={}", e.max(), near.max(), near.b),
        ))
    }));
    out.push(suite("garding", || {
        let basis = BasisSet::new(&rest, rest.beta(), res.w_basis(&rest))?;
        let parts = OperatorParts::new(&rest, &basis, Weighting::Beta)?;
        let mut detail = Vec::new();
        let mut pass = true;
        for rate in [0.0, 1.0, 2.0] {
            let k = KappaSchedule::Shear { rate }.at(0.0);
            let g = garding_constants(&parts.at(&k))?;
            pass &= g.c1 > 0.0;
            detail.push(format!("rate {rate}: C1 {:.4} C2 {:.4}", g.c1, g.c2));
        }
        Ok((pass, detail.join(", ")))
    }));
    out.push(suite("sign_identity", || {
        let gamma = cfg.nonunique.gamma.unwrap_or_else(|| default_gamma(p));
        let opts = BasisOptions::new(res.k_r, res.k_theta, res.n_radial_quad, res.n_angular_quad);
        let r = sign_identity(&rest, gamma, opts, 100, 2024)?;
        Ok((
            r.max_lhs <= 1e-10 && r.max_mismatch <= 1e-9,
            format!("max lhs {:.3e}, max mismatch {:.3e}", r.max_lhs, r.max_mismatch),
        ))
    }));
    let shear = rest.with_kappa(KappaSchedule::Shear { rate: 1.0 })?;
    out.push(suite("conservation", || {
        let (_, rep) = solve_fpf(&FpfProblem { params: shear.clone(), initial: InitialData::default(), resolution: res })?;
        Ok((rep.mass_drift < MASS_TOLERANCE, format!("relative mass drift {:.3e}", rep.mass_drift)))
    }));
    out.push(suite("uniqueness", || {
        let (_, rep) = solve_fpf(&FpfProblem { params: shear.clone(), initial: InitialData::Zero, resolution: res })?;
        let norm = rep.series.iter().map(|r| r.norm_f_l2_neg_b2).fold(0.0, f64::max);
        Ok((norm < 1e-12, format!("max ||f||_L2(-b/2) {norm:.3e}")))
    }));
    out.push(suite("nonuniqueness", || {
        let make = |scale: f64| NonUniqueProblem {
            params: p.clone(),
            forcing: crate::scenarios::Forcing::TR2 { scale },
            gamma: cfg.nonunique.gamma,
            resolution: res,
            log_modes: cfg.nonunique.log_modes,
        };
        let pair: Vec<_> = [1.0, 2.0].par_iter().map(|s| solve_nonunique(&make(*s))).collect::<Result<_>>()?;
        let sep = separation(p, &pair[0].0, &pair[1].0, 0.9 * p.sqrt_b())?;
        let weak = pair[0].1.weak_residual.relative.max(pair[1].1.weak_residual.relative);
        Ok((
            sep > 1e3 * SOLVER_TOLERANCE && weak < WEAK_TOLERANCE,
            format!("separation {sep:.4e}, weak residual {weak:.3e}"),
        ))
    }));
    Ok(out)
}
