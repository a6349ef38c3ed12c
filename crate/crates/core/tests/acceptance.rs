//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use fene::galerkin::{garding_constants, integrate, picard_solve, BasisOptions, BasisSet, OperatorParts, Weighting};
use fene::geometry::{KappaSchedule, ModelParams};
use fene::scenarios::{
    check_positivity, decay_exponent, embedding_ratios, equivalence_bounds, positivity_certificate, project_initial,
    separation, sign_identity, solve_fpf, solve_nonunique, EmbeddingBranch, Forcing, FpfProblem, InitialData,
    NonUniqueProblem, Resolution, FIT_TAIL,
};
use fene::weighted::QuadratureRule;

type Outcome = (bool, String);

fn shear(b: f64, rate: f64) -> ModelParams {
    ModelParams::new(2, b, KappaSchedule::Shear { rate }, 1.0).unwrap()
}

fn conservation() -> Outcome {
    let t = Instant::now();
    let prob = FpfProblem { params: shear(4.0, 1.0), initial: InitialData::default(), resolution: Resolution::default() };
    let (_, rep) = solve_fpf(&prob).unwrap();
    let secs = t.elapsed().as_secs_f64();
    (rep.mass_drift < 1e-8 && secs < 60.0, format!("mass drift {:.2e} in {secs:.1}s", rep.mass_drift))
}

fn positivity() -> Outcome {
    let run = |res: Resolution| {
        let prob = FpfProblem { params: shear(4.0, 1.0), initial: InitialData::Bump, resolution: res };
        let (_, rep) = solve_fpf(&prob).unwrap();
        check_positivity(&rep.series, 0.0).min_f
    };
    let coarse = run(Resolution::default());
    let fine = run(Resolution::default().doubled());
    let cert = positivity_certificate(&ModelParams::at_rest(4.0).unwrap()).unwrap();
    // with alpha = 1/2, K = 1: c = -u^2 + 6.5 u - 12 for u = |m|^2, maximal at u = 3.25
    let disc: f64 = 6.5 * 6.5 - 4.0 * 12.0;
    let peak = -3.25f64 * 3.25 + 6.5 * 3.25 - 12.0;
    let cert_ok = cert.alpha == 0.5
        && cert.k == 1.0
        && disc < 0.0
        && (cert.sup_bound - peak).abs() < 1e-12
        && cert.sup_grid <= cert.sup_bound + 1e-12;
    (
        coarse >= -1e-6 && fine >= -1e-8 && cert_ok,
        format!(
            "min f {coarse:.2e} (default), {fine:.2e} (doubled); certificate alpha {} K {} sup c {:.4}",
            cert.alpha, cert.k, cert.sup_bound
        ),
    )
}

fn equilibrium() -> Outcome {
    let prob = FpfProblem {
        params: ModelParams::at_rest(4.0).unwrap(),
        initial: InitialData::Equilibrium,
        resolution: Resolution::default(),
    };
    let (_, rep) = solve_fpf(&prob).unwrap();
    let first = rep.series[0].norm_f_l2_neg_b2;
    let drift = rep.series.iter().map(|r| (r.norm_f_l2_neg_b2 - first).abs()).fold(0.0, f64::max) / first;
    // ||f_eq||^2_{L^2_{-b/2}} = 1 / Z with Z = 64 pi / 3 at b = 4
    let norm_ok = (first * first - 3.0 / (64.0 * PI)).abs() < 1e-12;
    (drift < 1e-8 && norm_ok, format!("relative L2(-b/2) drift {drift:.2e}, ||f_eq||^2 = {:.15}", first * first))
}

fn energy() -> Outcome {
    let levels = [
        Resolution { k_r: 4, k_theta: 3, n_angular_quad: 32, n_timesteps: 100, ..Resolution::default() },
        Resolution::default(),
        Resolution::default().doubled(),
    ];
    let ratios: Vec<f64> = levels
        .par_iter()
        .map(|res| {
            let prob = FpfProblem {
                params: shear(4.0, 1.0),
                initial: InitialData::RandomLowMode { seed: 7, degree: 3, amplitude: 0.3 },
                resolution: *res,
            };
            solve_fpf(&prob).unwrap().1.energy_ratio
        })
        .collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    (hi.is_finite() && hi <= 1.05 * lo, format!("max_t ||w|| / ||w0|| over levels: {ratios:.4?}"))
}

fn garding() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut detail = Vec::new();
    for b in [2.5, 3.0, 4.0, 6.0] {
        let p = ModelParams::at_rest(b).unwrap();
        let res = Resolution::default();
        let basis = BasisSet::new(&p, p.beta(), res.w_basis(&p)).unwrap();
        let parts = OperatorParts::new(&p, &basis, Weighting::Beta).unwrap();
        for rate in [0.0, 1.0, 2.0] {
            let k = KappaSchedule::Shear { rate }.at(0.0);
            let c1 = garding_constants(&parts.at(&k)).map(|g| g.c1).unwrap_or(f64::NEG_INFINITY);
            worst = worst.min(c1);
        }
        detail.push(format!("b={b}"));
    }
    (worst > 0.0, format!("smallest C1 {worst:.4} over {} x rates 0,1,2", detail.join(",")))
}

fn embedding() -> Outcome {
    let p = ModelParams::at_rest(4.0).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for branch in [EmbeddingBranch::Beta, EmbeddingBranch::HalfB] {
        let sup = |kr, kt| embedding_ratios(&p, kr, kt, branch).unwrap().into_iter().fold(0.0, f64::max);
        let (a, b) = (sup(8, 6), sup(16, 12));
        pass &= a.is_finite() && (b - a).abs() <= 0.1 * a;
        detail.push(format!("{branch:?}: C0 {a:.4} -> {b:.4}"));
    }
    (pass, detail.join("; "))
}

fn equivalence() -> Outcome {
    let bs = [6.0, 4.0, 3.0, 2.5, 2.1];
    let bounds: Vec<f64> = bs.iter().map(|b| equivalence_bounds(*b, 4, 2).unwrap().max()).collect();
    let monotone = bounds.windows(2).all(|w| w[1] > w[0]);
    (bounds.iter().all(|x| x.is_finite()) && monotone, format!("bound over b = {bs:?}: {bounds:.4?}"))
}

fn sign_identity_check() -> Outcome {
    let p = ModelParams::at_rest(4.0).unwrap();
    let res = Resolution::default();
    let opts = BasisOptions::new(res.k_r, res.k_theta, res.n_radial_quad, res.n_angular_quad);
    let r = sign_identity(&p, 0.75, opts, 100, 11).unwrap();
    (
        r.max_lhs <= 1e-10 && r.max_mismatch <= 1e-9,
        format!("100 vectors: max lhs {:.3e}, max relative mismatch {:.2e}", r.max_lhs, r.max_mismatch),
    )
}

fn uniqueness() -> Outcome {
    let prob = FpfProblem { params: shear(4.0, 1.0), initial: InitialData::Zero, resolution: Resolution::default() };
    let (_, rep) = solve_fpf(&prob).unwrap();
    let norm = rep.series.iter().map(|r| r.norm_f_l2_neg_b2).fold(0.0, f64::max);
    (norm < 1e-12, format!("max_t ||f|| {norm:.2e}"))
}

fn nonuniqueness() -> Outcome {
    let p = ModelParams::at_rest(4.0).unwrap();
    let refined = Resolution { k_r: 12, k_theta: 9, n_angular_quad: 96, n_timesteps: 300, ..Resolution::default() };
    let jobs: Vec<(f64, Resolution)> =
        vec![(1.0, Resolution::default()), (2.0, Resolution::default()), (1.0, refined), (2.0, refined)];
    let runs: Vec<_> = jobs
        .par_iter()
        .map(|(scale, res)| {
            let prob = NonUniqueProblem {
                params: p.clone(),
                forcing: Forcing::TR2 { scale: *scale },
                gamma: Some(0.75),
                resolution: *res,
                log_modes: 2,
            };
            solve_nonunique(&prob).unwrap()
        })
        .collect();
    let radius = 0.9 * p.sqrt_b();
    let sep = separation(&p, &runs[0].0, &runs[1].0, radius).unwrap();
    let sep_fine = separation(&p, &runs[2].0, &runs[3].0, radius).unwrap();
    let weak = runs.iter().map(|r| r.1.weak_residual.relative).fold(0.0, f64::max);
    let zero_start = runs.iter().all(|r| r.1.initial_max == 0.0);
    // g = s t |m|^2 equals s t b on the boundary: ||g(T)||_{L^2(dB)} = s b sqrt(2 pi sqrt b)
    let mut traces_ok = true;
    let mut limits = Vec::new();
    for (r, (scale, _)) in runs.iter().zip(&jobs) {
        let expected = 2.0 * p.sqrt_b() * scale * p.b() * (2.0 * PI * p.sqrt_b()).sqrt();
        let lim = r.1.trace_final.value;
        traces_ok &= (lim - expected).abs() < 1e-6 * expected && lim >= 0.1 * r.1.interior_trace;
        limits.push(lim);
    }
    let eq = FpfProblem {
        params: ModelParams::at_rest(4.0).unwrap(),
        initial: InitialData::Equilibrium,
        resolution: Resolution::default(),
    };
    let (_, eq_rep) = solve_fpf(&eq).unwrap();
    let exponent = decay_exponent(&eq_rep.trace_final, FIT_TAIL);
    let eq_ok = (exponent - 1.0).abs() < 0.05 && eq_rep.trace_final.value.abs() < 1e-6;
    let pass = weak < 1e-6
        && zero_start
        && sep > 1e3 * 1e-10
        && (sep_fine - sep).abs() < 0.05 * sep
        && traces_ok
        && eq_ok;
    (
        pass,
        format!(
            "weak residual {weak:.2e}; separation {sep:.4} -> {sep_fine:.4}; trace limits {limits:.4?}; \
             equilibrium limit {:.1e} with decay exponent {exponent:.4}",
            eq_rep.trace_final.value
        ),
    )
}

fn picard() -> Outcome {
    let p = shear(4.0, 1.0);
    let res = Resolution::default();
    let basis = Arc::new(BasisSet::new(&p, p.beta(), res.w_basis(&p)).unwrap());
    let parts = OperatorParts::new(&p, &basis, Weighting::Beta).unwrap();
    let (d0, _) = project_initial(&p, &basis, &InitialData::default()).unwrap();
    let direct = integrate(&p, &parts, &d0, res.n_timesteps, None).unwrap();
    let (fixed, rep) = picard_solve(&p, &parts, &d0, res.n_timesteps, 50, 1e-12).unwrap();
    let gap = direct
        .iter()
        .zip(&fixed)
        .map(|(a, b)| {
            let e = a - b;
            e.dot(&(parts.mass() * &e)).sqrt()
        })
        .fold(0.0, f64::max);
    let factor = rep.max_factor();
    (gap < 1e-8 && factor < 0.9, format!("sup_t gap {gap:.2e}, contraction factor {factor:.3}"))
}

fn quadrature() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for b in [2.5, 4.0, 6.0] {
        for mu in [-0.75, -0.5, 0.0, 0.75, 2.0, 3.5] {
            let rule = QuadratureRule::new(2, b, mu, 64, 64).unwrap();
            let mass = rule.integrate(|_| 1.0).unwrap();
            let second = rule.integrate(|m| m.norm_sq()).unwrap();
            let mass_exact = PI * f64::powf(b, mu + 1.0) / (mu + 1.0);
            let second_exact = PI * f64::powf(b, mu + 2.0) / ((mu + 1.0) * (mu + 2.0));
            worst = worst.max(common::rel_err(mass, mass_exact)).max(common::rel_err(second, second_exact));
            let oracle = common::radial_weighted(|u| u, b, mu, 1e-13);
            worst_oracle = worst_oracle.max(common::rel_err(second, oracle));
        }
    }
    let z = QuadratureRule::new(2, 4.0, 2.0, 64, 64).unwrap().integrate(|_| 1.0).unwrap();
    let z_err = common::rel_err(z, 64.0 * PI / 3.0);
    worst = worst.max(z_err);
    (
        worst < 1e-12 && worst_oracle < 1e-10,
        format!("worst relative error {worst:.1e} (closed forms), {worst_oracle:.1e} (adaptive oracle); Z(4) error {z_err:.1e}"),
    )
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("conservation", conservation),
        ("positivity", positivity),
        ("equilibrium steadiness", equilibrium),
        ("energy estimate", energy),
        ("garding certificate", garding),
        ("embedding", embedding),
        ("norm equivalence", equivalence),
        ("sign identity", sign_identity_check),
        ("uniqueness under the sharp boundary condition", uniqueness),
        ("non-uniqueness under the relaxed boundary condition", nonuniqueness),
        ("picard and direct solve agree", picard),
        ("quadrature oracle", quadrature),
    ];
    let results: Vec<(Outcome, f64)> = criteria
        .par_iter()
        .map(|(_, f)| {
            let t = Instant::now();
            let out = std::panic::catch_unwind(f).unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            });
            (out, t.elapsed().as_secs_f64())
        })
        .collect();
    let mut failed = 0;
    for (i, ((name, _), ((pass, detail), secs))) in criteria.iter().zip(&results).enumerate() {
        println!("{} criterion {:>2} {name}: {detail} [{secs:.1}s]", if *pass { "PASS" } else { "FAIL" }, i + 1);
        failed += usize::from(!pass);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
