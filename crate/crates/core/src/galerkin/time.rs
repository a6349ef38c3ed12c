use std::sync::Arc;

use nalgebra::{DMatrix, DVector, LU};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::galerkin::assemble::OperatorParts;
use crate::galerkin::basis::BasisSet;
use crate::geometry::{rho_unchecked, Mat3, ModelParams, Point};

/// Known part `g` of the solution in `f = (w + g) rho`.
pub trait Lift: Send + Sync + std::fmt::Debug {
    fn value(&self, t: f64, m: &Point) -> f64;
    fn gradient(&self, t: f64, m: &Point) -> [f64; 2];
}

/// Source `h_mid` of one Crank-Nicolson step on `[t0, t1]`, given `kappa` at the midpoint.
pub type LoadFn<'a> = dyn Fn(f64, f64, &Mat3) -> Result<DVector<f64>> + 'a;

/// One Crank-Nicolson step:
/// `M (d1 - d0) / dt + A (d0 + d1) / 2 = h`.
pub fn cn_step(
    mass: &DMatrix<f64>,
    system: &DMatrix<f64>,
    d0: &DVector<f64>,
    load: Option<&DVector<f64>>,
    dt: f64,
) -> Result<DVector<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step {dt}")));
    }
    let lhs = mass + (0.5 * dt) * system;
    let mut rhs = mass * d0 - (0.5 * dt) * (system * d0);
    if let Some(h) = load {
        rhs += dt * h;
    }
    lhs.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::LinearSolve("singular Crank-Nicolson matrix".into()))
}

/// Factorization cache for consecutive steps with the same midpoint `kappa`.
struct Stepper<'a> {
    parts: &'a OperatorParts,
    dt: f64,
    with_reaction: bool,
    cached: Option<(Mat3, LU<f64, nalgebra::Dyn, nalgebra::Dyn>, DMatrix<f64>)>,
}

impl<'a> Stepper<'a> {
    fn new(parts: &'a OperatorParts, dt: f64, with_reaction: bool) -> Self {
        Stepper { parts, dt, with_reaction, cached: None }
    }

    fn prepare(&mut self, k: &Mat3) {
        if let Some((kc, _, _)) = &self.cached {
            if kc == k {
                return;
            }
        }
        let a = if self.with_reaction { self.parts.system(k) } else { self.parts.bilinear(k) };
        let lhs = self.parts.mass() + (0.5 * self.dt) * &a;
        let rhs_op = self.parts.mass() - (0.5 * self.dt) * &a;
        self.cached = Some((*k, lhs.lu(), rhs_op));
    }

    fn step(&mut self, k: &Mat3, d0: &DVector<f64>, source: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        self.prepare(k);
        let (_, lu, rhs_op) = self.cached.as_ref().expect("prepared");
        let mut rhs = rhs_op * d0;
        if let Some(h) = source {
            rhs += self.dt * h;
        }
        let d1 = lu
            .solve(&rhs)
            .ok_or_else(|| Error::LinearSolve("singular Crank-Nicolson matrix".into()))?;
        if d1.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("non-finite coefficients".into()));
        }
        Ok(d1)
    }
}

/// Uniform time grid `t_k = k T / N`.
pub fn time_grid(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect()
}

/// Direct Crank-Nicolson integration with the reaction folded into `A(t)`.
pub fn integrate(
    p: &ModelParams,
    parts: &OperatorParts,
    d0: &DVector<f64>,
    steps: usize,
    load: Option<&LoadFn>,
) -> Result<Vec<DVector<f64>>> {
    if steps == 0 {
        return Err(Error::InvalidParameter("at least one time step is required".into()));
    }
    let times = time_grid(p.horizon(), steps);
    let dt = p.horizon() / steps as f64;
    let mut stepper = Stepper::new(parts, dt, true);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(d0.clone());
    for k in 0..steps {
        let (t0, t1) = (times[k], times[k + 1]);
        let kappa = p.kappa_at(0.5 * (t0 + t1));
        let h = match load {
            Some(f) => Some(f(t0, t1, &kappa)?),
            None => None,
        };
        let next = stepper.step(&kappa, &out[k], h.as_ref())?;
        out.push(next);
    }
    Ok(out)
}

/// Summary of one continuation window of the Picard iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardWindow {
    pub start: f64,
    pub length: f64,
    pub iterations: usize,
    /// Successive distance ratios `delta_{j+1} / delta_j`.
    pub ratios: Vec<f64>,
    /// Largest ratio once the iteration settled (the measured contraction factor).
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardReport {
    pub windows: Vec<PicardWindow>,
    /// Number of times the window had to be halved.
    pub halvings: usize,
}

impl PicardReport {
    pub fn max_factor(&self) -> f64 {
        self.windows.iter().map(|w| w.factor).fold(0.0, f64::max)
    }
}

const CONTRACTION: f64 = 0.9;
const MAX_ITERATIONS: usize = 200;

/// Picard iteration `w -> solve(u' + L u = R w)` on windows of `window` steps,
/// restarted at the end of each window.
///
/// The window is halved whenever three consecutive distance ratios below 0.9
/// are not observed. The fixed point coincides with the direct scheme because
/// the source is averaged exactly like the Crank-Nicolson reaction term.
pub fn picard_solve(
    p: &ModelParams,
    parts: &OperatorParts,
    d0: &DVector<f64>,
    steps: usize,
    window: usize,
    tol: f64,
) -> Result<(Vec<DVector<f64>>, PicardReport)> {
    if steps == 0 || window == 0 {
        return Err(Error::InvalidParameter("Picard needs positive step and window counts".into()));
    }
    let times = time_grid(p.horizon(), steps);
    let dt = p.horizon() / steps as f64;
    let mut stepper = Stepper::new(parts, dt, false);
    let mass = parts.mass();
    let norm = |v: &DVector<f64>| v.dot(&(mass * v)).max(0.0).sqrt();

    let mut out = vec![d0.clone()];
    let mut report = PicardReport { windows: Vec::new(), halvings: 0 };
    let mut width = window.min(steps);
    let mut k0 = 0;
    while k0 < steps {
        let len = width.min(steps - k0);
        let start = out[k0].clone();
        let kappas: Vec<Mat3> = (0..len).map(|i| p.kappa_at(0.5 * (times[k0 + i] + times[k0 + i + 1]))).collect();
        let reactions: Vec<DMatrix<f64>> = kappas.iter().map(|k| parts.reaction(k)).collect();
        let mut prev: Vec<DVector<f64>> = vec![start.clone(); len + 1];
        let scale = norm(&start).max(1e-300);
        let mut deltas: Vec<f64> = Vec::new();
        let mut ratios: Vec<f64> = Vec::new();
        let mut accepted = None;
        for it in 1..=MAX_ITERATIONS {
            let mut next = Vec::with_capacity(len + 1);
            next.push(start.clone());
            for i in 0..len {
                let src = 0.5 * (&reactions[i] * (&prev[i] + &prev[i + 1]));
                let d = stepper.step(&kappas[i], &next[i], Some(&src))?;
                next.push(d);
            }
            let delta = next.iter().zip(&prev).map(|(a, b)| norm(&(a - b))).fold(0.0, f64::max);
            if let Some(last) = deltas.last() {
                if *last > 0.0 {
                    ratios.push(delta / last);
                }
            }
            deltas.push(delta);
            prev = next;
            if delta <= tol * scale.max(1.0) || delta == 0.0 {
                accepted = Some(it);
                break;
            }
            let settled = ratios.len() >= 3 && ratios[ratios.len() - 3..].iter().all(|r| *r < CONTRACTION);
            let failing = ratios.len() >= 3 && !settled && ratios.last().is_some_and(|r| *r >= 1.0);
            if failing || (it >= 12 && !settled) {
                break;
            }
        }
        let settled_factor = contraction_factor(&ratios, &deltas, scale);
        match accepted {
            Some(iterations) if settled_factor < CONTRACTION => {
                report.windows.push(PicardWindow {
                    start: times[k0],
                    length: len as f64 * dt,
                    iterations,
                    ratios,
                    factor: settled_factor,
                });
                out.extend(prev.into_iter().skip(1));
                k0 += len;
            }
            _ => {
                if len <= 1 {
                    return Err(Error::NonContraction { factor: settled_factor, tau: len as f64 * dt });
                }
                width = len / 2;
                report.halvings += 1;
            }
        }
    }
    Ok((out, report))
}

/// Largest ratio among iterates still well above round-off.
fn contraction_factor(ratios: &[f64], deltas: &[f64], scale: f64) -> f64 {
    // ratio i compares deltas[i+1] with deltas[i]
    let floor = 1e-13 * scale.max(1.0);
    ratios
        .iter()
        .enumerate()
        .filter(|(i, _)| deltas[i + 1] > floor)
        .map(|(_, r)| *r)
        .fold(0.0, f64::max)
}

/// Galerkin coefficients over time together with reconstruction maps.
#[derive(Debug, Clone)]
pub struct SolutionTrajectory {
    pub times: Vec<f64>,
    pub coeffs: Vec<DVector<f64>>,
    basis: Arc<BasisSet>,
    lift: Option<Arc<dyn Lift>>,
}

impl SolutionTrajectory {
    pub fn new(times: Vec<f64>, coeffs: Vec<DVector<f64>>, basis: Arc<BasisSet>, lift: Option<Arc<dyn Lift>>) -> Self {
        SolutionTrajectory { times, coeffs, basis, lift }
    }

    pub fn basis(&self) -> &Arc<BasisSet> {
        &self.basis
    }

    pub fn lift(&self) -> Option<&Arc<dyn Lift>> {
        self.lift.as_ref()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `w(t_k, m) = sum_i d_i phi_i(m)` (without the lift).
    pub fn w(&self, k: usize, m: &Point) -> f64 {
        self.basis.combine(m, &self.coeffs[k]).0
    }

    /// `f / rho = w + g` and its gradient at an interior point, for any coefficient vector.
    pub fn quotient_with(&self, t: f64, coeffs: &DVector<f64>, m: &Point) -> (f64, [f64; 2]) {
        let (mut v, mut g) = self.basis.combine(m, coeffs);
        if let Some(l) = &self.lift {
            v += l.value(t, m);
            let lg = l.gradient(t, m);
            g[0] += lg[0];
            g[1] += lg[1];
        }
        (v, g)
    }

    /// `f(t_k, m) = rho (w + g)`.
    pub fn f(&self, k: usize, m: &Point) -> f64 {
        let rho = rho_unchecked(self.basis.b(), m.norm());
        rho * self.quotient_with(self.times[k], &self.coeffs[k], m).0
    }

    /// `f` and `grad f` for an arbitrary coefficient vector at time `t`.
    pub fn f_and_gradient(&self, t: f64, coeffs: &DVector<f64>, m: &Point) -> (f64, [f64; 2]) {
        let rho = rho_unchecked(self.basis.b(), m.norm());
        let (v, g) = self.quotient_with(t, coeffs, m);
        let grad = [rho * g[0] - 2.0 * m.x[0] * v, rho * g[1] - 2.0 * m.x[1] * v];
        (rho * v, grad)
    }

    /// `||w(t_k)||^2` in the mass-matrix norm.
    pub fn mass_norm_sq(&self, k: usize) -> f64 {
        let d = &self.coeffs[k];
        d.dot(&(self.basis.gram() * d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::assemble::Weighting;
    use crate::galerkin::basis::BasisOptions;
    use crate::geometry::KappaSchedule;

    #[test]
    fn zero_operator_is_identity() {
        let m = DMatrix::<f64>::identity(3, 3);
        let a = DMatrix::<f64>::zeros(3, 3);
        let d0 = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert_eq!(cn_step(&m, &a, &d0, None, 0.1).unwrap(), d0);
        assert!(cn_step(&m, &a, &d0, None, 0.0).is_err());
    }

    #[test]
    fn scalar_decay_is_second_order() {
        let lam = 1.7;
        let err = |n: usize| {
            let m = DMatrix::from_element(1, 1, 1.0);
            let a = DMatrix::from_element(1, 1, lam);
            let mut d = DVector::from_element(1, 1.0);
            for _ in 0..n {
                d = cn_step(&m, &a, &d, None, 1.0 / n as f64).unwrap();
            }
            (d[0] - (-lam).exp()).abs()
        };
        let (e1, e2) = (err(50), err(100));
        assert!(e1 < 1e-3 && (e1 / e2 - 4.0).abs() < 0.05);
    }

    #[test]
    fn picard_reaches_direct_solution() {
        let p = ModelParams::new(2, 4.0, KappaSchedule::Shear { rate: 1.0 }, 0.2).unwrap();
        let basis = BasisSet::new(&p, 0.0, BasisOptions::new(3, 2, 16, 16)).unwrap();
        let parts = OperatorParts::new(&p, &basis, Weighting::Beta).unwrap();
        let d0 = DVector::from_fn(basis.len(), |i, _| 1.0 / (1.0 + i as f64));
        let direct = integrate(&p, &parts, &d0, 20, None).unwrap();
        let (fixed, report) = picard_solve(&p, &parts, &d0, 20, 20, 1e-12).unwrap();
        let gap = direct.iter().zip(&fixed).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(gap < 1e-10, "{gap}");
        assert!(report.max_factor() < 0.9);
    }

    #[test]
    fn zero_data_stays_zero() {
        let p = ModelParams::at_rest(4.0).unwrap();
        let basis = BasisSet::new(&p, 0.0, BasisOptions::new(3, 2, 16, 16)).unwrap();
        let parts = OperatorParts::new(&p, &basis, Weighting::Beta).unwrap();
        let d0 = DVector::zeros(basis.len());
        let (fixed, _) = picard_solve(&p, &parts, &d0, 10, 10, 1e-10).unwrap();
        assert!(fixed.iter().all(|d| d.norm() == 0.0));
    }
}
