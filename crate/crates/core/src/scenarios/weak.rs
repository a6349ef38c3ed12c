use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::galerkin::SolutionTrajectory;
use crate::geometry::{apply, ModelParams, Point};
use crate::weighted::QuadratureRule;

/// `(R^2 - |m|^2)^k (m_1 / sqrt b)^a (m_2 / sqrt b)^c`, extended by zero outside `B_R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunction {
    pub k: u32,
    pub a: u32,
    pub c: u32,
}

impl TestFunction {
    pub fn value_and_gradient(&self, m: &Point, radius: f64, sqrt_b: f64) -> (f64, [f64; 2]) {
        let (x, y) = (m.x[0] / sqrt_b, m.x[1] / sqrt_b);
        let bump = radius * radius - m.norm_sq();
        if bump <= 0.0 {
            return (0.0, [0.0; 2]);
        }
        let k = self.k as i32;
        let (a, c) = (self.a as i32, self.c as i32);
        let q = x.powi(a) * y.powi(c);
        let qx = if a > 0 { a as f64 * x.powi(a - 1) * y.powi(c) / sqrt_b } else { 0.0 };
        let qy = if c > 0 { c as f64 * x.powi(a) * y.powi(c - 1) / sqrt_b } else { 0.0 };
        let bk = bump.powi(k);
        let dbk = -2.0 * self.k as f64 * bump.powi(k - 1);
        (bk * q, [dbk * m.x[0] * q + bk * qx, dbk * m.x[1] * q + bk * qy])
    }
}

/// Compactly supported test functions on the sub-ball `B_R`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSet {
    pub radius: f64,
    pub functions: Vec<TestFunction>,
    pub n_radial: usize,
    pub n_angular: usize,
}

impl TestSet {
    /// Bumps of order 4 on `B_{0.9 sqrt b}` times all monomials of degree <= 3.
    pub fn standard(p: &ModelParams) -> Self {
        let mut functions = Vec::new();
        for total in 0..=3u32 {
            for a in 0..=total {
                functions.push(TestFunction { k: 4, a, c: total - a });
            }
        }
        TestSet { radius: 0.9 * p.sqrt_b(), functions, n_radial: 24, n_angular: 48 }
    }
}

/// Discrete weak-form defect of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakResidual {
    /// `max |r|` divided by the largest `sum |terms|` over all test functions and steps.
    pub relative: f64,
    /// `max |r|` over test functions and steps.
    pub absolute: f64,
    /// Time (step midpoint) at which the defect is largest.
    pub worst_time: f64,
}

/// Evaluates
/// `int [d_t f phi - f kappa m . grad phi + b f m . grad phi / (2 rho) + grad f . grad phi / 2] dm`
/// at every step midpoint with `d_t f = (f_{k+1} - f_k) / dt`, matching the
/// Crank-Nicolson scheme.
pub fn weak_residual(p: &ModelParams, traj: &SolutionTrajectory, tests: &TestSet) -> Result<WeakResidual> {
    if traj.len() < 2 {
        return Err(Error::InvalidParameter("weak residual needs at least one step".into()));
    }
    let basis = traj.basis();
    let b = p.b();
    let sb = p.sqrt_b();
    let rule = QuadratureRule::sub_ball(2, b, tests.radius, tests.n_radial, tests.n_angular)?;
    let nodes = rule.nodes();
    let nq = nodes.len();
    let len = basis.len();
    let mut phi = DMatrix::zeros(nq, len);
    let mut gx = DMatrix::zeros(nq, len);
    let mut gy = DMatrix::zeros(nq, len);
    for (q, node) in nodes.iter().enumerate() {
        let (v, g) = basis.evaluate(&node.point);
        for i in 0..len {
            phi[(q, i)] = v[i];
            gx[(q, i)] = g[i][0];
            gy[(q, i)] = g[i][1];
        }
    }
    let tv: Vec<Vec<(f64, [f64; 2])>> = tests
        .functions
        .iter()
        .map(|t| nodes.iter().map(|n| t.value_and_gradient(&n.point, tests.radius, sb)).collect())
        .collect();

    let nt = tests.functions.len();
    let mut max_res = vec![0.0f64; nt];
    let mut max_scale = vec![0.0f64; nt];
    let mut worst = vec![0.0f64; nt];
    let lift = traj.lift();
    let quotient = |t: f64, d: &DVector<f64>| -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let mut v = &phi * d;
        let mut vx = &gx * d;
        let mut vy = &gy * d;
        if let Some(l) = lift {
            for (q, node) in nodes.iter().enumerate() {
                v[q] += l.value(t, &node.point);
                let g = l.gradient(t, &node.point);
                vx[q] += g[0];
                vy[q] += g[1];
            }
        }
        (v, vx, vy)
    };
    let mut prev = quotient(traj.times[0], &traj.coeffs[0]);
    for k in 0..traj.len() - 1 {
        let (t0, t1) = (traj.times[k], traj.times[k + 1]);
        let dt = t1 - t0;
        let next = quotient(t1, &traj.coeffs[k + 1]);
        let kappa = p.kappa_at(0.5 * (t0 + t1));
        for (i, test) in tv.iter().enumerate() {
            let mut terms = [0.0f64; 4];
            for (q, node) in nodes.iter().enumerate() {
                let (tf, tg) = test[q];
                if tf == 0.0 && tg == [0.0, 0.0] {
                    continue;
                }
                let m = &node.point;
                let rho = b - m.norm_sq();
                let v = 0.5 * (prev.0[q] + next.0[q]);
                let vx = 0.5 * (prev.1[q] + next.1[q]);
                let vy = 0.5 * (prev.2[q] + next.2[q]);
                let f = rho * v;
                let fx = rho * vx - 2.0 * m.x[0] * v;
                let fy = rho * vy - 2.0 * m.x[1] * v;
                let ft = rho * (next.0[q] - prev.0[q]) / dt;
                let km = apply(&kappa, m);
                let mg = m.x[0] * tg[0] + m.x[1] * tg[1];
                let w = node.weight;
                terms[0] += w * ft * tf;
                terms[1] -= w * f * (km[0] * tg[0] + km[1] * tg[1]);
                terms[2] += w * 0.5 * b * v * mg;
                terms[3] += w * 0.5 * (fx * tg[0] + fy * tg[1]);
            }
            let r = terms.iter().sum::<f64>().abs();
            let scale: f64 = terms.iter().map(|x| x.abs()).sum();
            if r > max_res[i] {
                max_res[i] = r;
                worst[i] = 0.5 * (t0 + t1);
            }
            max_scale[i] = max_scale[i].max(scale);
        }
        prev = next;
    }
    // a common scale: tests orthogonal to the solution by symmetry have no scale of their own
    let scale = max_scale.iter().copied().fold(0.0, f64::max);
    let mut out = WeakResidual { relative: 0.0, absolute: 0.0, worst_time: 0.0 };
    for i in 0..nt {
        if max_res[i] > out.absolute {
            out.absolute = max_res[i];
            out.worst_time = worst[i];
        }
    }
    if scale > 0.0 {
        out.relative = out.absolute / scale;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_function_gradient() {
        let t = TestFunction { k: 4, a: 2, c: 1 };
        let m = Point::new2(0.4, -0.6);
        let (_, g) = t.value_and_gradient(&m, 1.8, 2.0);
        let h = 1e-6;
        for c in 0..2 {
            let mut mp = m;
            mp.x[c] += h;
            let mut mm = m;
            mm.x[c] -= h;
            let fd = (t.value_and_gradient(&mp, 1.8, 2.0).0 - t.value_and_gradient(&mm, 1.8, 2.0).0) / (2.0 * h);
            assert!((fd - g[c]).abs() < 1e-7);
        }
        assert_eq!(t.value_and_gradient(&Point::new2(1.9, 0.0), 1.8, 2.0).0, 0.0);
    }
}
