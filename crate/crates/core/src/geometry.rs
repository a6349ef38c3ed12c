//! Ball geometry, FENE weight functions, the equilibrium density and the
//! radial probability flux.
//!
//! Everything here lives on the ball `B = B(0, sqrt(b))` in `n = 2` or `n = 3`
//! dimensions. The weight `rho = b - |m|^2` is evaluated as
//! `(sqrt(b) - |m|)(sqrt(b) + |m|)` so that boundary-layer samples keep their
//! relative accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weighted::QuadratureRule;

/// Dense 3x3 storage for velocity gradients; unused rows/columns are zero in 2-D.
pub type Mat3 = [[f64; 3]; 3];

const TRACE_TOL: f64 = 1e-12;

/// Time-dependent velocity gradient `kappa(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KappaSchedule {
    Zero,
    Constant { matrix: Vec<Vec<f64>> },
    /// `kappa_12 = rate`, all other entries zero.
    Shear { rate: f64 },
    /// `kappa_12 = rate`, `kappa_21 = -rate`.
    Corotational { rate: f64 },
    /// Piecewise-linear interpolation between `(t, matrix)` knots, clamped outside.
    Table { knots: Vec<(f64, Vec<Vec<f64>>)> },
}

impl Default for KappaSchedule {
    fn default() -> Self {
        KappaSchedule::Zero
    }
}

fn to_mat3(rows: &[Vec<f64>]) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in rows.iter().enumerate().take(3) {
        for (j, v) in row.iter().enumerate().take(3) {
            out[i][j] = *v;
        }
    }
    out
}

impl KappaSchedule {
    pub fn at(&self, t: f64) -> Mat3 {
        let mut k = [[0.0; 3]; 3];
        match self {
            KappaSchedule::Zero => {}
            KappaSchedule::Constant { matrix } => k = to_mat3(matrix),
            KappaSchedule::Shear { rate } => k[0][1] = *rate,
            KappaSchedule::Corotational { rate } => {
                k[0][1] = *rate;
                k[1][0] = -*rate;
            }
            KappaSchedule::Table { knots } => {
                if knots.is_empty() {
                    return k;
                }
                if t <= knots[0].0 {
                    return to_mat3(&knots[0].1);
                }
                let last = knots.len() - 1;
                if t >= knots[last].0 {
                    return to_mat3(&knots[last].1);
                }
                let idx = knots.partition_point(|(tk, _)| *tk <= t);
                let (t0, m0) = (&knots[idx - 1].0, to_mat3(&knots[idx - 1].1));
                let (t1, m1) = (&knots[idx].0, to_mat3(&knots[idx].1));
                let s = (t - t0) / (t1 - t0);
                for i in 0..3 {
                    for j in 0..3 {
                        k[i][j] = (1.0 - s) * m0[i][j] + s * m1[i][j];
                    }
                }
            }
        }
        k
    }

    /// Largest absolute entry over a sample of `[0, horizon]`.
    pub fn sup_norm(&self, horizon: f64) -> f64 {
        sample_times(self, horizon)
            .into_iter()
            .map(|t| {
                self.at(t)
                    .iter()
                    .flatten()
                    .fold(0.0f64, |acc, v| acc.max(v.abs()))
            })
            .fold(0.0, f64::max)
    }

    fn dimension_ok(&self, n: usize) -> bool {
        let fits = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        match self {
            KappaSchedule::Constant { matrix } => fits(matrix),
            KappaSchedule::Table { knots } => knots.iter().all(|(_, m)| fits(m)),
            _ => true,
        }
    }
}

fn sample_times(kappa: &KappaSchedule, horizon: f64) -> Vec<f64> {
    let mut ts: Vec<f64> = (0..=100).map(|i| horizon * i as f64 / 100.0).collect();
    if let KappaSchedule::Table { knots } = kappa {
        ts.extend(knots.iter().map(|(t, _)| *t));
    }
    ts
}

/// One problem instance: dimension, extension parameter, flow and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelParams", into = "RawModelParams")]
pub struct ModelParams {
    n: usize,
    b: f64,
    kappa: KappaSchedule,
    horizon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelParams {
    #[serde(default = "default_n")]
    n: usize,
    b: f64,
    #[serde(default)]
    kappa: KappaSchedule,
    #[serde(default = "default_horizon")]
    horizon: f64,
}

fn default_n() -> usize {
    2
}

fn default_horizon() -> f64 {
    1.0
}

impl TryFrom<RawModelParams> for ModelParams {
    type Error = Error;
    fn try_from(raw: RawModelParams) -> Result<Self> {
        ModelParams::new(raw.n, raw.b, raw.kappa, raw.horizon)
    }
}

impl From<ModelParams> for RawModelParams {
    fn from(p: ModelParams) -> Self {
        RawModelParams {
            n: p.n,
            b: p.b,
            kappa: p.kappa,
            horizon: p.horizon,
        }
    }
}

impl ModelParams {
    pub fn new(n: usize, b: f64, kappa: KappaSchedule, horizon: f64) -> Result<Self> {
        if !(n == 2 || n == 3) {
            return Err(Error::InvalidParameter(format!("dimension n = {n} (expected 2 or 3)")));
        }
        if !(b > 2.0) || !b.is_finite() {
            return Err(Error::ConditionB { b });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon T = {horizon} must be > 0")));
        }
        if !kappa.dimension_ok(n) {
            return Err(Error::InvalidParameter(format!("kappa matrices must be {n}x{n}")));
        }
        if let KappaSchedule::Table { knots } = &kappa {
            if knots.is_empty() || knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(Error::InvalidParameter(
                    "kappa table needs strictly increasing times".into(),
                ));
            }
        }
        for t in sample_times(&kappa, horizon) {
            let k = kappa.at(t);
            let trace = k[0][0] + k[1][1] + k[2][2];
            if trace.abs() > TRACE_TOL {
                return Err(Error::TraceNotZero { trace, t });
            }
        }
        Ok(ModelParams { n, b, kappa, horizon })
    }

    /// The standard 2-D instance at rest.
    pub fn at_rest(b: f64) -> Result<Self> {
        Self::new(2, b, KappaSchedule::Zero, 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn sqrt_b(&self) -> f64 {
        self.b.sqrt()
    }

    pub fn kappa(&self) -> &KappaSchedule {
        &self.kappa
    }

    pub fn kappa_at(&self, t: f64) -> Mat3 {
        self.kappa.at(t)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Weight exponent of the transformed problem, `2 - b/2`.
    pub fn beta(&self) -> f64 {
        2.0 - 0.5 * self.b
    }

    pub fn with_kappa(&self, kappa: KappaSchedule) -> Result<Self> {
        Self::new(self.n, self.b, kappa, self.horizon)
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.n, self.b, self.kappa.clone(), horizon)
    }
}

/// A configuration vector. In 2-D the third component is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: [f64; 3],
}

impl Point {
    pub fn new2(m1: f64, m2: f64) -> Self {
        Point { x: [m1, m2, 0.0] }
    }

    pub fn new3(m1: f64, m2: f64, m3: f64) -> Self {
        Point { x: [m1, m2, m3] }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Point::new2(r * theta.cos(), r * theta.sin())
    }

    pub fn norm_sq(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, v: &[f64; 3]) -> f64 {
        self.x[0] * v[0] + self.x[1] * v[1] + self.x[2] * v[2]
    }
}

/// `kappa m`.
pub fn apply(k: &Mat3, m: &Point) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, row) in k.iter().enumerate() {
        out[i] = row[0] * m.x[0] + row[1] * m.x[1] + row[2] * m.x[2];
    }
    out
}

fn check_inside(p: &ModelParams, m: &Point) -> Result<()> {
    let norm_sq = m.norm_sq();
    if norm_sq > p.b {
        return Err(Error::Domain { norm_sq, b: p.b });
    }
    Ok(())
}

/// `rho = b - |m|^2`, evaluated in factored form.
pub fn rho(p: &ModelParams, m: &Point) -> Result<f64> {
    check_inside(p, m)?;
    Ok(rho_unchecked(p.b, m.norm()))
}

pub(crate) fn rho_unchecked(b: f64, r: f64) -> f64 {
    let sb = b.sqrt();
    ((sb - r) * (sb + r)).max(0.0)
}

/// Euclidean distance to the sphere `|m| = sqrt(b)`.
pub fn dist(p: &ModelParams, m: &Point) -> Result<f64> {
    check_inside(p, m)?;
    Ok((p.sqrt_b() - m.norm()).max(0.0))
}

/// FENE spring potential `-(H b / 2) log(1 - |m|^2 / b)`.
pub fn fene_potential(p: &ModelParams, m: &Point, h: f64) -> Result<f64> {
    let r = rho(p, m)?;
    if r <= 0.0 {
        return Err(Error::Singularity);
    }
    Ok(-0.5 * h * p.b * (r / p.b).ln())
}

/// `c(t, m) = 2 m.kappa(t) m + n (b/2 - 1)`.
pub fn reaction_coefficient(p: &ModelParams, t: f64, m: &Point) -> Result<f64> {
    check_inside(p, m)?;
    Ok(reaction_unchecked(p, &p.kappa_at(t), m))
}

pub(crate) fn reaction_unchecked(p: &ModelParams, k: &Mat3, m: &Point) -> f64 {
    2.0 * m.dot(&apply(k, m)) + p.n as f64 * (0.5 * p.b - 1.0)
}

/// Radial flux `(b m f / (2 rho) - kappa m f + grad f / 2) . m/|m|`.
pub fn flux(p: &ModelParams, f: f64, grad_f: &[f64; 3], t: f64, m: &Point) -> Result<f64> {
    check_inside(p, m)?;
    let r = m.norm();
    if r == 0.0 {
        return Err(Error::InvalidParameter("flux has no radial direction at m = 0".into()));
    }
    let rh = rho_unchecked(p.b, r);
    if rh <= 0.0 {
        return Err(Error::Singularity);
    }
    let km = apply(&p.kappa_at(t), m);
    let mut j = 0.0;
    for i in 0..3 {
        let v = p.b * m.x[i] * f / (2.0 * rh) - km[i] * f + 0.5 * grad_f[i];
        j += v * m.x[i] / r;
    }
    Ok(j)
}

/// The equilibrium density `Z^{-1} rho^{b/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumField {
    pub b: f64,
    pub z: f64,
}

impl EquilibriumField {
    pub fn evaluate(&self, m: &Point) -> f64 {
        let r = rho_unchecked(self.b, m.norm());
        r.powf(0.5 * self.b) / self.z
    }

    pub fn gradient(&self, m: &Point) -> [f64; 3] {
        let r = rho_unchecked(self.b, m.norm());
        let s = -self.b * r.powf(0.5 * self.b - 1.0) / self.z;
        [s * m.x[0], s * m.x[1], s * m.x[2]]
    }
}

/// Normalizes `rho^{b/2}` over the ball. The rule must carry the weight `rho^{b/2}`.
pub fn equilibrium(p: &ModelParams, q: &QuadratureRule) -> Result<EquilibriumField> {
    let want = 0.5 * p.b;
    if (q.mu() - want).abs() > 1e-14 || q.n() != p.n || (q.b() - p.b).abs() > 0.0 {
        return Err(Error::ExponentMismatch { basis: q.mu(), requested: want });
    }
    let z = q.integrate(|_| 1.0)?;
    Ok(EquilibriumField { b: p.b, z })
}

/// Geometric radius ladder `r_k = sqrt(b) (1 - 2^{-k})` used for boundary limits.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusLadder {
    pub k_min: u32,
    pub k_max: u32,
    pub rel_tol: f64,
}

impl Default for RadiusLadder {
    fn default() -> Self {
        RadiusLadder { k_min: 3, k_max: 18, rel_tol: 1e-8 }
    }
}

/// Outcome of a boundary limit computed along the radius ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryLimit {
    /// Extrapolated value (infinite when the sequence diverges).
    pub value: f64,
    pub converged: bool,
    pub diverged: bool,
    /// `(r_k, d_k, v_k)` samples.
    pub samples: Vec<(f64, f64, f64)>,
}

impl RadiusLadder {
    /// Distances to the boundary along the ladder.
    pub fn distances(&self, sqrt_b: f64) -> Vec<f64> {
        (self.k_min..=self.k_max)
            .map(|k| sqrt_b * 0.5f64.powi(k as i32))
            .collect()
    }

    /// Samples `value(d)` at every rung and extrapolates to `d = 0`.
    pub fn limit<F>(&self, sqrt_b: f64, mut value: F) -> BoundaryLimit
    where
        F: FnMut(f64) -> f64,
    {
        let samples: Vec<(f64, f64, f64)> = self
            .distances(sqrt_b)
            .into_iter()
            .map(|d| (sqrt_b - d, d, value(d)))
            .collect();
        extrapolate(samples, self.rel_tol)
    }
}

fn aitken(v: &[f64], scale: f64) -> Vec<f64> {
    (2..v.len())
        .map(|k| {
            let (a, b, c) = (v[k - 2], v[k - 1], v[k]);
            let d1 = c - b;
            let d2 = (c - b) - (b - a);
            if d2.abs() <= 1e-14 * scale || d1 == 0.0 {
                c
            } else {
                c - d1 * d1 / d2
            }
        })
        .collect()
}

fn extrapolate(samples: Vec<(f64, f64, f64)>, rel_tol: f64) -> BoundaryLimit {
    let v: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if v.iter().any(|x| !x.is_finite()) {
        return BoundaryLimit { value: f64::INFINITY, converged: false, diverged: true, samples };
    }
    let len = v.len();
    // Geometric growth over the tail means the limit is infinite.
    if len >= 4 {
        let tail = &v[len - 4..];
        let growing = tail
            .windows(2)
            .all(|w| w[1].abs() > 1.05 * w[0].abs() && w[0].abs() > 0.0);
        if growing {
            return BoundaryLimit { value: f64::INFINITY, converged: false, diverged: true, samples };
        }
    }
    if scale == 0.0 {
        return BoundaryLimit { value: 0.0, converged: true, diverged: false, samples };
    }
    // Two levels of Aitken delta-squared; each level removes one power of d
    // for sequences L + d^p (a0 + a1 d + ...) sampled on a halving ladder.
    let level1 = aitken(&v, scale);
    let est = if level1.len() >= 5 { aitken(&level1, scale) } else { level1 };
    let m = est.len();
    let value = est[m - 1];
    let converged = m >= 3
        && (est[m - 1] - est[m - 2]).abs() <= rel_tol * scale
        && (est[m - 2] - est[m - 3]).abs() <= rel_tol * scale;
    BoundaryLimit { value, converged, diverged: false, samples }
}
