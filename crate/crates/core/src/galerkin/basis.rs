use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{rho_unchecked, ModelParams, Point};
use crate::weighted::{jacobi_values, FactoredField, QuadratureRule};

/// Grading exponent of the radial rules used when logarithmic modes are present.
const GRADING: u32 = 4;

/// Largest Gram condition number accepted before the basis is declared degenerate.
const MAX_CONDITION: f64 = 1e13;

/// Resolution of a Galerkin basis and of the quadrature it is tabulated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisOptions {
    pub k_r: usize,
    pub k_theta: usize,
    /// Number of radial degrees carrying the extra factor `log(rho / b)`.
    pub log_modes: usize,
    pub n_radial: usize,
    pub n_angular: usize,
    /// Boundary power `s`; `None` picks [`boundary_power`].
    pub power: Option<f64>,
}

impl BasisOptions {
    pub fn new(k_r: usize, k_theta: usize, n_radial: usize, n_angular: usize) -> Self {
        BasisOptions { k_r, k_theta, log_modes: 0, n_radial, n_angular, power: None }
    }

    pub fn with_log_modes(self, log_modes: usize) -> Self {
        BasisOptions { log_modes, ..self }
    }

    pub fn with_power(self, power: f64) -> Self {
        BasisOptions { power: Some(power), ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Family {
    Polynomial,
    Logarithmic,
}

/// `phi = N rho^s L(rho) P_k^{(2s+mu, j)}(2|m|^2/b - 1) Re/Im (m_1 + i m_2)^j`
/// with `L = 1` or `L = log(rho / b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisFunction {
    pub k: usize,
    pub j: usize,
    pub sine: bool,
    pub family: Family,
    pub scale: f64,
}

/// Reduced values `phi / rho^s` and reduced gradients `rho^{1-s} grad phi`
/// of every basis function at the nodes of one rule (rows = nodes).
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub rule: Arc<QuadratureRule>,
    pub psi: DMatrix<f64>,
    pub grad: [DMatrix<f64>; 2],
}

impl Tabulation {
    pub fn weights(&self) -> DVector<f64> {
        DVector::from_iterator(self.rule.nodes().len(), self.rule.nodes().iter().map(|n| n.weight))
    }

    /// `A^T diag(w) B` for node-major tables.
    pub fn weighted_product(&self, a: &DMatrix<f64>, w: &DVector<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut wa = a.clone();
        for (mut row, wq) in wa.row_iter_mut().zip(w.iter()) {
            row *= *wq;
        }
        wa.tr_mul(b)
    }
}

/// Galerkin basis of `H^1_mu` functions with zero trace, tabulated on the
/// three rules `rho^{2s+mu}`, `rho^{2s-1+mu}` and `rho^{2s-2+mu}` that the
/// mass, first-order and stiffness forms need.
#[derive(Debug, Clone)]
pub struct BasisSet {
    n: usize,
    b: f64,
    exponent: f64,
    power: f64,
    options: BasisOptions,
    functions: Vec<BasisFunction>,
    tables: [Tabulation; 3],
    gram: DMatrix<f64>,
    condition: f64,
}

/// Smallest integer `s >= 1` with `2s - 2 + mu > -1`, so that gradients stay in `L^2_mu`.
pub fn boundary_power(mu: f64) -> u32 {
    let mut s = 1u32;
    while !(2.0 * s as f64 - 2.0 + mu > -1.0) {
        s += 1;
    }
    s
}

struct Harmonics {
    re: Vec<f64>,
    im: Vec<f64>,
}

fn harmonics(m: &Point, k_theta: usize) -> Harmonics {
    let mut re = Vec::with_capacity(k_theta + 1);
    let mut im = Vec::with_capacity(k_theta + 1);
    let (x, y) = (m.x[0], m.x[1]);
    let (mut a, mut c) = (1.0, 0.0);
    for _ in 0..=k_theta {
        re.push(a);
        im.push(c);
        let na = a * x - c * y;
        c = a * y + c * x;
        a = na;
    }
    Harmonics { re, im }
}

impl BasisSet {
    pub fn new(p: &ModelParams, exponent: f64, options: BasisOptions) -> Result<Self> {
        if p.n() != 2 {
            return Err(Error::Unsupported("the Galerkin basis is implemented for n = 2 only".into()));
        }
        if !(exponent < 1.0) || !exponent.is_finite() {
            return Err(Error::InvalidParameter(format!("basis exponent {exponent} must be finite and < 1")));
        }
        let o = options;
        if o.k_r == 0 || o.n_radial == 0 || o.n_angular == 0 || o.log_modes > o.k_r {
            return Err(Error::InvalidParameter(format!("basis resolution {o:?}")));
        }
        let b = p.b();
        let power = match o.power {
            None => boundary_power(exponent) as f64,
            Some(s) if s > 0.0 && 2.0 * s - 2.0 + exponent > -1.0 => s,
            Some(s) => {
                return Err(Error::InvalidParameter(format!("boundary power {s} with exponent {exponent}")));
            }
        };
        let mut functions = Vec::new();
        for (family, count) in [(Family::Polynomial, o.k_r), (Family::Logarithmic, o.log_modes)] {
            for k in 0..count {
                for j in 0..=o.k_theta {
                    functions.push(BasisFunction { k, j, sine: false, family, scale: 1.0 });
                    if j > 0 {
                        functions.push(BasisFunction { k, j, sine: true, family, scale: 1.0 });
                    }
                }
            }
        }
        let mut set = BasisSet {
            n: 2,
            b,
            exponent,
            power,
            options,
            functions,
            tables: [empty_table(), empty_table(), empty_table()],
            gram: DMatrix::zeros(0, 0),
            condition: 0.0,
        };
        let s = power;
        let exps = [2.0 * s + exponent, 2.0 * s - 1.0 + exponent, 2.0 * s - 2.0 + exponent];
        for (slot, mu) in exps.iter().enumerate() {
            let rule = set.rule(*mu)?;
            set.tables[slot] = set.tabulate(rule);
        }
        // unit L^2_mu norms
        let w0 = set.tables[0].weights();
        let raw_gram = set.tables[0].weighted_product(&set.tables[0].psi, &w0, &set.tables[0].psi);
        let scales: Vec<f64> = (0..set.len()).map(|i| 1.0 / raw_gram[(i, i)].sqrt()).collect();
        if scales.iter().any(|v| !v.is_finite()) {
            return Err(Error::Basis { condition: f64::INFINITY });
        }
        for (f, sc) in set.functions.iter_mut().zip(&scales) {
            f.scale = *sc;
        }
        for t in set.tables.iter_mut() {
            for (i, sc) in scales.iter().enumerate() {
                t.psi.column_mut(i).scale_mut(*sc);
                t.grad[0].column_mut(i).scale_mut(*sc);
                t.grad[1].column_mut(i).scale_mut(*sc);
            }
        }
        let gram = DMatrix::from_fn(set.len(), set.len(), |i, j| raw_gram[(i, j)] * scales[i] * scales[j]);
        let gram = 0.5 * (&gram + gram.transpose());
        let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition < MAX_CONDITION) {
            return Err(Error::Basis { condition });
        }
        set.gram = gram;
        set.condition = condition;
        Ok(set)
    }

    fn rule(&self, mu: f64) -> Result<Arc<QuadratureRule>> {
        let o = &self.options;
        let rule = if o.log_modes > 0 {
            QuadratureRule::graded(self.n, self.b, mu, 2 * o.n_radial, o.n_angular, GRADING)?
        } else {
            QuadratureRule::new(self.n, self.b, mu, o.n_radial, o.n_angular)?
        };
        Ok(Arc::new(rule))
    }

    /// Tabulates reduced values and gradients on the nodes of `rule`.
    pub fn tabulate(&self, rule: Arc<QuadratureRule>) -> Tabulation {
        let nq = rule.nodes().len();
        let len = self.len();
        let mut psi = DMatrix::zeros(nq, len);
        let mut g0 = DMatrix::zeros(nq, len);
        let mut g1 = DMatrix::zeros(nq, len);
        for (q, node) in rule.nodes().iter().enumerate() {
            let (v, g) = self.reduced(&node.point, node.rho);
            for i in 0..len {
                psi[(q, i)] = v[i];
                g0[(q, i)] = g[i][0];
                g1[(q, i)] = g[i][1];
            }
        }
        Tabulation { rule, psi, grad: [g0, g1] }
    }

    /// `(phi_i / rho^s, rho^{1-s} grad phi_i)` for every basis function.
    pub fn reduced(&self, m: &Point, rho: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
        let o = &self.options;
        let s = self.power;
        let a = 2.0 * s + self.exponent;
        let x = 2.0 * m.norm_sq() / self.b - 1.0;
        let h = harmonics(m, o.k_theta);
        let polys: Vec<(Vec<f64>, Vec<f64>)> =
            (0..=o.k_theta).map(|j| jacobi_values(o.k_r, a, j as f64, x)).collect();
        let log = if rho > 0.0 { (rho / self.b).ln() } else { 0.0 };
        let mut vals = Vec::with_capacity(self.len());
        let mut grads = Vec::with_capacity(self.len());
        for f in &self.functions {
            let (p, dp) = (polys[f.j].0[f.k], polys[f.j].1[f.k]);
            let jf = f.j as f64;
            let (hv, hg) = if f.j == 0 {
                (1.0, [0.0, 0.0])
            } else if f.sine {
                (h.im[f.j], [jf * h.im[f.j - 1], jf * h.re[f.j - 1]])
            } else {
                (h.re[f.j], [jf * h.re[f.j - 1], -jf * h.im[f.j - 1]])
            };
            // L and rho L'
            let (l, rl) = match f.family {
                Family::Polynomial => (1.0, 0.0),
                Family::Logarithmic => (log, 1.0),
            };
            let radial = -2.0 * hv * p * (s * l + rl);
            let mut g = [0.0; 2];
            for c in 0..2 {
                g[c] = f.scale
                    * (radial * m.x[c] + rho * l * (4.0 * dp / self.b * m.x[c] * hv + p * hg[c]));
            }
            vals.push(f.scale * l * p * hv);
            grads.push(g);
        }
        (vals, grads)
    }

    /// Values and gradients of every `phi_i` at an interior point.
    pub fn evaluate(&self, m: &Point) -> (Vec<f64>, Vec<[f64; 2]>) {
        let rho = rho_unchecked(self.b, m.norm());
        let (mut v, mut g) = self.reduced(m, rho);
        let rs = rho.powf(self.power);
        let rg = rho.powf(self.power - 1.0);
        for (vi, gi) in v.iter_mut().zip(g.iter_mut()) {
            *vi *= rs;
            gi[0] *= rg;
            gi[1] *= rg;
        }
        (v, g)
    }

    /// `w(m) = sum_i d_i phi_i(m)` and its gradient.
    pub fn combine(&self, m: &Point, coeffs: &DVector<f64>) -> (f64, [f64; 2]) {
        let (v, g) = self.evaluate(m);
        let mut w = 0.0;
        let mut grad = [0.0; 2];
        for i in 0..self.len() {
            w += coeffs[i] * v[i];
            grad[0] += coeffs[i] * g[i][0];
            grad[1] += coeffs[i] * g[i][1];
        }
        (w, grad)
    }

    /// Basis member `i` as a factored field `rho^s psi` (polynomial family only).
    pub fn factored(&self, i: usize) -> Result<FactoredField> {
        let f = self.functions[i];
        if f.family != Family::Polynomial {
            return Err(Error::Unsupported("logarithmic modes have no smooth factorization".into()));
        }
        let solo = BasisSet {
            functions: vec![f],
            tables: [empty_table(), empty_table(), empty_table()],
            gram: DMatrix::zeros(0, 0),
            options: BasisOptions { log_modes: 0, ..self.options },
            ..self.clone_header()
        };
        let solo = Arc::new(solo);
        let s2 = solo.clone();
        let b = self.b;
        let s = self.power;
        Ok(FactoredField::new(
            s,
            move |m| solo.reduced(m, rho_unchecked(b, m.norm())).0[0],
            move |m| {
                // grad psi = (G + 2 s m psi) / rho for G = rho^{1-s} grad phi = rho grad psi - 2 s m psi
                let rho = rho_unchecked(b, m.norm());
                let (v, g) = s2.reduced(m, rho);
                if rho <= 0.0 {
                    return [f64::NAN; 3];
                }
                [(g[0][0] + 2.0 * s * m.x[0] * v[0]) / rho, (g[0][1] + 2.0 * s * m.x[1] * v[0]) / rho, 0.0]
            },
        ))
    }

    fn clone_header(&self) -> BasisSet {
        BasisSet {
            n: self.n,
            b: self.b,
            exponent: self.exponent,
            power: self.power,
            options: self.options,
            functions: Vec::new(),
            tables: [empty_table(), empty_table(), empty_table()],
            gram: DMatrix::zeros(0, 0),
            condition: self.condition,
        }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Boundary power `s` in `phi = rho^s psi`.
    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn options(&self) -> &BasisOptions {
        &self.options
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.functions
    }

    /// Tables on the rules `rho^{2s+mu}`, `rho^{2s-1+mu}`, `rho^{2s-2+mu}`.
    pub fn tables(&self) -> &[Tabulation; 3] {
        &self.tables
    }

    /// `L^2_mu` Gram matrix.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// A rule for `rho^mu` with the same radial treatment as the basis tables.
    pub fn companion_rule(&self, mu: f64) -> Result<Arc<QuadratureRule>> {
        self.rule(mu)
    }
}

fn empty_table() -> Tabulation {
    Tabulation {
        rule: Arc::new(QuadratureRule::new(2, 4.0, 0.0, 1, 1).expect("trivial rule")),
        psi: DMatrix::zeros(0, 0),
        grad: [DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params(b: f64) -> ModelParams {
        ModelParams::at_rest(b).unwrap()
    }

    #[test]
    fn counts_and_powers() {
        let p = params(4.0);
        let basis = BasisSet::new(&p, p.beta(), BasisOptions::new(3, 2, 16, 16)).unwrap();
        assert_eq!(basis.len(), 3 * 5);
        assert_eq!(basis.power(), 1.0);
        assert_eq!(boundary_power(2.0 - 3.0), 2);
        assert_eq!(boundary_power(-0.95), 1);
        assert!(BasisSet::new(&p, 1.0, BasisOptions::new(3, 2, 16, 16)).is_err());
    }

    #[test]
    fn single_function_is_normalized_rho() {
        let p = params(4.0);
        let basis = BasisSet::new(&p, 0.0, BasisOptions::new(1, 0, 8, 8)).unwrap();
        assert_eq!(basis.len(), 1);
        // int rho^2 over the disk = pi b^3 / 3
        let scale = basis.functions()[0].scale;
        assert_relative_eq!(scale, 1.0 / (PI * 64.0 / 3.0).sqrt(), max_relative = 1e-13);
        let m = Point::new2(0.3, -0.4);
        let (v, _) = basis.evaluate(&m);
        assert_relative_eq!(v[0], scale * (4.0 - 0.25), max_relative = 1e-14);
    }

    #[test]
    fn gram_is_identity_for_polynomial_family() {
        let p = params(3.0);
        let basis = BasisSet::new(&p, p.beta(), BasisOptions::new(5, 4, 32, 32)).unwrap();
        let id = DMatrix::<f64>::identity(basis.len(), basis.len());
        assert!((basis.gram() - id).abs().max() < 1e-12);
        assert!(basis.condition_number() < 1.0 + 1e-10);
    }

    #[test]
    fn gradients_match_differences() {
        let p = params(4.0);
        let basis = BasisSet::new(&p, 0.75, BasisOptions::new(3, 3, 16, 16).with_log_modes(2)).unwrap();
        let m = Point::new2(0.7, 0.9);
        let (_, g) = basis.evaluate(&m);
        let h = 1e-6;
        for c in 0..2 {
            let mut mp = m;
            mp.x[c] += h;
            let mut mm = m;
            mm.x[c] -= h;
            let (vp, _) = basis.evaluate(&mp);
            let (vm, _) = basis.evaluate(&mm);
            for i in 0..basis.len() {
                let fd = (vp[i] - vm[i]) / (2.0 * h);
                assert!((g[i][c] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{i} {c}");
            }
        }
    }

    #[test]
    fn factored_view_agrees() {
        let p = params(4.0);
        let basis = BasisSet::new(&p, 0.0, BasisOptions::new(3, 2, 16, 16)).unwrap();
        let m = Point::new2(-0.5, 1.1);
        let rho = 4.0 - m.norm_sq();
        let (v, g) = basis.evaluate(&m);
        for i in 0..basis.len() {
            let f = basis.factored(i).unwrap();
            assert_relative_eq!(f.value(&m, rho), v[i], max_relative = 1e-12);
            let fg = f.gradient(&m, rho);
            assert!((fg[0] - g[i][0]).abs() < 1e-12 && (fg[1] - g[i][1]).abs() < 1e-12);
        }
    }
}
