//! Reference integrators that share no code with the solver's Gauss-Jacobi rules.
#![allow(dead_code)]

use std::f64::consts::PI;

const XK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XK[i]) + f(c + h * XK[i]);
        k += WK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7, 15) on `[a, b]` to relative tolerance `rel`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, e) = kronrod(f, a, b);
        if e <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    let (est, _) = kronrod(f, a, b);
    rec(f, a, b, (rel * est.abs()).max(f64::MIN_POSITIVE), 24)
}

/// `int_B g(|m|^2) rho^mu dm` in 2-D via `u = |m|^2` and `v = (b - u)^{mu+1}`,
/// which removes the endpoint singularity.
pub fn radial_weighted<G: Fn(f64) -> f64>(g: G, b: f64, mu: f64, tol: f64) -> f64 {
    let e = mu + 1.0;
    let top = b.powf(e);
    PI / e * adaptive(&|v: f64| g(b - v.powf(1.0 / e)), 0.0, top, tol)
}

/// `int_B h(r, theta) rho^mu dm` in 2-D by nested adaptive rules.
pub fn polar_weighted<H: Fn(f64, f64) -> f64>(h: H, b: f64, mu: f64, tol: f64) -> f64 {
    let e = mu + 1.0;
    let top = b.powf(e);
    // dm = r dr dtheta = du dtheta / 2 and (b - u)^mu du = dv / e
    0.5 / e
        * adaptive(
            &|v: f64| {
                let u = (b - v.powf(1.0 / e)).max(0.0);
                let r = u.sqrt();
                adaptive(&|t: f64| h(r, t), 0.0, 2.0 * PI, tol)
            },
            0.0,
            top,
            tol,
        )
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
