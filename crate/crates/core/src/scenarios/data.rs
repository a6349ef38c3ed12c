use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::{BasisOptions, Lift};
use crate::geometry::{ModelParams, Point};
use crate::weighted::FactoredField;

/// Discretization settings shared by the scenario drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resolution {
    pub k_r: usize,
    pub k_theta: usize,
    pub n_radial_quad: usize,
    pub n_angular_quad: usize,
    pub n_timesteps: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { k_r: 8, k_theta: 6, n_radial_quad: 64, n_angular_quad: 64, n_timesteps: 200 }
    }
}

impl Resolution {
    /// Doubles the basis degrees, the angular quadrature and the number of steps.
    ///
    /// The radial rule is left alone: 64 Gauss-Jacobi nodes are exact far
    /// beyond the radial degrees reached at desk scale.
    pub fn doubled(&self) -> Self {
        Resolution {
            k_r: 2 * self.k_r,
            k_theta: 2 * self.k_theta,
            n_radial_quad: self.n_radial_quad,
            n_angular_quad: 2 * self.n_angular_quad,
            n_timesteps: 2 * self.n_timesteps,
        }
    }

    /// Basis options for the W-problem. The boundary power `1 - beta` puts
    /// `w_eq = rho^{b/2 - 1}` in the span, so mass and the equilibrium are
    /// reproduced exactly for every `b`.
    pub fn w_basis(&self, p: &ModelParams) -> BasisOptions {
        BasisOptions::new(self.k_r, self.k_theta, self.n_radial_quad, self.n_angular_quad).with_power(1.0 - p.beta())
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.k_r, self.n_radial_quad, self.n_angular_quad, self.n_timesteps];
        if all.iter().any(|v| *v == 0) {
            return Err(Error::Config(format!("resolution values must be >= 1: {self:?}")));
        }
        Ok(())
    }
}

/// Initial densities. All are given as `rho^q chi` with `chi` a polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Equilibrium,
    /// `f_eq (1 + amplitude m_1 / sqrt(b))`
    Perturbed { amplitude: f64 },
    /// `f_eq ((1 + m_1 / sqrt(b)) / 2)^2`, nonnegative and tilted toward `m_1 = sqrt(b)`.
    Bump,
    /// `f_eq (1 - 2 m_1 / sqrt(b))`, negative on part of the ball.
    Signed,
    Zero,
    /// `f_eq (1 + sum c_ab (m_1/sqrt b)^a (m_2/sqrt b)^c)` with seeded coefficients, `a + c <= degree`.
    RandomLowMode { seed: u64, degree: u32, amplitude: f64 },
    /// `rho^power`, unnormalized; used to probe admissibility.
    RhoPower { power: f64 },
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Perturbed { amplitude: 0.3 }
    }
}

/// `Z` for `rho^{b/2}` in two dimensions.
pub fn equilibrium_normalization(b: f64) -> f64 {
    std::f64::consts::PI * b.powf(0.5 * b + 1.0) / (0.5 * b + 1.0)
}

impl InitialData {
    /// The density as a factored field `rho^q chi`.
    pub fn field(&self, p: &ModelParams) -> Result<FactoredField> {
        let b = p.b();
        let sb = p.sqrt_b();
        let z = 1.0 / equilibrium_normalization(b);
        let half = 0.5 * b;
        Ok(match self.clone() {
            InitialData::Equilibrium => FactoredField::rho_power(half, z),
            InitialData::Perturbed { amplitude } => FactoredField::new(
                half,
                move |m| z * (1.0 + amplitude * m.x[0] / sb),
                move |_| [z * amplitude / sb, 0.0, 0.0],
            ),
            InitialData::Bump => FactoredField::new(
                half,
                move |m| z * (0.5 * (1.0 + m.x[0] / sb)).powi(2),
                move |m| [z / sb * 0.5 * (1.0 + m.x[0] / sb), 0.0, 0.0],
            ),
            InitialData::Signed => FactoredField::new(
                half,
                move |m| z * (1.0 - 2.0 * m.x[0] / sb),
                move |_| [-2.0 * z / sb, 0.0, 0.0],
            ),
            InitialData::Zero => FactoredField::zero(),
            InitialData::RandomLowMode { seed, degree, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut terms = Vec::new();
                for total in 1..=degree as i32 {
                    for a in 0..=total {
                        terms.push((a, total - a, amplitude * rng.random_range(-1.0..1.0)));
                    }
                }
                let t2 = terms.clone();
                FactoredField::new(
                    half,
                    move |m| {
                        let (x, y) = (m.x[0] / sb, m.x[1] / sb);
                        z * (1.0 + terms.iter().map(|(a, c, k)| k * x.powi(*a) * y.powi(*c)).sum::<f64>())
                    },
                    move |m| {
                        let (x, y) = (m.x[0] / sb, m.x[1] / sb);
                        let mut g = [0.0; 3];
                        for (a, c, k) in &t2 {
                            if *a > 0 {
                                g[0] += k * *a as f64 * x.powi(a - 1) * y.powi(*c) / sb;
                            }
                            if *c > 0 {
                                g[1] += k * *c as f64 * x.powi(*a) * y.powi(c - 1) / sb;
                            }
                        }
                        g.map(|v| z * v)
                    },
                )
            }
            InitialData::RhoPower { power } => FactoredField::rho_power(power, 1.0),
        })
    }

    /// True when the density is nonnegative by construction.
    pub fn nonnegative(&self) -> bool {
        matches!(
            self,
            InitialData::Equilibrium | InitialData::Bump | InitialData::Zero | InitialData::RhoPower { .. }
        ) || matches!(self, InitialData::Perturbed { amplitude } if amplitude.abs() <= 1.0)
    }
}

/// Spatial profiles of the boundary forcing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `|m|^2`
    R2,
    /// `|m|^4`
    R4,
    /// `m_1^2 - m_2^2`
    Saddle,
}

/// Boundary forcing `g(t, m) = (a_0 + a_1 t + a_2 t^2) s(m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Forcing {
    /// `scale t |m|^2`
    TR2 { scale: f64 },
    /// `scale t^2 |m|^2`
    T2R2 { scale: f64 },
    /// `scale t |m|^4`
    TR4 { scale: f64 },
    /// `scale t (m_1^2 - m_2^2)`
    TSaddle { scale: f64 },
    Custom { time: [f64; 3], profile: Profile },
}

impl Default for Forcing {
    fn default() -> Self {
        Forcing::TR2 { scale: 1.0 }
    }
}

impl Forcing {
    fn parts(&self) -> ([f64; 3], Profile) {
        match *self {
            Forcing::TR2 { scale } => ([0.0, scale, 0.0], Profile::R2),
            Forcing::T2R2 { scale } => ([0.0, 0.0, scale], Profile::R2),
            Forcing::TR4 { scale } => ([0.0, scale, 0.0], Profile::R4),
            Forcing::TSaddle { scale } => ([0.0, scale, 0.0], Profile::Saddle),
            Forcing::Custom { time, profile } => (time, profile),
        }
    }

    /// Time factor `a_0 + a_1 t + a_2 t^2`.
    pub fn amplitude(&self, t: f64) -> f64 {
        let (a, _) = self.parts();
        a[0] + t * (a[1] + t * a[2])
    }

    pub fn profile(&self, m: &Point) -> f64 {
        let (x, y) = (m.x[0], m.x[1]);
        match self.parts().1 {
            Profile::R2 => x * x + y * y,
            Profile::R4 => (x * x + y * y).powi(2),
            Profile::Saddle => x * x - y * y,
        }
    }

    pub fn profile_gradient(&self, m: &Point) -> [f64; 2] {
        let (x, y) = (m.x[0], m.x[1]);
        match self.parts().1 {
            Profile::R2 => [2.0 * x, 2.0 * y],
            Profile::R4 => {
                let r2 = x * x + y * y;
                [4.0 * r2 * x, 4.0 * r2 * y]
            }
            Profile::Saddle => [2.0 * x, -2.0 * y],
        }
    }

    /// Rejects forcings with `g(0, .) != 0` (sampled on a polar grid of the closed ball).
    pub fn check(&self, p: &ModelParams) -> Result<()> {
        let a0 = self.amplitude(0.0);
        let mut max = 0.0f64;
        for i in 0..=8 {
            for k in 0..16 {
                let m = Point::polar(p.sqrt_b() * i as f64 / 8.0, std::f64::consts::TAU * k as f64 / 16.0);
                max = max.max((a0 * self.profile(&m)).abs());
            }
        }
        if max > 0.0 {
            return Err(Error::ForcingAtZero { max });
        }
        Ok(())
    }
}

impl Lift for Forcing {
    fn value(&self, t: f64, m: &Point) -> f64 {
        self.amplitude(t) * self.profile(m)
    }

    fn gradient(&self, t: f64, m: &Point) -> [f64; 2] {
        let a = self.amplitude(t);
        self.profile_gradient(m).map(|v| a * v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn normalization_at_b4() {
        assert_relative_eq!(equilibrium_normalization(4.0), 64.0 * PI / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn random_data_is_reproducible() {
        let p = ModelParams::at_rest(4.0).unwrap();
        let d = InitialData::RandomLowMode { seed: 7, degree: 3, amplitude: 0.2 };
        let (f1, f2) = (d.field(&p).unwrap(), d.field(&p).unwrap());
        let m = Point::new2(0.3, 0.8);
        assert_eq!(f1.psi(&m), f2.psi(&m));
        let other = InitialData::RandomLowMode { seed: 8, degree: 3, amplitude: 0.2 }.field(&p).unwrap();
        assert_ne!(f1.psi(&m), other.psi(&m));
    }

    #[test]
    fn forcing_library_vanishes_initially() {
        let p = ModelParams::at_rest(4.0).unwrap();
        for g in [
            Forcing::TR2 { scale: 1.0 },
            Forcing::T2R2 { scale: 1.0 },
            Forcing::TR4 { scale: 2.0 },
            Forcing::TSaddle { scale: 1.0 },
        ] {
            assert!(g.check(&p).is_ok());
            assert!(g.value(1.0, &Point::new2(2.0, 0.0)).abs() > 0.0);
        }
        let bad = Forcing::Custom { time: [1.0, 0.0, 0.0], profile: Profile::R2 };
        assert!(matches!(bad.check(&p), Err(Error::ForcingAtZero { .. })));
    }
}
