//! Infinite-lattice two-point resistance kernel.
//!
//! All values here are dimensionless, in units of the vertical unit
//! resistance `r_v`. The exact kernel of a lattice with horizontal resistors
//! `r_h = alpha * r_v` is
//!
//! ```text
//! Omega(dx, dy) = (alpha/pi) * int_0^pi [1 - exp(-|dx| lambda) cos(dy t)] / sinh(lambda) dt
//! cosh(lambda)  = 1 + alpha - alpha cos(t)
//! ```
//!
//! and its far-field asymptote is
//! `sqrt(alpha)/(2 pi) * [ln(alpha dx^2 + dy^2) + 2 gamma + ln 16 - ln(alpha + 1)]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureConfig};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082;

/// Resistance anisotropy `alpha = r_h / r_v`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Anisotropy(f64);

impl Anisotropy {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::Domain(format!("anisotropy must be positive and finite, got {alpha}")))
        }
    }

    /// Unity anisotropy (square lattice).
    pub const fn isotropic() -> Self {
        Self(1.0)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// The inverse ratio `k = r_v / r_h`.
    #[inline]
    pub fn k(self) -> f64 {
        1.0 / self.0
    }

    #[inline]
    pub fn sqrt(self) -> f64 {
        self.0.sqrt()
    }

    /// Anisotropy of the transposed lattice.
    pub fn inverse(self) -> Self {
        Self(1.0 / self.0)
    }
}

impl TryFrom<f64> for Anisotropy {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Anisotropy> for f64 {
    fn from(a: Anisotropy) -> f64 {
        a.0
    }
}

/// Integer lattice displacement; `dx` is horizontal, `dy` vertical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Displacement {
    pub dx: i64,
    pub dy: i64,
}

impl Displacement {
    pub const ZERO: Self = Self { dx: 0, dy: 0 };

    pub const fn new(dx: i64, dy: i64) -> Self {
        Self { dx, dy }
    }

    /// Folds the displacement into the first quadrant.
    pub fn canonical(self) -> Self {
        Self::new(self.dx.abs(), self.dy.abs())
    }

    pub fn is_zero(self) -> bool {
        self.dx == 0 && self.dy == 0
    }

    /// `alpha dx^2 + dy^2`, the squared distance in the isotropic metric.
    pub fn metric(self, alpha: Anisotropy) -> f64 {
        let (x, y) = (self.dx as f64, self.dy as f64);
        alpha.value() * x * x + y * y
    }
}

fn check_angle(theta: f64) -> Result<()> {
    if (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Domain(format!("angle {theta} outside [0, pi]")))
    }
}

/// `sinh(lambda)` in the cancellation-free form `2 sqrt(a) sin(t/2) sqrt(1 + a sin^2(t/2))`.
pub fn sinh_lambda(theta: f64, alpha: Anisotropy) -> Result<f64> {
    check_angle(theta)?;
    Ok(sinh_lambda_unchecked(theta, alpha.value()))
}

#[inline]
fn sinh_lambda_unchecked(theta: f64, alpha: f64) -> f64 {
    let s = (0.5 * theta).sin();
    2.0 * alpha.sqrt() * s * (1.0 + alpha * s * s).sqrt()
}

/// Decay exponent `lambda(theta)` with `cosh(lambda) = 1 + alpha - alpha cos(theta)`.
pub fn dispersion_lambda(theta: f64, alpha: Anisotropy) -> Result<f64> {
    check_angle(theta)?;
    // asinh of the factored sinh avoids the acosh(1 + tiny) cancellation near 0.
    Ok(sinh_lambda_unchecked(theta, alpha.value()).asinh())
}

/// Integrand of the exact kernel at `t`, without the `alpha/pi` prefactor.
fn kernel_integrand(t: f64, dx: f64, dy: f64, alpha: f64) -> f64 {
    if t <= 0.0 {
        // lim_{t->0} [1 - e^{-dx lambda} cos(dy t)] / sinh(lambda) = dx
        return dx;
    }
    let sh = sinh_lambda_unchecked(t, alpha);
    let lambda = sh.asinh();
    let decay = -dx * lambda;
    // 1 - e^{-a} cos b = (1 - e^{-a}) + e^{-a} * 2 sin^2(b/2)
    let half = (0.5 * dy * t).sin();
    let numer = -decay.exp_m1() + decay.exp() * 2.0 * half * half;
    numer / sh
}

/// Exact kernel value by adaptive quadrature.
pub fn omega_exact(d: Displacement, alpha: Anisotropy, cfg: &QuadratureConfig) -> Result<f64> {
    let d = d.canonical();
    if d.is_zero() {
        return Ok(0.0);
    }
    let (dx, dy, a) = (d.dx as f64, d.dy as f64, alpha.value());
    let panels = d.dy.max(1) as usize;
    let q = integrate(|t| kernel_integrand(t, dx, dy, a), 0.0, PI, panels, cfg)?;
    Ok(a / PI * q.value)
}

/// Closed form of the singular part of the kernel decomposition,
/// `sqrt(alpha)/(4 pi) * ln(16 / (pi^2 (alpha + 1)))`.
pub fn r2_closed(alpha: Anisotropy) -> f64 {
    let a = alpha.value();
    a.sqrt() / (4.0 * PI) * (16.0 / (PI * PI * (a + 1.0))).ln()
}

/// Quadrature of `sqrt(alpha)/(2 pi) * int_0^{pi/2} [1/(sin u sqrt(1 + alpha sin^2 u)) - 1/u] du`.
pub fn r2_quadrature(alpha: Anisotropy, cfg: &QuadratureConfig) -> Result<f64> {
    let a = alpha.value();
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        if u < 1e-4 {
            // 1/sin u = 1/u + u/6 + ..., (1 + a sin^2 u)^{-1/2} = 1 - a u^2/2 + ...
            return u * (1.0 / 6.0 - 0.5 * a);
        }
        let s = u.sin();
        1.0 / (s * (1.0 + a * s * s).sqrt()) - 1.0 / u
    };
    let q = integrate(integrand, 0.0, 0.5 * PI, 4, cfg)?;
    Ok(a.sqrt() / (2.0 * PI) * q.value)
}

/// Quadrature of the logarithmic part
/// `sqrt(alpha)/(2 pi) * int_0^pi [1 - exp(-|dx| sqrt(alpha) t) cos(dy t)] / t dt`.
pub fn r1_quadrature(d: Displacement, alpha: Anisotropy, cfg: &QuadratureConfig) -> Result<f64> {
    let d = d.canonical();
    if d.is_zero() {
        return Ok(0.0);
    }
    let rate = d.dx as f64 * alpha.sqrt();
    let dy = d.dy as f64;
    let integrand = |t: f64| {
        if t <= 0.0 {
            return rate;
        }
        let half = (0.5 * dy * t).sin();
        (-(-rate * t).exp_m1() + (-rate * t).exp() * 2.0 * half * half) / t
    };
    let q = integrate(integrand, 0.0, PI, d.dy.max(1) as usize, cfg)?;
    Ok(alpha.sqrt() / (2.0 * PI) * q.value)
}

/// Far-field logarithmic kernel with an explicit Euler constant.
pub fn omega_asymptotic(d: Displacement, alpha: Anisotropy, euler_gamma: f64) -> f64 {
    if d.is_zero() {
        return 0.0;
    }
    let a = alpha.value();
    a.sqrt() / (2.0 * PI) * (d.metric(alpha).ln() + 2.0 * euler_gamma + 16f64.ln() - (a + 1.0).ln())
}

/// Far-field logarithmic kernel; defined as 0 at the origin.
pub fn omega_analytic_infinite(d: Displacement, alpha: Anisotropy) -> f64 {
    omega_asymptotic(d, alpha, EULER_GAMMA)
}
