//! Jacobi theta functions in the nome convention
//! `theta1(z, q) = 2 sum_{n>=0} (-1)^n q^{(n+1/2)^2} sin((2n+1) z)`.
//!
//! Series evaluations stop on an a-priori bound of the next term, so an
//! accidental zero of `sin` cannot end the summation early. The finite-grid
//! formula only needs `ln|theta1|`, which is computed separately from the
//! product expansion after folding the argument into the fundamental cell.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Floor added to the partial-sum magnitude in relative truncation tests.
const UNDERFLOW_FLOOR: f64 = 1e-300;
/// Hard cap on series terms; unreachable for `|q| <= 0.999`.
const MAX_TERMS: usize = 100_000;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Lattice modulus and nome used by the finite-grid formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaContext {
    pub tau: Complex64,
    pub nome: Complex64,
    /// Whether the modular transformation `tau -> -1/tau` was applied.
    pub swapped: bool,
}

impl ThetaContext {
    pub fn from_tau(tau: Complex64, swapped: bool) -> Result<Self> {
        Ok(Self {
            tau,
            nome: nome_from_tau(tau)?,
            swapped,
        })
    }
}

/// A theta function value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaValue {
    pub value: Complex64,
    /// Number of series terms summed.
    pub terms: usize,
}

fn check_tau(tau: Complex64) -> Result<()> {
    if tau.im > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("tau must lie in the upper half-plane, got {tau}")))
    }
}

fn check_nome(nome: Complex64) -> Result<()> {
    if nome.norm() < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("nome must satisfy |q| < 1, got |q| = {}", nome.norm())))
    }
}

/// `q = exp(i pi tau)`.
pub fn nome_from_tau(tau: Complex64) -> Result<Complex64> {
    check_tau(tau)?;
    Ok((I * PI * tau).exp())
}

/// Series for theta1 with `ln q` given explicitly, so callers holding `tau`
/// avoid the principal-branch ambiguity of `q^{1/4}`.
fn theta1_series(z: Complex64, ln_q: Complex64, trunc_tol: f64) -> ThetaValue {
    let ln_abs_q = ln_q.re;
    let growth = z.im.abs();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut terms = 0;
    for n in 0..MAX_TERMS {
        let k = n as f64 + 0.5;
        let odd = 2.0 * k;
        // 2 |q|^{k^2} max(1, e^{|Im z| (2n+1)})
        let bound = 2.0 * (ln_abs_q * k * k + (growth * odd).max(0.0)).exp();
        if n > 0 && bound < trunc_tol * (sum.norm() + UNDERFLOW_FLOOR) {
            break;
        }
        let term = 2.0 * (ln_q * k * k).exp() * (odd * z).sin();
        sum += if n % 2 == 0 { term } else { -term };
        terms += 1;
    }
    ThetaValue { value: sum, terms }
}

/// `theta1(z, q)` with its term count.
pub fn theta1_terms(z: Complex64, nome: Complex64, trunc_tol: f64) -> Result<ThetaValue> {
    check_nome(nome)?;
    if nome == Complex64::new(0.0, 0.0) {
        return Ok(ThetaValue {
            value: Complex64::new(0.0, 0.0),
            terms: 0,
        });
    }
    Ok(theta1_series(z, nome.ln(), trunc_tol))
}

/// `theta1(z, q)`, truncated once the next term bound is below
/// `trunc_tol` relative to the partial sum.
pub fn theta1(z: Complex64, nome: Complex64, trunc_tol: f64) -> Result<Complex64> {
    theta1_terms(z, nome, trunc_tol).map(|t| t.value)
}

/// Derivative of theta1 at the origin,
/// `2 sum_{n>=0} (-1)^n (2n+1) q^{(n+1/2)^2}`.
pub fn theta1_prime_zero(nome: Complex64, trunc_tol: f64) -> Result<Complex64> {
    check_nome(nome)?;
    if nome == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let ln_q = nome.ln();
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..MAX_TERMS {
        let k = n as f64 + 0.5;
        let bound = 2.0 * (2.0 * k) * (ln_q.re * k * k).exp();
        if n > 0 && bound < trunc_tol * (sum.norm() + UNDERFLOW_FLOOR) {
            break;
        }
        let term = 2.0 * (2.0 * k) * (ln_q * k * k).exp();
        sum += if n % 2 == 0 { term } else { -term };
    }
    Ok(sum)
}

const THETA4_TOL: f64 = 1e-14;

/// `theta4(z, q) = 1 + 2 sum_{n>=1} (-1)^n q^{n^2} cos(2 n z)`.
pub fn theta4_series(z: Complex64, nome: Complex64) -> Result<Complex64> {
    check_nome(nome)?;
    let mut sum = Complex64::new(1.0, 0.0);
    if nome == Complex64::new(0.0, 0.0) {
        return Ok(sum);
    }
    let ln_q = nome.ln();
    let growth = z.im.abs();
    for n in 1..MAX_TERMS {
        let nf = n as f64;
        let bound = 2.0 * (ln_q.re * nf * nf + 2.0 * nf * growth).exp();
        if bound < THETA4_TOL * 1e-2 * (sum.norm() + UNDERFLOW_FLOOR) {
            break;
        }
        let term = 2.0 * (ln_q * nf * nf).exp() * (2.0 * nf * z).cos();
        sum += if n % 2 == 0 { term } else { -term };
    }
    Ok(sum)
}

/// Triple-product form `prod_{n>=1} (1 - q^{2n})(1 - 2 q^{2n-1} cos 2z + q^{4n-2})`.
pub fn theta4_product(z: Complex64, nome: Complex64) -> Result<Complex64> {
    check_nome(nome)?;
    let mut prod = Complex64::new(1.0, 0.0);
    if nome == Complex64::new(0.0, 0.0) {
        return Ok(prod);
    }
    let cos2z = (2.0 * z).cos();
    let q2 = nome * nome;
    let mut odd = nome; // q^{2n-1}
    let mut even = q2; // q^{2n}
    for _ in 1..MAX_TERMS {
        let factor = (1.0 - even) * (1.0 - 2.0 * odd * cos2z + odd * odd);
        prod *= factor;
        if odd.norm() * (2.0 * cos2z.norm() + 2.0) < THETA4_TOL * 1e-3 {
            break;
        }
        odd *= q2;
        even *= q2;
    }
    Ok(prod)
}

/// theta1 evaluated through the modular transformation:
/// `theta1(z | tau) = i sqrt(i/tau) exp(-i z^2 / (pi tau)) theta1(z/tau | -1/tau)`,
/// principal square root.
pub fn modular_transform_theta1(z: Complex64, tau: Complex64, trunc_tol: f64) -> Result<Complex64> {
    check_tau(tau)?;
    let dual = -1.0 / tau;
    let prefactor = I * (I / tau).sqrt() * (-I * z * z / (PI * tau)).exp();
    let inner = theta1_series(z / tau, I * PI * dual, trunc_tol);
    Ok(prefactor * inner.value)
}

/// `ln|sin u|` without overflow for large `|Im u|`.
fn ln_abs_sin(u: Complex64) -> f64 {
    let (x, y) = (u.re, u.im.abs());
    if y > 20.0 {
        let e = (-2.0 * y).exp();
        y - std::f64::consts::LN_2 + 0.5 * (-2.0 * e * (2.0 * x).cos() + e * e).ln_1p()
    } else {
        let (s, sh) = (x.sin(), y.sinh());
        0.5 * (s * s + sh * sh).ln()
    }
}

/// `ln|theta1(u | tau)|` from the product expansion
/// `theta1 = 2 q^{1/4} sin u prod_{n>=1} (1 - q^{2n})(1 - q^{2n} e^{2iu})(1 - q^{2n} e^{-2iu})`.
///
/// `u` is first shifted by lattice periods `k pi + m pi tau` into the
/// fundamental cell, using `theta1(u + m pi tau) = (-1)^m q^{-m^2} e^{-2 i m u} theta1(u)`.
pub fn ln_abs_theta1(u: Complex64, tau: Complex64) -> Result<f64> {
    check_tau(tau)?;
    let m = (u.im / (PI * tau.im)).round();
    let mut w = u - m * PI * tau;
    w.re -= PI * (w.re / PI).round();
    let shift = m * m * PI * tau.im + 2.0 * m * w.im;

    let i_pi_tau = I * PI * tau;
    let mut acc = std::f64::consts::LN_2 + 0.25 * i_pi_tau.re + ln_abs_sin(w);
    let two_iw = 2.0 * I * w;
    for n in 1..MAX_TERMS {
        let e = 2.0 * n as f64 * i_pi_tau; // ln q^{2n}
        let plus = (e + two_iw).exp();
        let minus = (e - two_iw).exp();
        let q2n = e.exp();
        acc += (1.0 - q2n).norm().ln() + (1.0 - plus).norm().ln() + (1.0 - minus).norm().ln();
        if plus.norm().max(minus.norm()).max(q2n.norm()) < 1e-18 {
            break;
        }
    }
    Ok(acc + shift)
}

/// `ln|theta1'(0 | tau)|` from `theta1'(0) = 2 q^{1/4} prod (1 - q^{2n})^3`.
pub fn ln_abs_theta1_prime_zero(tau: Complex64) -> Result<f64> {
    check_tau(tau)?;
    let i_pi_tau = I * PI * tau;
    let mut acc = std::f64::consts::LN_2 + 0.25 * i_pi_tau.re;
    for n in 1..MAX_TERMS {
        let q2n = (2.0 * n as f64 * i_pi_tau).exp();
        acc += 3.0 * (1.0 - q2n).norm().ln();
        if q2n.norm() < 1e-18 {
            break;
        }
    }
    Ok(acc)
}
