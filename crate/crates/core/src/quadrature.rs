//! Globally adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.
//!
//! The interval is first split into a caller-chosen number of equal panels so
//! that oscillatory integrands start out resolved; the panel with the largest
//! error estimate is then bisected until the total estimate meets the
//! requested tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and refinement budget for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of bisections performed after the initial panel split.
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Domain(format!(
                "quadrature tolerances must be positive (abs {}, rel {})",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::Domain("max_subdivisions must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub subdivisions: usize,
}

// Kronrod abscissae (non-negative half) and weights for the 15-point rule;
// odd indices are the embedded 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    // Roundoff floor: the estimate cannot resolve below a few ulps of the panel sum.
    let floor = 50.0 * f64::EPSILON * value.abs();
    Panel {
        a,
        b,
        value,
        error: error.max(floor),
    }
}

/// Integrates `f` over `[a, b]`, starting from `panels` equal sub-intervals.
pub fn integrate<F>(f: F, a: f64, b: f64, panels: usize, cfg: &QuadratureConfig) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    cfg.validate()?;
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(panels + cfg.max_subdivisions + 1);
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { lo + width };
        heap.push(gauss_kronrod(&f, lo, hi));
    }
    let mut evaluations = 15 * panels;
    let mut subdivisions = 0;

    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::QuadratureNonConvergence {
                estimate: value,
                error,
                subdivisions,
            });
        }
        if error <= cfg.abs_tol.max(cfg.rel_tol * value.abs()) {
            return Ok(Quadrature {
                value,
                error,
                evaluations,
                subdivisions,
            });
        }
        if subdivisions >= cfg.max_subdivisions {
            return Err(Error::QuadratureNonConvergence {
                estimate: value,
                error,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(gauss_kronrod(&f, worst.a, mid));
        heap.push(gauss_kronrod(&f, mid, worst.b));
        evaluations += 30;
        subdivisions += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, 1, &QuadratureConfig::default()).unwrap();
        assert!((q.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
        assert_eq!(q.subdivisions, 0);
    }

    #[test]
    fn oscillatory_integrand() {
        // int_0^pi sin^2(40 t) dt = pi/2
        let q = integrate(|t| (40.0 * t).sin().powi(2), 0.0, PI, 40, &QuadratureConfig::default()).unwrap();
        assert!((q.value - PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn log_singular_endpoint_converges() {
        // int_0^1 ln x dx = -1
        let cfg = QuadratureConfig {
            max_subdivisions: 400,
            ..Default::default()
        };
        let q = integrate(|x| x.ln(), 0.0, 1.0, 1, &cfg).unwrap();
        assert!((q.value + 1.0).abs() < 1e-9);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let cfg = QuadratureConfig {
            abs_tol: 1e-14,
            rel_tol: 1e-14,
            max_subdivisions: 2,
        };
        let err = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1, &cfg).unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergence { subdivisions: 2, .. }));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = QuadratureConfig {
            abs_tol: 0.0,
            ..Default::default()
        };
        assert!(integrate(|x| x, 0.0, 1.0, 1, &cfg).is_err());
    }
}
