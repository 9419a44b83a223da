//! Built-in invariant checks across all modules, run by `gridohm selftest`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::correction::{omega_hybrid, r_finite_hybrid, CorrectionCache, HybridConfig, Method};
use crate::error::Result;
use crate::finite_grid::{r_theta_closed, r_theta_closed_with, theta_context, SwapPolicy};
use crate::grid::{GridSpec, NodeCoord};
use crate::kernel::{
    omega_asymptotic, omega_exact, r2_closed, r2_quadrature, sinh_lambda, dispersion_lambda, Anisotropy,
    Displacement, EULER_GAMMA,
};
use crate::oracle::{Oracle, OracleConfig, OracleMethod};
use crate::quadrature::QuadratureConfig;
use crate::report::error_map;
use crate::theta::{
    modular_transform_theta1, nome_from_tau, theta1, theta1_terms, theta4_product, theta4_series,
};

#[derive(Debug, Clone, Copy)]
pub struct SelftestOptions {
    /// Skip the 50x50 oracle sweeps.
    pub fast: bool,
    /// Euler-Mascheroni value used by the far-field formula; overriding it
    /// is a mutation probe that must make the suite fail.
    pub euler_gamma: f64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            fast: false,
            euler_gamma: EULER_GAMMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn record(&mut self, name: &'static str, outcome: Result<(bool, String)>) {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        self.checks.push(Check { name, passed, detail });
    }
}

fn alpha(v: f64) -> Anisotropy {
    Anisotropy::new(v).expect("positive literal")
}

/// Euler-Mascheroni constant from the harmonic series with its
/// Euler-Maclaurin tail, independent of the stored constant.
fn euler_gamma_from_harmonic() -> f64 {
    let n = 10_000.0_f64;
    let harmonic: f64 = (1..=10_000).rev().map(|k| 1.0 / k as f64).sum();
    harmonic - n.ln() - 1.0 / (2.0 * n) + 1.0 / (12.0 * n * n) - 1.0 / (120.0 * n.powi(4))
}

pub fn run(opts: &SelftestOptions) -> Vec<Check> {
    let mut suite = Suite { checks: Vec::new() };
    let q = QuadratureConfig::default();
    let gamma = opts.euler_gamma;

    suite.record("euler-gamma-constant", Ok({
        let independent = euler_gamma_from_harmonic();
        ((gamma - independent).abs() < 1e-13, format!("stored {gamma}, harmonic series {independent}"))
    }));

    suite.record("kernel-calibration", (|| {
        let adj = omega_exact(Displacement::new(1, 0), alpha(1.0), &q)?;
        let diag = omega_exact(Displacement::new(1, 1), alpha(1.0), &q)?;
        Ok((
            (adj - 0.5).abs() < 1e-6 && (diag - 2.0 / PI).abs() < 1e-5,
            format!("omega(1,0) = {adj:.12}, omega(1,1) = {diag:.12}"),
        ))
    })());

    suite.record("r2-closed-vs-quadrature", (|| {
        let mut worst: f64 = 0.0;
        for a in [0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0] {
            worst = worst.max((r2_closed(alpha(a)) - r2_quadrature(alpha(a), &q)?).abs());
        }
        Ok((worst < 1e-8, format!("max |closed - quadrature| = {worst:.2e}")))
    })());

    suite.record("sinh-consistency", (|| {
        let mut worst: f64 = 0.0;
        for i in 0..=64 {
            let t = 1e-4 + (PI - 1e-4) * i as f64 / 64.0;
            for a in [0.01, 1.0, 100.0] {
                let s = sinh_lambda(t, alpha(a))?;
                worst = worst.max((dispersion_lambda(t, alpha(a))?.sinh() - s).abs() / s);
            }
        }
        Ok((worst < 1e-12, format!("max relative mismatch {worst:.2e}")))
    })());

    suite.record("far-field-convergence", (|| {
        let mut devs = Vec::new();
        for n in [1, 2, 4, 8, 16] {
            let d = Displacement::new(n, n);
            let exact = omega_exact(d, alpha(1.0), &q)?;
            devs.push((omega_asymptotic(d, alpha(1.0), gamma) - exact).abs() / exact);
        }
        let monotone = devs.windows(2).all(|w| w[1] < w[0]);
        let last = devs[4];
        Ok((monotone && last < 5e-4, format!(
                "deviations {}",
                devs.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>().join(", ")
            )))
    })());

    suite.record("analytic-diagonal-value", Ok({
        let v = omega_asymptotic(Displacement::new(1, 1), alpha(1.0), gamma);
        ((v - 0.625_004_652_903_611_2).abs() < 1e-12, format!("omega_analytic(1,1) = {v:.12}"))
    }));

    suite.record("theta-triple-product", (|| {
        let mut worst: f64 = 0.0;
        for nome in [0.1, 0.3, 0.5, 0.7] {
            for k in 0..8 {
                let z = Complex64::new(PI * (k as f64 + 0.5) / 8.0, 0.0);
                let n = Complex64::new(nome, 0.0);
                worst = worst.max((theta4_series(z, n)? - theta4_product(z, n)?).norm());
            }
        }
        Ok((worst < 1e-12, format!("max |series - product| = {worst:.2e}")))
    })());

    suite.record("theta-modular-transform", (|| {
        let mut worst: f64 = 0.0;
        for i in 0..=19 {
            let tau = Complex64::new(0.0, 0.05 + 0.95 * i as f64 / 19.0);
            for z in [0.1, 0.5, 1.3] {
                let z = Complex64::new(z, 0.0);
                let direct = theta1(z, nome_from_tau(tau)?, 1e-16)?;
                let swapped = modular_transform_theta1(z, tau, 1e-16)?;
                worst = worst.max((direct - swapped).norm());
            }
        }
        Ok((worst < 1e-9, format!("max |direct - transformed| = {worst:.2e}")))
    })());

    suite.record("theta-oddness-periodicity", (|| {
        let mut worst: f64 = 0.0;
        for nome in [0.05, 0.4, 0.9] {
            let n = Complex64::new(nome, 0.0);
            for z in [0.2, 1.0, 2.9] {
                let z = Complex64::new(z, 0.1);
                let v = theta1(z, n, 1e-16)?;
                worst = worst.max((theta1(-z, n, 1e-16)? + v).norm());
                worst = worst.max((theta1(z + PI, n, 1e-16)? + v).norm());
            }
        }
        Ok((worst < 1e-12, format!("max deviation {worst:.2e}")))
    })());

    suite.record("theta-gaussian-truncation", (|| {
        let v = theta1_terms(Complex64::new(0.7, 0.0), Complex64::new(0.9, 0.0), 1e-15)?;
        Ok((v.terms <= 40, format!("{} terms at |q| = 0.9", v.terms)))
    })());

    suite.record("theta-swap-invariance", (|| {
        let grid = GridSpec::with_alpha(100, 4, 2.0)?;
        let swapped = theta_context(&grid).swapped;
        let mut worst: f64 = 0.0;
        for (s, d) in [((0, 0), (99, 3)), ((10, 1), (40, 2)), ((50, 0), (51, 0)), ((3, 3), (3, 0))] {
            let (s, d) = (NodeCoord::new(s.0, s.1), NodeCoord::new(d.0, d.1));
            let a = r_theta_closed(s, d, &grid)?;
            let b = r_theta_closed_with(s.transposed(), d.transposed(), &grid.transposed(), SwapPolicy::Never)?;
            worst = worst.max((a - b).abs() / b);
        }
        Ok((swapped && worst < 1e-9, format!("swapped = {swapped}, max relative difference {worst:.2e}")))
    })());

    suite.record("theta-reciprocity-positivity", (|| {
        let grid = GridSpec::with_alpha(9, 7, 3.0)?;
        let nodes: Vec<_> = grid.nodes().collect();
        let mut ok = true;
        for (i, &s) in nodes.iter().enumerate().step_by(5) {
            for &d in nodes.iter().skip(i + 1).step_by(3) {
                let (a, b) = (r_theta_closed(s, d, &grid)?, r_theta_closed(d, s, &grid)?);
                ok &= a > 0.0 && (a - b).abs() <= 1e-13 * a;
            }
        }
        Ok((ok, String::from("9x7 grid, alpha 3")))
    })());

    suite.record("oracle-small-grids", (|| {
        let g21 = GridSpec::new(2, 1, 1.0, 1.0)?;
        let g22 = GridSpec::new(2, 2, 1.0, 1.0)?;
        let o21 = Oracle::new(&g21, OracleConfig::default());
        let o22 = Oracle::new(&g22, OracleConfig::default());
        let values = [
            o21.resistance(NodeCoord::new(0, 0), NodeCoord::new(1, 0))?.resistance_ohms,
            o22.resistance(NodeCoord::new(0, 0), NodeCoord::new(1, 0))?.resistance_ohms,
            o22.resistance(NodeCoord::new(0, 0), NodeCoord::new(1, 1))?.resistance_ohms,
        ];
        let ok = values.iter().zip([1.0, 0.75, 1.0]).all(|(v, w)| (v - w).abs() < 1e-12);
        Ok((ok, format!("{values:?}")))
    })());

    suite.record("oracle-methods-agree", (|| {
        let grid = GridSpec::new(5, 5, 1.7, 0.6)?;
        let src = NodeCoord::new(1, 3);
        let maps = [OracleMethod::DensePseudoInverse, OracleMethod::GroundedDirect, OracleMethod::Iterative]
            .into_iter()
            .map(|m| Oracle::new(&grid, OracleConfig { method: Some(m), ..Default::default() }).all_from(src))
            .collect::<Result<Vec<_>>>()?;
        let pair = Oracle::new(&grid, OracleConfig::default()).resistance(src, NodeCoord::new(4, 0))?;
        let mut worst: f64 = (maps[1].get(NodeCoord::new(4, 0)) - pair.resistance_ohms).abs() / pair.resistance_ohms;
        for t in grid.nodes().filter(|&t| t != src) {
            for m in &maps[1..] {
                worst = worst.max((m.get(t) - maps[0].get(t)).abs() / maps[0].get(t));
            }
        }
        Ok((worst < 1e-10, format!("max relative disagreement {worst:.2e}")))
    })());

    suite.record("cache-counters", (|| {
        let cache = CorrectionCache::new(16);
        let cfg = HybridConfig::default();
        let a = omega_hybrid(Displacement::new(2, 1), alpha(1.0), &cache, &cfg)?;
        let b = omega_hybrid(Displacement::new(-2, 1), alpha(1.0), &cache, &cfg)?;
        let s = cache.stats();
        let ok = a.to_bits() == b.to_bits() && (s.hits, s.misses, s.size) == (1, 1, 1) && s.hit_rate == 0.5;
        Ok((ok, format!("hits {} misses {} size {}", s.hits, s.misses, s.size)))
    })());

    suite.record("hybrid-exact-inside-ellipse", (|| {
        let cache = CorrectionCache::new(64);
        let cfg = HybridConfig::default();
        let mut worst: f64 = 0.0;
        for (dx, dy, a) in [(1, 0, 1.0), (2, 3, 10.0), (3, 7, 0.02), (0, 4, 1.0)] {
            let d = Displacement::new(dx, dy);
            let h = omega_hybrid(d, alpha(a), &cache, &cfg)?;
            worst = worst.max((h - omega_exact(d, alpha(a), &q)?).abs());
        }
        Ok((worst <= 2.0 * q.abs_tol, format!("max |hybrid - exact| = {worst:.2e}")))
    })());

    suite.record("hybrid-small-grid-reciprocity", (|| {
        let grid = GridSpec::with_alpha(6, 4, 5.0)?;
        let cache = CorrectionCache::default();
        let cfg = HybridConfig::default();
        let (s, d) = (NodeCoord::new(0, 1), NodeCoord::new(4, 3));
        let a = r_finite_hybrid(s, d, &grid, &cache, &cfg)?.resistance_ohms;
        let b = r_finite_hybrid(d, s, &grid, &cache, &cfg)?.resistance_ohms;
        Ok(((a - b).abs() <= 1e-12 * a, format!("{a:.12} vs {b:.12}")))
    })());

    if !opts.fast {
        let cfg = HybridConfig::default();
        suite.record("errormap-alpha-1-corner", (|| {
            let grid = GridSpec::with_alpha(50, 50, 1.0)?;
            let rep = error_map(&grid, NodeCoord::new(0, 0), Method::Hybrid, &CorrectionCache::default(), &cfg)?;
            let (mean, max) = (100.0 * rep.mean_rel_error, 100.0 * rep.max_rel_error);
            Ok((mean <= 0.014 && max <= 0.402, format!("mean {mean:.4}%, max {max:.4}%")))
        })());
        suite.record("errormap-alpha-10-cross-error", (|| {
            let grid = GridSpec::with_alpha(50, 50, 10.0)?;
            let src = NodeCoord::new(0, 0);
            let hybrid = error_map(&grid, src, Method::Hybrid, &CorrectionCache::default(), &cfg)?;
            let theta = error_map(&grid, src, Method::Theta, &CorrectionCache::default(), &cfg)?;
            let ok = hybrid.max_rel_error <= 5e-3
                && hybrid.max_on_axis_rel_error <= 2.0 * hybrid.max_off_axis_rel_error
                && theta.max_on_axis_rel_error >= 2.0 * hybrid.max_on_axis_rel_error;
            Ok((
                ok,
                format!(
                    "hybrid on/off-axis {:.4}%/{:.4}%, theta on-axis {:.4}%",
                    100.0 * hybrid.max_on_axis_rel_error,
                    100.0 * hybrid.max_off_axis_rel_error,
                    100.0 * theta.max_on_axis_rel_error
                ),
            ))
        })());
    }
    suite.checks
}
