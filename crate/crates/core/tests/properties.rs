//! Randomized invariants across the kernel, theta, finite-grid, correction and oracle layers.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use gridohm::finite_grid::{r_theta_closed_with, IsotropicPoint, SwapPolicy};
use gridohm::kernel::{omega_exact, Anisotropy, Displacement};
use gridohm::oracle::{Oracle, OracleConfig};
use gridohm::theta::{modular_transform_theta1, nome_from_tau, theta1, theta1_terms, theta4_product, theta4_series};
use gridohm::{
    delta_omega, dispersion_lambda, image_displacements_in_ellipse, omega_hybrid, r_finite_hybrid, r_theta_closed,
    sinh_lambda, CorrectionCache, GridSpec, HybridConfig, NodeCoord, QuadratureConfig,
};

fn alpha_strategy() -> impl Strategy<Value = f64> {
    (-2.0f64..2.0).prop_map(|e| 10f64.powf(e))
}

fn grid_and_pair(max_side: usize) -> impl Strategy<Value = (GridSpec, NodeCoord, NodeCoord)> {
    (2..=max_side, 2..=max_side, alpha_strategy()).prop_flat_map(|(lx, ly, a)| {
        let grid = GridSpec::with_alpha(lx, ly, a).unwrap();
        let node = (0..lx as i64, 0..ly as i64).prop_map(|(x, y)| NodeCoord::new(x, y));
        (Just(grid), node.clone(), node).prop_filter("distinct nodes", |(_, s, d)| s != d)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reciprocal_anisotropy_is_exact(a in alpha_strategy()) {
        let al = Anisotropy::new(a).unwrap();
        prop_assert!((al.k() * al.value() - 1.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn sinh_matches_dispersion(t in 1e-4f64..PI, a in alpha_strategy()) {
        let al = Anisotropy::new(a).unwrap();
        let s = sinh_lambda(t, al).unwrap();
        let lam = dispersion_lambda(t, al).unwrap();
        prop_assert!(lam >= 0.0);
        prop_assert!((lam.sinh() - s).abs() <= 1e-12 * s);
    }

    #[test]
    fn exact_kernel_is_even(dx in -12i64..12, dy in -12i64..12, a in alpha_strategy()) {
        let al = Anisotropy::new(a).unwrap();
        let cfg = QuadratureConfig::default();
        let v = omega_exact(Displacement::new(dx, dy), al, &cfg).unwrap();
        prop_assert_eq!(v.to_bits(), omega_exact(Displacement::new(-dx, dy), al, &cfg).unwrap().to_bits());
        prop_assert_eq!(v.to_bits(), omega_exact(Displacement::new(dx, -dy), al, &cfg).unwrap().to_bits());
        prop_assert!(v >= 0.0);
        prop_assert_eq!(v == 0.0, dx == 0 && dy == 0);
    }

    #[test]
    fn isotropic_kernel_is_transpose_symmetric(a in 0i64..15, b in 0i64..15) {
        let one = Anisotropy::isotropic();
        let cfg = QuadratureConfig::default();
        let u = omega_exact(Displacement::new(a, b), one, &cfg).unwrap();
        let v = omega_exact(Displacement::new(b, a), one, &cfg).unwrap();
        prop_assert!((u - v).abs() <= 1e-9);
    }

    #[test]
    fn exact_kernel_increases_along_axes(n in 0i64..30, a in alpha_strategy()) {
        let al = Anisotropy::new(a).unwrap();
        let cfg = QuadratureConfig::default();
        let f = |d| omega_exact(d, al, &cfg).unwrap();
        prop_assert!(f(Displacement::new(n + 1, 0)) > f(Displacement::new(n, 0)));
        prop_assert!(f(Displacement::new(0, n + 1)) > f(Displacement::new(0, n)));
    }

    #[test]
    fn theta1_is_odd(re in -4.0f64..4.0, im in -1.0f64..1.0, q in 0.0f64..0.9) {
        let (z, n) = (Complex64::new(re, im), Complex64::new(q, 0.0));
        let v = theta1(z, n, 1e-16).unwrap();
        prop_assert!((theta1(-z, n, 1e-16).unwrap() + v).norm() <= 1e-14 * v.norm().max(1.0));
    }

    #[test]
    fn theta1_antiperiodic_in_pi(re in -4.0f64..4.0, im in -0.5f64..0.5, q in 0.0f64..=0.9) {
        let (z, n) = (Complex64::new(re, im), Complex64::new(q, 0.0));
        let v = theta1(z, n, 1e-16).unwrap();
        prop_assert!((theta1(z + PI, n, 1e-16).unwrap() + v).norm() <= 1e-12 * v.norm().max(1.0));
    }

    #[test]
    fn triple_product_identity(z in 0.0f64..PI, qi in 0usize..4) {
        let q = Complex64::new([0.1, 0.3, 0.5, 0.7][qi], 0.0);
        let z = Complex64::new(z, 0.0);
        prop_assert!((theta4_series(z, q).unwrap() - theta4_product(z, q).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn modular_transform_identity(tau_im in 0.05f64..=1.0, z in 0.0f64..PI) {
        let tau = Complex64::new(0.0, tau_im);
        let z = Complex64::new(z, 0.0);
        let direct = theta1(z, nome_from_tau(tau).unwrap(), 1e-16).unwrap();
        let swapped = modular_transform_theta1(z, tau, 1e-16).unwrap();
        prop_assert!((direct - swapped).norm() < 1e-9);
    }

    #[test]
    fn gaussian_truncation_term_count(z in 0.0f64..PI, q in 0.0f64..=0.9) {
        let v = theta1_terms(Complex64::new(z, 0.0), Complex64::new(q, 0.0), 1e-15).unwrap();
        prop_assert!(v.terms <= 40, "{} terms", v.terms);
    }

    #[test]
    fn isotropic_coordinate_metric(x0 in -50i64..50, y0 in -50i64..50, x1 in -50i64..50, y1 in -50i64..50, a in alpha_strategy()) {
        let al = Anisotropy::new(a).unwrap();
        let z0 = IsotropicPoint::from_node(NodeCoord::new(x0, y0), al).z;
        let z1 = IsotropicPoint::from_node(NodeCoord::new(x1, y1), al).z;
        let (dx, dy) = ((x1 - x0) as f64, (y1 - y0) as f64);
        let want = dx * dx + dy * dy / a;
        prop_assert!(((z1 - z0).norm_sqr() - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn theta_reciprocity_and_positivity((grid, s, d) in grid_and_pair(40)) {
        let a = r_theta_closed(s, d, &grid).unwrap();
        let b = r_theta_closed(d, s, &grid).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn theta_transpose_invariance((grid, s, d) in grid_and_pair(60)) {
        let a = r_theta_closed(s, d, &grid).unwrap();
        let b = r_theta_closed_with(s.transposed(), d.transposed(), &grid.transposed(), SwapPolicy::Auto).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a);
    }

    #[test]
    fn ellipse_enumeration_is_complete(
        (grid, a, b) in grid_and_pair(20),
        limit in 0.0f64..400.0,
    ) {
        let got: Vec<_> = image_displacements_in_ellipse(a, b, &grid, limit)
            .into_iter()
            .map(|i| (i.m, i.n, i.family, i.displacement))
            .collect();
        let alpha = grid.alpha();
        let (px, py) = (2 * grid.lx as i64, 2 * grid.ly as i64);
        let mut brute = Vec::new();
        // |m|, |n| <= 60 covers the widest ellipse sampled here:
        // sqrt(400 / 0.01) = 200 < 60 * 2 * 2 - 2 * 2.
        for m in -60i64..=60 {
            for n in -60i64..=60 {
                for (f, img) in gridohm::mirror_images(b).images.iter().enumerate() {
                    let d = Displacement::new(a.x - img.x - m * px, a.y - img.y - n * py);
                    if d.metric(alpha) <= limit {
                        brute.push((m, n, f as u8 + 1, d));
                    }
                }
            }
        }
        brute.sort_by_key(|&(m, n, f, _)| (m, n, f));
        prop_assert_eq!(got, brute);
    }

    #[test]
    fn correction_shares_entries_across_signs(dx in 0i64..5, dy in 0i64..5, a in alpha_strategy()) {
        let al = Anisotropy::new(a).unwrap();
        let cfg = HybridConfig::default();
        let cache = CorrectionCache::new(8);
        let base = delta_omega(Displacement::new(dx, dy), al, &cache, &cfg).unwrap();
        for (sx, sy) in [(-1, 1), (1, -1), (-1, -1)] {
            let v = delta_omega(Displacement::new(sx * dx, sy * dy), al, &cache, &cfg).unwrap();
            prop_assert_eq!(v.to_bits(), base.to_bits());
        }
        prop_assert_eq!(cache.len(), 1);
        let fresh = delta_omega(Displacement::new(dx, dy), al, &CorrectionCache::new(8), &cfg).unwrap();
        prop_assert_eq!(fresh.to_bits(), base.to_bits());
    }

    #[test]
    fn hybrid_matches_exact_inside_ellipse(dx in -5i64..=5, dy in -5i64..=5) {
        let one = Anisotropy::isotropic();
        let cfg = HybridConfig::default();
        let d = Displacement::new(dx, dy);
        prop_assume!(d.metric(one) <= 25.0);
        let h = omega_hybrid(d, one, &CorrectionCache::default(), &cfg).unwrap();
        let e = omega_exact(d, one, &cfg.quadrature).unwrap();
        prop_assert!((h - e).abs() <= 2.0 * cfg.quadrature.abs_tol);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hybrid_reciprocity((grid, s, d) in grid_and_pair(16)) {
        let cache = CorrectionCache::default();
        let cfg = HybridConfig::default();
        let a = r_finite_hybrid(s, d, &grid, &cache, &cfg).unwrap().resistance_ohms;
        let b = r_finite_hybrid(d, s, &grid, &cache, &cfg).unwrap().resistance_ohms;
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn oracle_triangle_inequality_and_reciprocity(
        (grid, a, b) in grid_and_pair(12),
        cx in 0i64..12,
        cy in 0i64..12,
    ) {
        let c = NodeCoord::new(cx % grid.lx as i64, cy % grid.ly as i64);
        let oracle = Oracle::new(&grid, OracleConfig::default());
        let r = |u, v| oracle.resistance(u, v).unwrap().resistance_ohms;
        prop_assert!(r(a, c) <= r(a, b) + r(b, c) + 1e-12);
        prop_assert!((r(a, b) - r(b, a)).abs() <= 1e-12 * r(a, b));
    }

    #[test]
    fn oracle_batch_matches_pairwise((grid, s, d) in grid_and_pair(14)) {
        let oracle = Oracle::new(&grid, OracleConfig::default());
        let map = oracle.all_from(s).unwrap();
        let pair = oracle.resistance(s, d).unwrap().resistance_ohms;
        prop_assert!((map.get(d) - pair).abs() <= 1e-10 * pair);
    }
}
