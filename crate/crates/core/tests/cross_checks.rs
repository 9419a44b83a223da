//! Cross-checks between independent computations: frozen sparse-solver
//! resistances, large-grid limits, ellipse-boundary continuity and cache
//! behaviour under reordering and concurrency.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gridohm::correction::CorrectionKey;
use gridohm::kernel::{omega_analytic_infinite, omega_exact, Anisotropy, Displacement};
use gridohm::oracle::{Oracle, OracleConfig, OracleMethod};
use gridohm::{
    delta_omega, near_field_limit, r_finite_hybrid, r_theta_closed, CorrectionCache, GridSpec, HybridConfig,
    NodeCoord, QuadratureConfig,
};

fn node(x: i64, y: i64) -> NodeCoord {
    NodeCoord::new(x, y)
}

/// Values from an independent sparse LU solve of the grounded Laplacian.
#[test]
fn oracle_matches_frozen_sparse_solves() {
    let cases = [
        ((50, 50, 1.0, 1.0), (0, 0), (25, 25), 3.106_887_389_550_471_4),
        ((50, 50, 10.0, 1.0), (0, 0), (49, 49), 19.451_450_447_194_706),
        ((7, 3, 2.5, 0.4), (0, 0), (6, 2), 5.393_079_971_715_309),
        ((30, 20, 0.1, 1.0), (3, 4), (17, 15), 0.662_717_973_098_35),
        ((101, 101, 1.0, 1.0), (50, 50), (51, 50), 0.500_053_644_086_668_7),
    ];
    for ((lx, ly, rh, rv), s, d, want) in cases {
        let grid = GridSpec::new(lx, ly, rh, rv).unwrap();
        let oracle = Oracle::new(&grid, OracleConfig::default());
        let got = oracle.resistance(node(s.0, s.1), node(d.0, d.1)).unwrap();
        assert!((got.resistance_ohms - want).abs() <= 1e-10 * want, "{lx}x{ly}: {} vs {want}", got.resistance_ohms);
        assert!(got.residual_norm <= 1e-12);
    }
}

#[test]
fn iterative_solver_matches_direct_on_medium_grid() {
    let grid = GridSpec::with_alpha(40, 30, 5.0).unwrap();
    let (s, d) = (node(3, 7), node(31, 22));
    let direct = Oracle::new(&grid, OracleConfig::default()).resistance(s, d).unwrap();
    let iterative = Oracle::new(
        &grid,
        OracleConfig {
            method: Some(OracleMethod::Iterative),
            ..Default::default()
        },
    )
    .resistance(s, d)
    .unwrap();
    assert_eq!(iterative.method, OracleMethod::Iterative);
    assert!((direct.resistance_ohms - iterative.resistance_ohms).abs() <= 1e-10 * direct.resistance_ohms);
}

/// The lattice diagonal resistance 2/pi, recovered from the centre of a large grid.
#[test]
fn large_grid_centre_reproduces_diagonal_value() {
    let grid = GridSpec::with_alpha(301, 301, 1.0).unwrap();
    let r = Oracle::new(&grid, OracleConfig::default())
        .resistance(node(150, 150), node(151, 151))
        .unwrap()
        .resistance_ohms;
    assert!((r - 2.0 / PI).abs() < 1e-4, "{r}");
    assert!((r - 0.636_631_850_638_780_4).abs() < 1e-10);
}

/// Cutting resistors out of the infinite lattice can only raise resistance.
#[test]
fn finite_grid_bounds_infinite_grid_from_above() {
    let cfg = QuadratureConfig::default();
    for alpha in [1.0, 4.0] {
        let grid = GridSpec::with_alpha(201, 201, alpha).unwrap();
        let map = Oracle::new(&grid, OracleConfig::default()).all_from(node(100, 100)).unwrap();
        for (dx, dy) in [(1, 0), (0, 1), (1, 1), (3, 2), (7, 0), (0, 9), (12, 12)] {
            let finite = map.get(node(100 + dx, 100 + dy));
            let infinite = grid.r0() * omega_exact(Displacement::new(dx, dy), grid.alpha(), &cfg).unwrap();
            assert!(finite >= infinite - 1e-9, "alpha {alpha} ({dx},{dy}): {finite} < {infinite}");
        }
    }
}

/// Far from the boundary the theta form reduces to the infinite-grid asymptote.
#[test]
fn theta_centre_matches_infinite_asymptote() {
    for alpha in [1.0, 3.0, 0.5] {
        let grid = GridSpec::with_alpha(201, 201, alpha).unwrap();
        let s = node(100, 100);
        for (dx, dy) in [(1, 0), (2, 3), (5, 5), (10, 0), (0, 10)] {
            let d = node(100 + dx, 100 + dy);
            let theta = r_theta_closed(s, d, &grid).unwrap();
            let analytic = grid.r0() * omega_analytic_infinite(d.displacement_from(s), grid.alpha());
            assert!((theta - analytic).abs() <= 5e-3 * analytic, "alpha {alpha} ({dx},{dy}): {theta} vs {analytic}");
        }
    }
}

/// Without near-field corrections the corner source's adjacent self-images
/// leave about 0.29% error at the grid centre.
#[test]
fn theta_closed_form_close_to_oracle_far_from_source() {
    let grid = GridSpec::with_alpha(50, 50, 1.0).unwrap();
    let oracle = 3.106_887_389_550_471_4;
    let theta = r_theta_closed(node(0, 0), node(25, 25), &grid).unwrap();
    assert!((theta - oracle).abs() <= 5e-3 * oracle, "{theta}");
    let hybrid = r_finite_hybrid(node(0, 0), node(25, 25), &grid, &CorrectionCache::default(), &HybridConfig::default())
        .unwrap()
        .resistance_ohms;
    assert!((hybrid - oracle).abs() < (theta - oracle).abs());
}

/// Just outside the near-field ellipse the asymptote is already within 1% of the exact kernel.
#[test]
fn asymptote_is_continuous_at_ellipse_boundary() {
    let cfg = HybridConfig::default();
    for alpha in [0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0] {
        let a = Anisotropy::new(alpha).unwrap();
        let limit = near_field_limit(a, &cfg);
        let first_outside = |step: (i64, i64)| {
            (1..)
                .map(|k| Displacement::new(k * step.0, k * step.1))
                .find(|d| d.metric(a) > limit)
                .unwrap()
        };
        for step in [(1, 0), (0, 1), (1, 1)] {
            let d = first_outside(step);
            let exact = omega_exact(d, a, &cfg.quadrature).unwrap();
            let rel = (omega_analytic_infinite(d, a) - exact).abs() / exact;
            assert!(rel < 0.01, "alpha {alpha} {d:?}: {rel}");
        }
    }
}

/// Query order and cache reuse never change a value.
#[test]
fn cached_values_match_cache_free_evaluation() {
    let grid = GridSpec::with_alpha(20, 14, 6.0).unwrap();
    let cfg = HybridConfig::default();
    let mut pairs: Vec<_> = (0..60).map(|i| (node(i % 20, (i * 7) % 14), node((i * 3 + 5) % 20, (i * 11) % 14))).collect();
    pairs.retain(|(s, d)| s != d);
    let fresh: Vec<u64> = pairs
        .iter()
        .map(|&(s, d)| {
            r_finite_hybrid(s, d, &grid, &CorrectionCache::default(), &cfg)
                .unwrap()
                .resistance_ohms
                .to_bits()
        })
        .collect();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    let shared = CorrectionCache::default();
    for &i in &order {
        let (s, d) = pairs[i];
        let v = r_finite_hybrid(s, d, &grid, &shared, &cfg).unwrap().resistance_ohms;
        assert_eq!(v.to_bits(), fresh[i]);
    }
}

/// Shared across threads, the cache still returns identical values and
/// accounts every lookup exactly once.
#[test]
fn concurrent_cache_use_is_consistent() {
    let cfg = HybridConfig::default();
    let a = Anisotropy::new(10.0).unwrap();
    let cache = CorrectionCache::new(64);
    let disps: Vec<_> = (0..4).flat_map(|dx| (0..12).map(move |dy| Displacement::new(dx, dy))).collect();
    let reference: Vec<u64> = disps
        .iter()
        .map(|&d| delta_omega(d, a, &CorrectionCache::new(1), &cfg).unwrap().to_bits())
        .collect();
    let lookups = AtomicU64::new(0);
    std::thread::scope(|scope| {
        for t in 0..8 {
            let (cache, disps, reference, lookups, cfg) = (&cache, &disps, &reference, &lookups, &cfg);
            scope.spawn(move || {
                for round in 0..4 {
                    for (i, &d) in disps.iter().enumerate().skip((t + round) % 3) {
                        let v = delta_omega(d, a, cache, cfg).unwrap();
                        lookups.fetch_add(1, Ordering::Relaxed);
                        assert_eq!(v.to_bits(), reference[i]);
                    }
                }
            });
        }
    });
    let stats = cache.stats();
    assert_eq!(stats.hits + stats.misses, lookups.load(Ordering::Relaxed));
    assert!(stats.misses >= disps.len() as u64);
    assert_eq!(stats.size, disps.len());
}

#[test]
fn cache_capacity_and_lru_order() {
    let cache = CorrectionCache::new(10_000);
    let a = Anisotropy::new(1.0).unwrap();
    let key = |i: i64| CorrectionKey::new(Displacement::new(i, 0), a);
    // Keep the first key warm while streaming 20,000 distinct keys through.
    for i in 0..20_000 {
        cache.get_or_try_insert_with(key(i), || Ok(i as f64)).unwrap();
        if i % 1000 == 0 {
            cache.get_or_try_insert_with(key(0), || unreachable!()).unwrap();
        }
        assert!(cache.len() <= 10_000);
    }
    assert_eq!(cache.len(), 10_000);
    let before = cache.stats();
    assert_eq!(cache.get_or_try_insert_with(key(0), || Ok(-1.0)).unwrap(), 0.0);
    assert_eq!(cache.stats().hits, before.hits + 1);
    assert_eq!(cache.get_or_try_insert_with(key(1), || Ok(-1.0)).unwrap(), -1.0);
    assert_eq!(cache.stats().misses, before.misses + 1);
    assert_eq!(cache.get_or_try_insert_with(key(19_999), || Ok(-1.0)).unwrap(), 19_999.0);
}
