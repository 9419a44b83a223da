//! Near-field hybrid correction.
//!
//! The logarithmic kernel underestimates the discrete lattice close to the
//! source, most visibly along the lattice axes when the grid is strongly
//! anisotropic. Inside the ellipse `alpha dx^2 + dy^2 <= limit` the
//! difference `dOmega = Omega_exact - Omega_analytic` is integrated once per
//! displacement and memoized; outside it the analytic kernel is used as is.
//! For finite grids the correction is applied to every mirror image that
//! falls inside the ellipse.

use std::num::NonZeroUsize;

use lru::LruCache;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::finite_grid::{image_displacements_in_ellipse, r_theta_closed};
use crate::grid::{GridSpec, NodeCoord};
use crate::kernel::{omega_analytic_infinite, omega_exact, Anisotropy, Displacement};
use crate::quadrature::QuadratureConfig;

/// Cache key: first-quadrant displacement plus the exact bit pattern of alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CorrectionKey {
    pub dx: u64,
    pub dy: u64,
    pub alpha_bits: u64,
}

impl CorrectionKey {
    pub fn new(d: Displacement, alpha: Anisotropy) -> Self {
        // + 0.0 folds a negative zero onto positive zero
        let a = alpha.value() + 0.0;
        Self {
            dx: d.dx.unsigned_abs(),
            dy: d.dy.unsigned_abs(),
            alpha_bits: a.to_bits(),
        }
    }
}

/// Snapshot of cache counters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub size: usize,
    pub hit_rate: f64,
}

#[derive(Debug)]
struct CacheState {
    entries: LruCache<CorrectionKey, f64>,
    hits: u64,
    misses: u64,
}

/// Bounded LRU map from [`CorrectionKey`] to `dOmega`.
///
/// Safe to share between threads. A miss releases the lock while the value
/// is computed, so two threads may integrate the same key concurrently; both
/// produce the same value and both count a miss.
#[derive(Debug)]
pub struct CorrectionCache {
    capacity: usize,
    state: Mutex<CacheState>,
}

impl CorrectionCache {
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("non-zero");
        Self {
            capacity: cap.get(),
            state: Mutex::new(CacheState {
                entries: LruCache::new(cap),
                hits: 0,
                misses: 0,
            }),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.state.lock().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Looks up without touching recency or counters.
    pub fn peek(&self, key: &CorrectionKey) -> Option<f64> {
        self.state.lock().entries.peek(key).copied()
    }

    /// Returns the cached value for `key` or computes, stores and returns it.
    pub fn get_or_try_insert_with<F>(&self, key: CorrectionKey, compute: F) -> Result<f64>
    where
        F: FnOnce() -> Result<f64>,
    {
        {
            let mut st = self.state.lock();
            if let Some(v) = st.entries.get(&key).copied() {
                st.hits += 1;
                return Ok(v);
            }
            st.misses += 1;
        }
        let value = compute()?;
        self.state.lock().entries.put(key, value);
        Ok(value)
    }

    pub fn stats(&self) -> CacheStats {
        let st = self.state.lock();
        let total = st.hits + st.misses;
        CacheStats {
            hits: st.hits,
            misses: st.misses,
            size: st.entries.len(),
            hit_rate: if total == 0 { 0.0 } else { st.hits as f64 / total as f64 },
        }
    }

    pub fn clear(&self) {
        let mut st = self.state.lock();
        st.entries.clear();
        st.hits = 0;
        st.misses = 0;
    }
}

impl Default for CorrectionCache {
    fn default() -> Self {
        Self::new(HybridConfig::default().cache_capacity)
    }
}

/// Snapshot accessor mirroring [`CorrectionCache::stats`].
pub fn cache_stats(cache: &CorrectionCache) -> CacheStats {
    cache.stats()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    /// The near-field limit is `limit_scale * max(alpha, 1/alpha)`.
    pub limit_scale: f64,
    pub cache_capacity: usize,
    pub quadrature: QuadratureConfig,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            limit_scale: 25.0,
            cache_capacity: 10_000,
            quadrature: QuadratureConfig::default(),
        }
    }
}

pub fn near_field_limit(alpha: Anisotropy, cfg: &HybridConfig) -> f64 {
    cfg.limit_scale * alpha.value().max(alpha.k())
}

/// `alpha dx^2 + dy^2 <= limit` (inclusive).
pub fn within_near_field(d: Displacement, alpha: Anisotropy, limit: f64) -> bool {
    d.metric(alpha) <= limit
}

/// `Omega_exact(d) - Omega_analytic(d)`, served from `cache` when present.
///
/// Callers are expected to stay inside the near-field ellipse.
pub fn delta_omega(d: Displacement, alpha: Anisotropy, cache: &CorrectionCache, cfg: &HybridConfig) -> Result<f64> {
    debug_assert!(
        within_near_field(d, alpha, near_field_limit(alpha, cfg)),
        "delta_omega called outside the near field: {d:?}, alpha {}",
        alpha.value()
    );
    let d = d.canonical();
    cache.get_or_try_insert_with(CorrectionKey::new(d, alpha), || {
        Ok(omega_exact(d, alpha, &cfg.quadrature)? - omega_analytic_infinite(d, alpha))
    })
}

/// Infinite-grid kernel with the near-field correction folded in.
pub fn omega_hybrid(d: Displacement, alpha: Anisotropy, cache: &CorrectionCache, cfg: &HybridConfig) -> Result<f64> {
    let analytic = omega_analytic_infinite(d, alpha);
    if within_near_field(d, alpha, near_field_limit(alpha, cfg)) {
        Ok(analytic + delta_omega(d, alpha, cache, cfg)?)
    } else {
        Ok(analytic)
    }
}

/// Evaluation route for a resistance query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Theta,
    Hybrid,
    Oracle,
    AnalyticInfinite,
    ExactInfinite,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Theta => "theta",
            Method::Hybrid => "hybrid",
            Method::Oracle => "oracle",
            Method::AnalyticInfinite => "analytic-infinite",
            Method::ExactInfinite => "exact-infinite",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A resistance value and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResistanceResult {
    pub resistance_ohms: f64,
    pub method: Method,
    pub corrections_applied: usize,
    pub cache: Option<CacheStats>,
}

/// Finite-grid resistance: theta closed form plus per-image near-field corrections,
///
/// `R = R_theta + (r0/2) sum [dOmega(s - d_i) + dOmega(d - s_i) - dOmega(s - s_i) - dOmega(d - d_i)]`.
pub fn r_finite_hybrid(
    s: NodeCoord,
    d: NodeCoord,
    grid: &GridSpec,
    cache: &CorrectionCache,
    cfg: &HybridConfig,
) -> Result<ResistanceResult> {
    grid.check(s)?;
    grid.check(d)?;
    if s == d {
        return Ok(ResistanceResult {
            resistance_ohms: 0.0,
            method: Method::Hybrid,
            corrections_applied: 0,
            cache: Some(cache.stats()),
        });
    }
    let alpha = grid.alpha();
    let limit = near_field_limit(alpha, cfg);
    let base = r_theta_closed(s, d, grid)?;

    let mut correction = 0.0;
    let mut applied = 0;
    for (a, b, sign) in [(s, d, 1.0), (d, s, 1.0), (s, s, -1.0), (d, d, -1.0)] {
        for img in image_displacements_in_ellipse(a, b, grid, limit) {
            correction += sign * delta_omega(img.displacement, alpha, cache, cfg)?;
            applied += 1;
        }
    }
    Ok(ResistanceResult {
        resistance_ohms: base + 0.5 * grid.r0() * correction,
        method: Method::Hybrid,
        corrections_applied: applied,
        cache: Some(cache.stats()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn a(v: f64) -> Anisotropy {
        Anisotropy::new(v).unwrap()
    }

    #[test]
    fn limit_examples() {
        let cfg = HybridConfig::default();
        assert_eq!(near_field_limit(a(1.0), &cfg), 25.0);
        assert_eq!(near_field_limit(a(10.0), &cfg), 250.0);
        assert!((near_field_limit(a(0.02), &cfg) - 1250.0).abs() < 1e-9);
    }

    #[test]
    fn ellipse_examples() {
        assert!(within_near_field(Displacement::ZERO, a(3.0), 0.0));
        assert!(within_near_field(Displacement::new(5, 0), a(10.0), 250.0));
        assert!(!within_near_field(Displacement::new(6, 0), a(10.0), 250.0));
    }

    #[test]
    fn delta_examples() {
        let cache = CorrectionCache::new(16);
        let cfg = HybridConfig::default();
        assert_eq!(delta_omega(Displacement::ZERO, a(2.0), &cache, &cfg).unwrap(), 0.0);
        let diag = delta_omega(Displacement::new(1, 1), a(1.0), &cache, &cfg).unwrap();
        assert!((diag - (2.0 / PI - 0.625_004_652_903_611_2)).abs() < 1e-10);
        let axis = delta_omega(Displacement::new(1, 0), a(1.0), &cache, &cfg).unwrap();
        assert!((axis - (0.5 - 0.514_686_852_827_285_4)).abs() < 1e-10);
    }

    #[test]
    fn stats_examples() {
        let cache = CorrectionCache::new(8);
        assert_eq!(cache.stats(), CacheStats::default());
        let cfg = HybridConfig::default();
        let d = Displacement::new(2, 1);
        let first = delta_omega(d, a(1.0), &cache, &cfg).unwrap();
        let second = delta_omega(d, a(1.0), &cache, &cfg).unwrap();
        assert_eq!(first.to_bits(), second.to_bits());
        let st = cache_stats(&cache);
        assert_eq!((st.hits, st.misses, st.size), (1, 1, 1));
        assert_eq!(st.hit_rate, 0.5);
    }

    #[test]
    fn symmetric_displacements_share_an_entry() {
        let cache = CorrectionCache::new(8);
        let cfg = HybridConfig::default();
        let p = delta_omega(Displacement::new(3, 2), a(2.0), &cache, &cfg).unwrap();
        let m = delta_omega(Displacement::new(-3, 2), a(2.0), &cache, &cfg).unwrap();
        let mm = delta_omega(Displacement::new(-3, -2), a(2.0), &cache, &cfg).unwrap();
        assert_eq!(p.to_bits(), m.to_bits());
        assert_eq!(p.to_bits(), mm.to_bits());
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn key_canonicalizes_signs_and_separates_alpha() {
        let k = CorrectionKey::new(Displacement::new(3, -2), a(2.0));
        assert_eq!(k, CorrectionKey::new(Displacement::new(-3, 2), a(2.0)));
        assert_eq!((k.dx, k.dy), (3, 2));
        assert_ne!(k, CorrectionKey::new(Displacement::new(2, 3), a(2.0)));
        assert_ne!(k, CorrectionKey::new(Displacement::new(3, 2), a(2.0 + f64::EPSILON * 2.0)));
    }

    #[test]
    fn lru_eviction_order() {
        let cache = CorrectionCache::new(3);
        let key = |i: u64| CorrectionKey {
            dx: i,
            dy: 0,
            alpha_bits: 1f64.to_bits(),
        };
        for i in 0..3 {
            cache.get_or_try_insert_with(key(i), || Ok(i as f64)).unwrap();
        }
        // touch 0 so that 1 becomes least recently used
        cache.get_or_try_insert_with(key(0), || unreachable!()).unwrap();
        cache.get_or_try_insert_with(key(3), || Ok(3.0)).unwrap();
        assert_eq!(cache.len(), 3);
        assert!(cache.peek(&key(1)).is_none());
        assert!(cache.peek(&key(0)).is_some());
    }

    #[test]
    fn hybrid_examples() {
        let cache = CorrectionCache::new(64);
        let cfg = HybridConfig::default();
        let v = omega_hybrid(Displacement::new(1, 0), a(1.0), &cache, &cfg).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
        let far = Displacement::new(100, 0);
        assert_eq!(
            omega_hybrid(far, a(1.0), &cache, &cfg).unwrap(),
            omega_analytic_infinite(far, a(1.0))
        );
        let d = Displacement::new(2, 3);
        let v = omega_hybrid(d, a(10.0), &cache, &cfg).unwrap();
        let exact = omega_exact(d, a(10.0), &cfg.quadrature).unwrap();
        assert!((v - exact).abs() < 2e-10);
    }

    #[test]
    fn finite_hybrid_self_pair() {
        let cache = CorrectionCache::new(64);
        let g = GridSpec::with_alpha(4, 4, 1.0).unwrap();
        let r = r_finite_hybrid(NodeCoord::new(1, 2), NodeCoord::new(1, 2), &g, &cache, &HybridConfig::default())
            .unwrap();
        assert_eq!(r.resistance_ohms, 0.0);
        assert_eq!(r.corrections_applied, 0);
    }

    #[test]
    fn finite_hybrid_scales_with_r0() {
        let cache = CorrectionCache::new(1024);
        let cfg = HybridConfig::default();
        let g1 = GridSpec::new(6, 5, 2.0, 1.0).unwrap();
        let g3 = GridSpec::new(6, 5, 6.0, 3.0).unwrap();
        let (s, d) = (NodeCoord::new(0, 1), NodeCoord::new(4, 3));
        let r1 = r_finite_hybrid(s, d, &g1, &cache, &cfg).unwrap().resistance_ohms;
        let r3 = r_finite_hybrid(s, d, &g3, &cache, &cfg).unwrap().resistance_ohms;
        assert!((r3 - 3.0 * r1).abs() < 1e-12 * r3);
    }
}
