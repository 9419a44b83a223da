//! Random-pair hybrid queries for measuring latency and cache reuse.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::correction::{r_finite_hybrid, CacheStats, CorrectionCache, HybridConfig};
use crate::error::Result;
use crate::grid::{GridSpec, NodeCoord};

/// One query of a bench run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchQuery {
    pub source: NodeCoord,
    pub target: NodeCoord,
    pub resistance_ohms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub grid: GridSpec,
    pub queries: usize,
    pub seed: u64,
    pub total_ms: f64,
    pub mean_ms: f64,
    pub p99_ms: f64,
    pub cache: CacheStats,
    /// Hit rate over the queries after the first tenth.
    pub warm_hit_rate: f64,
    /// Distinct near-field integrations performed (cache misses).
    pub unique_integrations: u64,
    #[serde(skip)]
    pub results: Vec<BenchQuery>,
}

/// Deterministic sequence of distinct random node pairs.
pub fn random_pairs(grid: &GridSpec, count: usize, seed: u64) -> Vec<(NodeCoord, NodeCoord)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node = |rng: &mut ChaCha8Rng| {
        NodeCoord::new(rng.gen_range(0..grid.lx) as i64, rng.gen_range(0..grid.ly) as i64)
    };
    (0..count)
        .map(|_| {
            let s = node(&mut rng);
            let mut d = node(&mut rng);
            while d == s {
                d = node(&mut rng);
            }
            (s, d)
        })
        .collect()
}

/// Runs `queries` hybrid evaluations on a fresh cache, one at a time so each
/// latency is measured in isolation.
pub fn run_bench(grid: &GridSpec, queries: usize, seed: u64, cfg: &HybridConfig) -> Result<BenchReport> {
    let cache = CorrectionCache::new(cfg.cache_capacity);
    let pairs = random_pairs(grid, queries, seed);
    let warmup = queries / 10;
    let mut latencies = Vec::with_capacity(queries);
    let mut results = Vec::with_capacity(queries);
    let mut at_warmup = cache.stats();
    let start = Instant::now();
    for (i, &(s, d)) in pairs.iter().enumerate() {
        if i == warmup {
            at_warmup = cache.stats();
        }
        let t = Instant::now();
        let r = r_finite_hybrid(s, d, grid, &cache, cfg)?;
        latencies.push(t.elapsed().as_secs_f64() * 1e3);
        results.push(BenchQuery {
            source: s,
            target: d,
            resistance_ohms: r.resistance_ohms,
        });
    }
    let total_ms = start.elapsed().as_secs_f64() * 1e3;
    let stats = cache.stats();
    let warm_hits = stats.hits - at_warmup.hits;
    let warm_total = warm_hits + stats.misses - at_warmup.misses;
    latencies.sort_by(f64::total_cmp);
    let p99_ms = if latencies.is_empty() {
        0.0
    } else {
        latencies[((latencies.len() as f64 * 0.99).ceil() as usize).clamp(1, latencies.len()) - 1]
    };
    Ok(BenchReport {
        grid: *grid,
        queries,
        seed,
        total_ms,
        mean_ms: if queries == 0 { 0.0 } else { latencies.iter().sum::<f64>() / queries as f64 },
        p99_ms,
        cache: stats,
        warm_hit_rate: if warm_total == 0 { 0.0 } else { warm_hits as f64 / warm_total as f64 },
        unique_integrations: stats.misses,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_queries() {
        let grid = GridSpec::with_alpha(10, 10, 2.0).unwrap();
        let rep = run_bench(&grid, 0, 7, &HybridConfig::default()).unwrap();
        assert_eq!(rep.queries, 0);
        assert_eq!(rep.cache.hit_rate, 0.0);
        assert_eq!(rep.p99_ms, 0.0);
        assert!(rep.results.is_empty());
    }

    #[test]
    fn deterministic_under_seed() {
        let grid = GridSpec::with_alpha(12, 9, 4.0).unwrap();
        let cfg = HybridConfig::default();
        let a = run_bench(&grid, 40, 11, &cfg).unwrap();
        let b = run_bench(&grid, 40, 11, &cfg).unwrap();
        let bits = |r: &BenchReport| r.results.iter().map(|q| q.resistance_ohms.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert!(a.results.iter().all(|q| q.source != q.target && grid.contains(q.source) && grid.contains(q.target)));
        let c = run_bench(&grid, 40, 12, &cfg).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }
}
