//! Method dispatch and error maps against the Laplacian oracle.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correction::{r_finite_hybrid, CacheStats, CorrectionCache, HybridConfig, Method, ResistanceResult};
use crate::error::{Error, Result};
use crate::finite_grid::r_theta_closed;
use crate::grid::{GridSpec, NodeCoord};
use crate::kernel::{omega_analytic_infinite, omega_exact};
use crate::oracle::{Oracle, OracleConfig};

/// Resistance between `s` and `d` by the requested method. The infinite-grid
/// methods ignore the boundary but still require in-bounds nodes.
pub fn evaluate(
    method: Method,
    s: NodeCoord,
    d: NodeCoord,
    grid: &GridSpec,
    cache: &CorrectionCache,
    cfg: &HybridConfig,
) -> Result<ResistanceResult> {
    grid.check(s)?;
    grid.check(d)?;
    let plain = |resistance_ohms: f64| ResistanceResult {
        resistance_ohms,
        method,
        corrections_applied: 0,
        cache: None,
    };
    let disp = d.displacement_from(s);
    match method {
        Method::Hybrid => r_finite_hybrid(s, d, grid, cache, cfg),
        Method::Theta => r_theta_closed(s, d, grid).map(plain),
        Method::Oracle => Oracle::new(grid, OracleConfig::default())
            .resistance(s, d)
            .map(|sol| plain(sol.resistance_ohms)),
        Method::AnalyticInfinite => Ok(plain(grid.r0() * omega_analytic_infinite(disp, grid.alpha()))),
        Method::ExactInfinite => omega_exact(disp, grid.alpha(), &cfg.quadrature).map(|v| plain(grid.r0() * v)),
    }
}

/// One target node of an error map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeError {
    pub x: i64,
    pub y: i64,
    pub r_method: f64,
    pub r_oracle: f64,
    /// `|r_method - r_oracle| / r_oracle` as a ratio.
    pub rel_error: f64,
}

impl NodeError {
    pub fn node(&self) -> NodeCoord {
        NodeCoord::new(self.x, self.y)
    }
}

/// Relative error of a method against the oracle at every node except the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMapReport {
    pub grid: GridSpec,
    pub source: NodeCoord,
    pub method: Method,
    pub per_node: Vec<NodeError>,
    pub mean_rel_error: f64,
    pub max_rel_error: f64,
    pub max_error_node: NodeCoord,
    /// Largest error on the row and column through the source.
    pub max_on_axis_rel_error: f64,
    pub max_off_axis_rel_error: f64,
    pub cache: Option<CacheStats>,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub mean: f64,
    pub max: f64,
    pub max_node: NodeCoord,
    pub max_on_axis: f64,
    pub max_off_axis: f64,
}

/// Summary statistics over `per_node`, relative to the source's axes.
pub fn aggregate(per_node: &[NodeError], source: NodeCoord) -> Aggregates {
    let mut agg = Aggregates {
        mean: 0.0,
        max: 0.0,
        max_node: source,
        max_on_axis: 0.0,
        max_off_axis: 0.0,
    };
    for e in per_node {
        agg.mean += e.rel_error;
        if e.rel_error > agg.max {
            agg.max = e.rel_error;
            agg.max_node = e.node();
        }
        if e.x == source.x || e.y == source.y {
            agg.max_on_axis = agg.max_on_axis.max(e.rel_error);
        } else {
            agg.max_off_axis = agg.max_off_axis.max(e.rel_error);
        }
    }
    if !per_node.is_empty() {
        agg.mean /= per_node.len() as f64;
    }
    agg
}

/// Evaluates `method` from `source` to every other node and compares with the
/// batch oracle. Targets are evaluated in parallel; the output is row-major.
pub fn error_map(
    grid: &GridSpec,
    source: NodeCoord,
    method: Method,
    cache: &CorrectionCache,
    cfg: &HybridConfig,
) -> Result<ErrorMapReport> {
    if !matches!(method, Method::Theta | Method::Hybrid) {
        return Err(Error::Domain(format!("error maps support theta and hybrid, not {method}")));
    }
    grid.check(source)?;
    let start = Instant::now();
    let oracle = Oracle::new(grid, OracleConfig::default()).all_from(source)?;
    let targets: Vec<NodeCoord> = grid.nodes().filter(|&n| n != source).collect();
    let per_node = targets
        .par_iter()
        .map(|&t| {
            let r_method = evaluate(method, source, t, grid, cache, cfg)?.resistance_ohms;
            let r_oracle = oracle.get(t);
            Ok(NodeError {
                x: t.x,
                y: t.y,
                r_method,
                r_oracle,
                rel_error: (r_method - r_oracle).abs() / r_oracle,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let agg = aggregate(&per_node, source);
    Ok(ErrorMapReport {
        grid: *grid,
        source,
        method,
        per_node,
        mean_rel_error: agg.mean,
        max_rel_error: agg.max,
        max_error_node: agg.max_node,
        max_on_axis_rel_error: agg.max_on_axis,
        max_off_axis_rel_error: agg.max_off_axis,
        cache: (method == Method::Hybrid).then(|| cache.stats()),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
