//! Ground-truth effective resistance from the grid's graph Laplacian.
//!
//! The default solver grounds one corner node and factors the remaining
//! banded Laplacian with a Cholesky decomposition ordered along the short
//! grid side, so the bandwidth is `min(lx, ly)`. Batch maps from one source
//! use the selected inverse (Takahashi recurrence) to read every `G_tt`
//! without forming the full inverse. A Jacobi-preconditioned conjugate
//! gradient covers grids too large for the band, and a dense pseudo-inverse
//! is kept for small cross-checks.

use std::fmt::Write as _;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, NodeCoord};

/// Matrix-free weighted Laplacian of an `lx x ly` four-neighbour lattice.
/// Node `(x, y)` has row-major index `y * lx + x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLaplacian {
    pub lx: usize,
    pub ly: usize,
    pub g_h: f64,
    pub g_v: f64,
}

pub fn build_laplacian(grid: &GridSpec) -> GridLaplacian {
    GridLaplacian {
        lx: grid.lx,
        ly: grid.ly,
        g_h: 1.0 / grid.r_h,
        g_v: 1.0 / grid.r_v,
    }
}

impl GridLaplacian {
    pub fn node_count(&self) -> usize {
        self.lx * self.ly
    }

    pub fn index(&self, n: NodeCoord) -> usize {
        n.y as usize * self.lx + n.x as usize
    }

    pub fn coord(&self, i: usize) -> NodeCoord {
        NodeCoord::new((i % self.lx) as i64, (i / self.lx) as i64)
    }

    /// Off-diagonal neighbours of node `i` with their conductances.
    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = (usize, f64)> {
        let (x, y) = (i % self.lx, i / self.lx);
        let (lx, ly, gh, gv) = (self.lx, self.ly, self.g_h, self.g_v);
        [
            (x > 0).then(|| (i - 1, gh)),
            (x + 1 < lx).then(|| (i + 1, gh)),
            (y > 0).then(|| (i - lx, gv)),
            (y + 1 < ly).then(|| (i + lx, gv)),
        ]
        .into_iter()
        .flatten()
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.neighbours(i).map(|(_, g)| g).sum()
    }

    /// `L v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.node_count())
            .map(|i| self.neighbours(i).map(|(j, g)| g * (v[i] - v[j])).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, g) in self.neighbours(i) {
                m[(i, j)] = -g;
                m[(i, i)] += g;
            }
        }
        m
    }

    fn residual_norm(&self, v: &[f64], rhs: &[f64]) -> f64 {
        self.apply(v)
            .iter()
            .zip(rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// How a resistance was solved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    DensePseudoInverse,
    GroundedDirect,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub resistance_ohms: f64,
    pub method: OracleMethod,
    /// `||L v - b|| / ||b||` of the underlying solve.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Relative residual bound accepted from any solve.
    pub tol: f64,
    /// Force a method instead of the size-based choice.
    pub method: Option<OracleMethod>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { tol: 1e-12, method: None }
    }
}

/// Largest banded factor (in stored doubles) the automatic choice will build.
const MAX_BAND_STORAGE: usize = 1 << 25;
const MAX_DENSE_NODES: usize = 3000;
const REFINEMENT_STEPS: usize = 3;

/// Permutation that puts the short grid side along the band.
#[derive(Debug, Clone, Copy)]
struct BandOrdering {
    lx: usize,
    ly: usize,
    column_major: bool,
}

impl BandOrdering {
    fn new(lx: usize, ly: usize) -> Self {
        Self {
            lx,
            ly,
            column_major: lx > ly,
        }
    }

    fn bandwidth(&self) -> usize {
        self.lx.min(self.ly)
    }

    /// Row-major Laplacian index -> banded index.
    fn to_band(&self, i: usize) -> usize {
        if self.column_major {
            let (x, y) = (i % self.lx, i / self.lx);
            x * self.ly + y
        } else {
            i
        }
    }
}

/// `L L^T` factor of a symmetric positive definite band matrix.
#[derive(Debug, Clone)]
struct BandCholesky {
    n: usize,
    b: usize,
    /// Row `i` holds `L[i][i-b ..= i]`.
    l: Vec<f64>,
}

impl BandCholesky {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * (self.b + 1) + (j + self.b - i)]
    }

    fn factor(n: usize, b: usize, mut a: Vec<f64>) -> Result<Self> {
        let w = b + 1;
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let mut sum = a[i * w + (j + b - i)];
                let klo = lo.max(j.saturating_sub(b));
                for k in klo..j {
                    sum -= a[i * w + (k + b - i)] * a[j * w + (k + b - j)];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::SolverFailure(format!("matrix not positive definite at pivot {i}")));
                    }
                    a[i * w + b] = sum.sqrt();
                } else {
                    a[i * w + (j + b - i)] = sum / a[j * w + b];
                }
            }
        }
        Ok(Self { n, b, l: a })
    }

    fn solve(&self, rhs: &mut [f64]) {
        let (n, b) = (self.n, self.b);
        for i in 0..n {
            let mut s = rhs[i];
            for k in i.saturating_sub(b)..i {
                s -= self.at(i, k) * rhs[k];
            }
            rhs[i] = s / self.at(i, i);
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for k in i + 1..(i + b + 1).min(n) {
                s -= self.at(k, i) * rhs[k];
            }
            rhs[i] = s / self.at(i, i);
        }
    }

    /// Diagonal of the inverse via the Takahashi recurrence
    /// `Z_ij = (delta_ij / L_ii - sum_{k>i} L_ki Z_kj) / L_ii`, evaluated inside the band.
    fn inverse_diagonal(&self) -> Vec<f64> {
        let (n, b) = (self.n, self.b);
        let w = b + 1;
        // z[i * w + (j - i)] = Z_ij for i <= j <= i + b
        let mut z = vec![0.0; n * w];
        let zget = |z: &[f64], i: usize, j: usize| {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            z[i * w + (j - i)]
        };
        for i in (0..n).rev() {
            let lii = self.at(i, i);
            let hi = (i + b).min(n - 1);
            for j in (i..=hi).rev() {
                let mut s = if i == j { 1.0 / lii } else { 0.0 };
                for k in i + 1..=hi {
                    s -= self.at(k, i) * zget(&z, k, j);
                }
                z[i * w + (j - i)] = s / lii;
            }
        }
        (0..n).map(|i| z[i * w]).collect()
    }
}

#[derive(Debug)]
struct Grounded {
    ordering: BandOrdering,
    factor: BandCholesky,
    /// Row-major index of the grounded node.
    ground: usize,
    inverse_diag: OnceLock<Vec<f64>>,
}

impl Grounded {
    fn build(lap: &GridLaplacian) -> Result<Self> {
        let ordering = BandOrdering::new(lap.lx, lap.ly);
        let n = lap.node_count();
        let b = ordering.bandwidth();
        let m = n - 1; // the last banded index is grounded
        let w = b + 1;
        let mut band = vec![0.0; m * w];
        for i in 0..n {
            let bi = ordering.to_band(i);
            if bi == m {
                continue;
            }
            band[bi * w + b] = lap.diagonal(i);
            for (j, g) in lap.neighbours(i) {
                let bj = ordering.to_band(j);
                if bj < bi {
                    band[bi * w + (bj + b - bi)] = -g;
                }
            }
        }
        let ground = (0..n).find(|&i| ordering.to_band(i) == m).expect("ground node exists");
        Ok(Self {
            ordering,
            factor: BandCholesky::factor(m, b, band)?,
            ground,
            inverse_diag: OnceLock::new(),
        })
    }

    /// Solves `L v = rhs` with a few steps of iterative refinement, which
    /// pulls the residual from `eps * ||L|| * ||v||` down to rounding level.
    fn solve_refined(&self, lap: &GridLaplacian, rhs: &[f64], tol: f64) -> Vec<f64> {
        let norm_b = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut v = self.solve(rhs);
        for _ in 0..REFINEMENT_STEPS {
            let r: Vec<f64> = rhs.iter().zip(lap.apply(&v)).map(|(b, lv)| b - lv).collect();
            if r.iter().map(|x| x * x).sum::<f64>().sqrt() <= tol * norm_b {
                break;
            }
            for (vi, di) in v.iter_mut().zip(self.solve(&r)) {
                *vi += di;
            }
        }
        v
    }

    /// Solves `L v = rhs` with `v[ground] = 0`; `rhs` is row-major and sums to zero.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.factor.n;
        let mut work = vec![0.0; m];
        for (i, &r) in rhs.iter().enumerate() {
            let bi = self.ordering.to_band(i);
            if bi < m {
                work[bi] = r;
            }
        }
        self.factor.solve(&mut work);
        (0..rhs.len())
            .map(|i| {
                let bi = self.ordering.to_band(i);
                if bi < m {
                    work[bi]
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// `Z_tt` in row-major order, zero at the ground.
    fn diagonal(&self, n: usize) -> Vec<f64> {
        let diag = self.inverse_diag.get_or_init(|| self.factor.inverse_diagonal());
        (0..n)
            .map(|i| {
                let bi = self.ordering.to_band(i);
                if bi < self.factor.n {
                    diag[bi]
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Jacobi-preconditioned conjugate gradient for the consistent singular system `L v = b`.
fn pcg(lap: &GridLaplacian, rhs: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64)> {
    let n = rhs.len();
    let inv_diag: Vec<f64> = (0..n).map(|i| 1.0 / lap.diagonal(i)).collect();
    let norm_b = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..max_iter {
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol * norm_b {
            // Recompute from scratch: the recursive residual drifts.
            let true_res = lap.residual_norm(&x, rhs) / norm_b;
            if true_res <= tol * 10.0 {
                return Ok((x, true_res));
            }
            r = rhs.iter().zip(lap.apply(&x)).map(|(b, ax)| b - ax).collect();
        }
        let ap = lap.apply(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        z = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = lap.residual_norm(&x, rhs) / norm_b;
    Err(Error::SolverFailure(format!(
        "conjugate gradient stalled at relative residual {res:e}"
    )))
}

/// Effective resistances from one source to every node.
#[derive(Debug, Clone, PartialEq)]
pub struct ResistanceMap {
    pub lx: usize,
    pub ly: usize,
    pub source: NodeCoord,
    /// Row-major values in ohms.
    pub values: Vec<f64>,
    pub residual_norm: f64,
}

impl ResistanceMap {
    pub fn get(&self, n: NodeCoord) -> f64 {
        self.values[n.y as usize * self.lx + n.x as usize]
    }
}

/// Laplacian solver bound to one grid. The factorization is built on first
/// use and shared by every later query.
#[derive(Debug)]
pub struct Oracle {
    grid: GridSpec,
    lap: GridLaplacian,
    cfg: OracleConfig,
    method: OracleMethod,
    grounded: OnceLock<Result<Grounded>>,
    dense: OnceLock<DMatrix<f64>>,
}

impl Oracle {
    pub fn new(grid: &GridSpec, cfg: OracleConfig) -> Self {
        let lap = build_laplacian(grid);
        let band_storage = lap.node_count() * (grid.lx.min(grid.ly) + 1);
        let method = cfg.method.unwrap_or(if band_storage <= MAX_BAND_STORAGE {
            OracleMethod::GroundedDirect
        } else {
            OracleMethod::Iterative
        });
        Self {
            grid: *grid,
            lap,
            cfg,
            method,
            grounded: OnceLock::new(),
            dense: OnceLock::new(),
        }
    }

    pub fn method(&self) -> OracleMethod {
        self.method
    }

    pub fn laplacian(&self) -> &GridLaplacian {
        &self.lap
    }

    fn grounded(&self) -> Result<&Grounded> {
        self.grounded
            .get_or_init(|| Grounded::build(&self.lap))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn pseudo_inverse(&self) -> Result<&DMatrix<f64>> {
        let n = self.lap.node_count();
        if n > MAX_DENSE_NODES {
            return Err(Error::SolverFailure(format!(
                "dense pseudo-inverse limited to {MAX_DENSE_NODES} nodes, grid has {n}"
            )));
        }
        if let Some(m) = self.dense.get() {
            return Ok(m);
        }
        // L+ = (L + J/n)^{-1} - J/n for a connected graph.
        let shift = 1.0 / n as f64;
        let shifted = self.lap.to_dense().add_scalar(shift);
        let chol = shifted
            .cholesky()
            .ok_or_else(|| Error::SolverFailure("shifted Laplacian not positive definite".into()))?;
        let inv = chol.inverse().add_scalar(-shift);
        Ok(self.dense.get_or_init(|| inv))
    }

    fn dipole(&self, s: NodeCoord, d: NodeCoord) -> Vec<f64> {
        let mut b = vec![0.0; self.lap.node_count()];
        b[self.lap.index(s)] += 1.0;
        b[self.lap.index(d)] -= 1.0;
        b
    }

    fn check_residual(&self, v: &[f64], rhs: &[f64]) -> Result<f64> {
        let norm_b = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
        let res = self.lap.residual_norm(v, rhs) / norm_b;
        if res <= self.cfg.tol {
            Ok(res)
        } else {
            Err(Error::SolverFailure(format!(
                "residual {res:e} exceeds tolerance {:e}",
                self.cfg.tol
            )))
        }
    }

    /// Resistance between two nodes.
    pub fn resistance(&self, s: NodeCoord, d: NodeCoord) -> Result<OracleSolution> {
        self.grid.check(s)?;
        self.grid.check(d)?;
        if s == d {
            return Ok(OracleSolution {
                resistance_ohms: 0.0,
                method: self.method,
                residual_norm: 0.0,
            });
        }
        let (is, id) = (self.lap.index(s), self.lap.index(d));
        match self.method {
            OracleMethod::DensePseudoInverse => {
                let g = self.pseudo_inverse()?;
                let v: Vec<f64> = (0..self.lap.node_count()).map(|i| g[(i, is)] - g[(i, id)]).collect();
                let residual_norm = self.check_residual(&v, &self.dipole(s, d))?;
                Ok(OracleSolution {
                    resistance_ohms: g[(is, is)] + g[(id, id)] - 2.0 * g[(is, id)],
                    method: self.method,
                    residual_norm,
                })
            }
            OracleMethod::GroundedDirect => {
                let rhs = self.dipole(s, d);
                let v = self.grounded()?.solve_refined(&self.lap, &rhs, self.cfg.tol);
                let residual_norm = self.check_residual(&v, &rhs)?;
                Ok(OracleSolution {
                    resistance_ohms: v[is] - v[id],
                    method: self.method,
                    residual_norm,
                })
            }
            OracleMethod::Iterative => {
                let rhs = self.dipole(s, d);
                let (v, residual_norm) = pcg(&self.lap, &rhs, self.cfg.tol, 20 * self.lap.node_count())?;
                Ok(OracleSolution {
                    resistance_ohms: v[is] - v[id],
                    method: self.method,
                    residual_norm,
                })
            }
        }
    }

    /// `R(s, t) = G_ss + G_tt - 2 G_st` for every node `t`, from one factorization.
    pub fn all_from(&self, s: NodeCoord) -> Result<ResistanceMap> {
        self.grid.check(s)?;
        let n = self.lap.node_count();
        let is = self.lap.index(s);
        let (values, residual_norm) = match self.method {
            OracleMethod::DensePseudoInverse => {
                let g = self.pseudo_inverse()?;
                let vals = (0..n).map(|t| g[(is, is)] + g[(t, t)] - 2.0 * g[(is, t)]).collect();
                (vals, 0.0)
            }
            OracleMethod::GroundedDirect => {
                let grounded = self.grounded()?;
                let diag = grounded.diagonal(n);
                // Column s of the grounded inverse.
                let mut rhs = vec![0.0; n];
                rhs[is] += 1.0;
                rhs[grounded.ground] -= 1.0;
                let col = grounded.solve_refined(&self.lap, &rhs, self.cfg.tol);
                let residual_norm = if is == grounded.ground {
                    0.0
                } else {
                    self.check_residual(&col, &rhs)?
                };
                let vals = (0..n)
                    .map(|t| if t == is { 0.0 } else { diag[is] + diag[t] - 2.0 * col[t] })
                    .collect();
                (vals, residual_norm)
            }
            OracleMethod::Iterative => {
                let mut worst: f64 = 0.0;
                let mut vals = vec![0.0; n];
                for (t, slot) in vals.iter_mut().enumerate() {
                    if t != is {
                        let sol = self.resistance(s, self.lap.coord(t))?;
                        worst = worst.max(sol.residual_norm);
                        *slot = sol.resistance_ohms;
                    }
                }
                (vals, worst)
            }
        };
        Ok(ResistanceMap {
            lx: self.grid.lx,
            ly: self.grid.ly,
            source: s,
            values,
            residual_norm,
        })
    }
}

/// Pairwise oracle resistance in ohms.
pub fn r_oracle(s: NodeCoord, d: NodeCoord, grid: &GridSpec, tol: f64) -> Result<f64> {
    let oracle = Oracle::new(grid, OracleConfig { tol, method: None });
    oracle.resistance(s, d).map(|sol| sol.resistance_ohms)
}

/// Batch oracle resistances from `s`.
pub fn all_resistances_from(s: NodeCoord, grid: &GridSpec) -> Result<ResistanceMap> {
    Oracle::new(grid, OracleConfig::default()).all_from(s)
}

/// Twelve significant digits, shortest form, lowercase exponent.
fn spice_number(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    format!("{rounded:?}")
}

fn net(x: usize, y: usize) -> String {
    format!("n_{x}_{y}")
}

/// SPICE netlist measuring the resistance between `s` and `d`: a 1 A source
/// drives current from `d` into `s`, `d` is tied to ground and `V(s)` is printed.
pub fn emit_netlist(grid: &GridSpec, s: NodeCoord, d: NodeCoord) -> Result<String> {
    grid.check(s)?;
    grid.check(d)?;
    if s == d {
        return Err(Error::InvalidNode {
            x: d.x,
            y: d.y,
            lx: grid.lx,
            ly: grid.ly,
        });
    }
    let (rh, rv) = (spice_number(grid.r_h), spice_number(grid.r_v));
    let (sx, sy) = (s.x as usize, s.y as usize);
    let (dx, dy) = (d.x as usize, d.y as usize);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "* {}x{} resistor grid, r_h={rh} r_v={rv}, source {} sink {}",
        grid.lx,
        grid.ly,
        net(sx, sy),
        net(dx, dy)
    );
    for y in 0..grid.ly {
        for x in 0..grid.lx {
            if x + 1 < grid.lx {
                let _ = writeln!(out, "RH_{x}_{y} {} {} {rh}", net(x, y), net(x + 1, y));
            }
            if y + 1 < grid.ly {
                let _ = writeln!(out, "RV_{x}_{y} {} {} {rv}", net(x, y), net(x, y + 1));
            }
        }
    }
    let _ = writeln!(out, "I1 {} {} DC 1", net(dx, dy), net(sx, sy));
    let _ = writeln!(out, "VGND {} 0 DC 0", net(dx, dy));
    let _ = writeln!(out, ".OP");
    let _ = writeln!(out, ".PRINT DC V({})", net(sx, sy));
    let _ = writeln!(out, ".END");
    Ok(out)
}
