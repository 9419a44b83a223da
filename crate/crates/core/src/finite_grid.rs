//! Closed-form effective resistance of a finite grid.
//!
//! An insulating boundary is equivalent to an infinite lattice of mirror
//! images reflected about the half-integer lines `x = -1/2`, `x = lx - 1/2`
//! (and likewise in `y`). Summing the logarithmic kernel over that image
//! lattice collapses into products of `theta1` with lattice modulus
//! `tau = i ly / (sqrt(alpha) lx)`:
//!
//! ```text
//! R = r0 sqrt(alpha)/(2 pi) ln| C prod_{s'=1..4} th(u(z_d - z_{s,s'})) th(u(z_s - z_{d,s'}))
//!                         / (th'(0)^2 prod_{s'=2..4} th(u(z_s - z_{s,s'})) th(u(z_d - z_{d,s'}))) |
//! ```
//!
//! with `z = x + i y / sqrt(alpha)`, `u(z) = pi z / (2 lx)` and
//! `ln C = ln alpha + 2 ln(2 lx / pi) + 2 gamma + ln 16 - ln(alpha + 1)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, NodeCoord};
use crate::kernel::{Anisotropy, Displacement, EULER_GAMMA};
use crate::theta::{ln_abs_theta1, ln_abs_theta1_prime_zero, ThetaContext};

/// Nome magnitude above which the modular transformation is applied.
pub const SWAP_NOME_THRESHOLD: f64 = 0.9;

/// Smallest admissible denominator factor magnitude.
const DEGENERATE_LN: f64 = -690.775_527_898_213_7; // ln(1e-300)

/// The four base reflections of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MirrorFamily {
    pub images: [NodeCoord; 4],
}

impl MirrorFamily {
    /// Image with family index `s'` in `1..=4`.
    pub fn image(&self, family: u8) -> NodeCoord {
        self.images[usize::from(family - 1)]
    }
}

/// `[(x, y), (-x-1, y), (x, -y-1), (-x-1, -y-1)]`.
pub fn mirror_images(n: NodeCoord) -> MirrorFamily {
    let (x, y) = (n.x, n.y);
    MirrorFamily {
        images: [
            NodeCoord::new(x, y),
            NodeCoord::new(-x - 1, y),
            NodeCoord::new(x, -y - 1),
            NodeCoord::new(-x - 1, -y - 1),
        ],
    }
}

/// Complex coordinate `z = x + i y / sqrt(alpha)` in which the lattice metric is isotropic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicPoint {
    pub z: Complex64,
}

impl IsotropicPoint {
    pub fn from_node(n: NodeCoord, alpha: Anisotropy) -> Self {
        Self {
            z: Complex64::new(n.x as f64, n.y as f64 / alpha.sqrt()),
        }
    }
}

/// Whether [`theta_context`] may apply the modular transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwapPolicy {
    /// Swap when the raw nome exceeds [`SWAP_NOME_THRESHOLD`].
    #[default]
    Auto,
    /// Always evaluate in the given orientation.
    Never,
}

fn raw_tau(grid: &GridSpec) -> Complex64 {
    Complex64::new(0.0, grid.ly as f64 / (grid.alpha().sqrt() * grid.lx as f64))
}

/// Lattice modulus and nome for a grid, after the swap rule.
///
/// A swapped context describes the transposed grid (`lx <-> ly`, `alpha -> 1/alpha`),
/// whose modulus is `-1/tau`.
pub fn theta_context(grid: &GridSpec) -> ThetaContext {
    theta_context_with(grid, SwapPolicy::Auto)
}

pub fn theta_context_with(grid: &GridSpec, policy: SwapPolicy) -> ThetaContext {
    let tau = raw_tau(grid);
    let raw = ThetaContext::from_tau(tau, false).expect("tau is on the positive imaginary axis");
    if policy == SwapPolicy::Auto && raw.nome.norm() > SWAP_NOME_THRESHOLD {
        ThetaContext::from_tau(-1.0 / tau, true).expect("-1/tau stays in the upper half-plane")
    } else {
        raw
    }
}

/// Closed-form finite-grid resistance in ohms between `s` and `d`.
pub fn r_theta_closed(s: NodeCoord, d: NodeCoord, grid: &GridSpec) -> Result<f64> {
    r_theta_closed_with(s, d, grid, SwapPolicy::Auto)
}

pub fn r_theta_closed_with(s: NodeCoord, d: NodeCoord, grid: &GridSpec, policy: SwapPolicy) -> Result<f64> {
    grid.check(s)?;
    grid.check(d)?;
    if s == d {
        return Ok(0.0);
    }
    let ctx = theta_context_with(grid, policy);
    let (grid, s, d) = if ctx.swapped {
        (grid.transposed(), s.transposed(), d.transposed())
    } else {
        (*grid, s, d)
    };
    let alpha = grid.alpha();
    let ln_ratio = ln_theta_ratio(s, d, grid.lx, alpha, ctx.tau)?;
    Ok(grid.r0() * alpha.sqrt() / (2.0 * PI) * ln_ratio)
}

/// `ln|C N / D|` for one orientation.
fn ln_theta_ratio(s: NodeCoord, d: NodeCoord, lx: usize, alpha: Anisotropy, tau: Complex64) -> Result<f64> {
    let a = alpha.value();
    let lx = lx as f64;
    let ln_c = a.ln() + 2.0 * (2.0 * lx / PI).ln() + 2.0 * EULER_GAMMA + 16f64.ln() - (a + 1.0).ln();

    let u = |from: NodeCoord, to: NodeCoord| {
        let dz = IsotropicPoint::from_node(from, alpha).z - IsotropicPoint::from_node(to, alpha).z;
        dz * (PI / (2.0 * lx))
    };
    let images_s = mirror_images(s);
    let images_d = mirror_images(d);

    let mut numer = 0.0;
    for k in 0..4 {
        numer += ln_abs_theta1(u(d, images_s.images[k]), tau)?;
        numer += ln_abs_theta1(u(s, images_d.images[k]), tau)?;
    }
    let mut denom = 2.0 * ln_abs_theta1_prime_zero(tau)?;
    for k in 1..4 {
        for v in [
            ln_abs_theta1(u(s, images_s.images[k]), tau)?,
            ln_abs_theta1(u(d, images_d.images[k]), tau)?,
        ] {
            if v < DEGENERATE_LN {
                return Err(Error::DegenerateTheta(v));
            }
            denom += v;
        }
    }
    Ok(ln_c + numer - denom)
}

/// One translated mirror image of `b` as seen from `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageDisplacement {
    pub m: i64,
    pub n: i64,
    /// Reflection family `s'` in `1..=4`.
    pub family: u8,
    /// `a - b_{m,n,s'}`.
    pub displacement: Displacement,
}

/// All displacements `a - b_{m,n,s'}` with `alpha dx^2 + dy^2 <= limit`, where
/// `b_{m,n,s'}` is mirror image `s'` of `b` translated by `(2 m lx, 2 n ly)`.
/// Ordered lexicographically by `(m, n, s')`.
pub fn image_displacements_in_ellipse(
    a: NodeCoord,
    b: NodeCoord,
    grid: &GridSpec,
    limit: f64,
) -> Vec<ImageDisplacement> {
    let alpha = grid.alpha();
    if !(limit >= 0.0) {
        return Vec::new();
    }
    let (px, py) = (2 * grid.lx as i64, 2 * grid.ly as i64);
    let reach_x = (limit / alpha.value()).sqrt();
    let reach_y = limit.sqrt();
    let family = mirror_images(b);

    // Integer range of k with |base - k * period| <= reach.
    let range = |base: i64, period: i64, reach: f64| {
        let lo = ((base as f64 - reach) / period as f64).ceil() as i64;
        let hi = ((base as f64 + reach) / period as f64).floor() as i64;
        lo..=hi
    };

    let mut out = Vec::new();
    for (idx, img) in family.images.iter().enumerate() {
        let bx = a.x - img.x;
        let by = a.y - img.y;
        for m in range(bx, px, reach_x) {
            for n in range(by, py, reach_y) {
                let disp = Displacement::new(bx - m * px, by - n * py);
                if disp.metric(alpha) <= limit {
                    out.push(ImageDisplacement {
                        m,
                        n,
                        family: idx as u8 + 1,
                        displacement: disp,
                    });
                }
            }
        }
    }
    out.sort_by_key(|i| (i.m, i.n, i.family));
    out
}
