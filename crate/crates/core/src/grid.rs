use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Anisotropy, Displacement};

/// A rectangular `lx x ly` resistor grid with insulating boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lx: usize,
    pub ly: usize,
    /// Horizontal unit resistance in ohms.
    pub r_h: f64,
    /// Vertical unit resistance in ohms.
    pub r_v: f64,
}

impl GridSpec {
    /// Validated constructor. Degenerate strips (`lx == 1` or `ly == 1`) are
    /// allowed as long as the grid has at least two nodes.
    pub fn new(lx: usize, ly: usize, r_h: f64, r_v: f64) -> Result<Self> {
        if lx == 0 || ly == 0 || lx * ly < 2 {
            return Err(Error::InvalidGrid(format!(
                "grid must have at least two nodes, got {lx}x{ly}"
            )));
        }
        for (name, r) in [("r_h", r_h), ("r_v", r_v)] {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidGrid(format!("{name} must be positive and finite, got {r}")));
            }
        }
        Ok(Self { lx, ly, r_h, r_v })
    }

    /// Grid parameterized by anisotropy alone, with `r_v = 1`.
    pub fn with_alpha(lx: usize, ly: usize, alpha: f64) -> Result<Self> {
        Self::new(lx, ly, alpha, 1.0)
    }

    pub fn alpha(&self) -> Anisotropy {
        Anisotropy::new(self.r_h / self.r_v).expect("validated resistances")
    }

    /// Reference resistance `r0 = r_v`.
    pub fn r0(&self) -> f64 {
        self.r_v
    }

    pub fn node_count(&self) -> usize {
        self.lx * self.ly
    }

    pub fn edge_count(&self) -> usize {
        (self.lx - 1) * self.ly + self.lx * (self.ly - 1)
    }

    /// The same physical grid with the axes exchanged.
    pub fn transposed(&self) -> Self {
        Self {
            lx: self.ly,
            ly: self.lx,
            r_h: self.r_v,
            r_v: self.r_h,
        }
    }

    pub fn contains(&self, n: NodeCoord) -> bool {
        n.x >= 0 && n.y >= 0 && (n.x as usize) < self.lx && (n.y as usize) < self.ly
    }

    pub fn check(&self, n: NodeCoord) -> Result<()> {
        if self.contains(n) {
            Ok(())
        } else {
            Err(Error::InvalidNode {
                x: n.x,
                y: n.y,
                lx: self.lx,
                ly: self.ly,
            })
        }
    }

    /// Nodes in row-major order (`y` outer, `x` inner).
    pub fn nodes(&self) -> impl Iterator<Item = NodeCoord> + '_ {
        (0..self.ly).flat_map(move |y| (0..self.lx).map(move |x| NodeCoord::new(x as i64, y as i64)))
    }
}

/// Integer lattice coordinate. Mirror images may be negative, so the
/// fields are signed; [`GridSpec::check`] validates physical nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeCoord {
    pub x: i64,
    pub y: i64,
}

impl NodeCoord {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn transposed(self) -> Self {
        Self::new(self.y, self.x)
    }

    /// `self - other`.
    pub fn displacement_from(self, other: NodeCoord) -> Displacement {
        Displacement::new(self.x - other.x, self.y - other.y)
    }
}

impl std::fmt::Display for NodeCoord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}
