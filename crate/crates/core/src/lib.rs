//! Two-point effective resistance of infinite and finite anisotropic 2D
//! resistor grids.
//!
//! The engine combines three layers:
//!
//! * [`kernel`]: the infinite-grid lattice Green's function `Omega(dx, dy; alpha)`
//!   by adaptive quadrature, its closed-form singular part and the far-field
//!   logarithmic asymptote;
//! * [`finite_grid`]: a closed form for finite grids with insulating
//!   boundaries, built from Jacobi theta functions ([`theta`]) over the
//!   lattice of mirror images;
//! * [`correction`]: exact-minus-asymptotic corrections for every image
//!   inside an anisotropy-scaled near-field ellipse, memoized in an LRU cache.
//!
//! [`oracle`] solves the graph Laplacian directly and serves as ground truth.

pub mod bench;
pub mod correction;
pub mod error;
pub mod finite_grid;
pub mod grid;
pub mod kernel;
pub mod oracle;
pub mod quadrature;
pub mod report;
pub mod selftest;
pub mod theta;

pub use correction::{
    cache_stats, delta_omega, near_field_limit, omega_hybrid, r_finite_hybrid, within_near_field, CacheStats,
    CorrectionCache, CorrectionKey, HybridConfig, Method, ResistanceResult,
};
pub use error::{Error, Result};
pub use finite_grid::{image_displacements_in_ellipse, mirror_images, r_theta_closed, theta_context, MirrorFamily};
pub use grid::{GridSpec, NodeCoord};
pub use kernel::{
    dispersion_lambda, omega_analytic_infinite, omega_exact, r1_quadrature, r2_closed, r2_quadrature, sinh_lambda,
    Anisotropy, Displacement, EULER_GAMMA,
};
pub use oracle::{all_resistances_from, build_laplacian, emit_netlist, r_oracle, Oracle, OracleConfig, OracleMethod};
pub use quadrature::QuadratureConfig;
pub use theta::ThetaContext;
