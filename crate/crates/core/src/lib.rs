//! Solvers for time-harmonic scattering in a locally perturbed periodic
//! closed 2D waveguide Ω = ℝ×(0,1).
//!
//! The physical solution of Δu + k²(n+q)u = f is defined by the limiting
//! absorption principle (LAP): the ε→0⁺ limit of the uniquely solvable
//! damped problems with k²+iε. Two independent high-order methods compute
//! it directly:
//!
//! * the complex-contour-integral (CCI) method, which evaluates the inverse
//!   Floquet-Bloch transform along a contour indented around the
//!   quasimomenta where the periodic cell operator is singular, and
//! * the decomposition method, which splits u into an exponentially
//!   decaying part plus cutoff-weighted outgoing propagating modes and
//!   solves on a line shifted into the upper half plane.
//!
//! Both discretize the unit cell with periodic piecewise-linear finite
//! elements and the quasimomentum variable with trigonometric interpolation
//! on a smoothly reparameterized contour, giving O(h²) accuracy in the mesh
//! size and super-algebraic accuracy in the number of contour nodes.
//!
//! A brute-force damped-truncation oracle and closed-form constant
//! coefficient mode formulas provide independent ground truth.

pub mod cci;
pub mod coeffs;
pub mod contour;
pub mod decomp;
pub mod error;
pub mod field;
pub mod linalg;
pub mod mesh;
pub mod oracle;
pub mod pencil;
pub mod report;
pub mod spectral;

pub use error::Error;

/// Complex scalar used throughout (identical to `num_complex::Complex64`).
pub use faer::c64;

/// Convenience result alias.
pub type Result<T> = std::result::Result<T, Error>;
