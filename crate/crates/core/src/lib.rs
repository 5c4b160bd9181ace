//! Strong-form kernel collocation for second-order elliptic Dirichlet problems.
//!
//! The crate assembles overdetermined Kansa systems from radial kernel
//! translates and solves them either as a constrained least-squares problem
//! (boundary conditions enforced exactly through the null space of the
//! boundary collocation matrix) or as a weighted least-squares problem with
//! the boundary weight `W(θ) = (h_Y/h_X)^{dθ/2} h_Y^{-2θ}`.
//!
//! Module map:
//!
//! * [`special_functions`]: `K_ν` and the Matérn profile `r^ν K_ν(r)`.
//! * [`jet`]: second-order forward-mode jets (value, gradient, Hessian).
//! * [`kernels`]: Matérn–Sobolev, Gaussian and multiquadric kernels.
//! * [`geometry`]: boxes, grids, Halton sets and fill/separation distances.
//! * [`pde`]: elliptic operators and manufactured solutions.
//! * [`assembly`]: PDE and boundary collocation matrices.
//! * [`solvers`]: SVD least squares, null spaces, CLS and WLS(θ).
//! * [`analysis`]: solution evaluation, discrete errors and rate fits.
//! * [`experiment`]: declarative convergence studies and presets.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod jet;
pub mod kernels;
pub mod pde;
pub mod solvers;
pub mod special_functions;

pub use error::{KansaError, Result};
