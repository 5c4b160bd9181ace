//! Least-squares solvers for collocation systems.
//!
//! * [`svd_lstsq`]: minimum-norm least squares with a relative singular-value cutoff.
//! * [`solve_cls`]: boundary conditions enforced exactly on the null space of `K_B`.
//! * [`solve_wls`]: boundary residual weighted by `W(θ) = (h_Y/h_X)^{dθ/2} h_Y^{-2θ}`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use faer::{ColRef, Mat, MatRef};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::assembly::CollocationSystem;
use crate::error::{KansaError, Result};
use crate::geometry::PointSet;
use crate::kernels::Kernel;

/// Default relative cutoff `max(m, n)·ε` for an `m × n` matrix.
pub fn default_rcond(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstsqResult {
    pub solution: Vec<f64>,
    /// Number of singular values above `rcond·σ_max`.
    pub rank: usize,
    /// All singular values, nonincreasing.
    pub singular_values: Vec<f64>,
}

impl LstsqResult {
    /// `σ_max / σ_r` over the singular values kept in the solve.
    pub fn condition(&self) -> f64 {
        if self.rank == 0 {
            return f64::INFINITY;
        }
        self.singular_values[0] / self.singular_values[self.rank - 1]
    }
}

fn check_finite(label: &str, a: MatRef<'_, f64>, b: Option<&[f64]>) -> Result<()> {
    let mut ok = true;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            ok &= a[(i, j)].is_finite();
        }
    }
    if let Some(b) = b {
        ok &= b.iter().all(|v| v.is_finite());
    }
    if ok {
        Ok(())
    } else {
        Err(KansaError::Numeric(format!("{label} contains non-finite entries")))
    }
}

pub(crate) fn rank_of(sv: &[f64], rcond: f64) -> usize {
    match sv.first() {
        Some(&top) if top > 0.0 => sv.iter().take_while(|&&s| s > rcond * top).count(),
        _ => 0,
    }
}

fn svd_failed(e: faer::linalg::svd::SvdError) -> KansaError {
    KansaError::Numeric(format!("SVD did not converge: {e:?}"))
}

/// Singular values of `a`, nonincreasing.
pub fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    check_finite("matrix", a, None)?;
    a.singular_values().map_err(svd_failed)
}

/// Minimum-norm least-squares solution of `A x ≈ b` by truncated SVD;
/// singular values `σ ≤ rcond·σ_max` are treated as zero.
pub fn svd_lstsq(a: MatRef<'_, f64>, b: &[f64], rcond: Option<f64>) -> Result<LstsqResult> {
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return Err(KansaError::Numeric(format!("empty least-squares matrix {m}×{n}")));
    }
    if b.len() != m {
        return Err(KansaError::Solver(format!(
            "right-hand side has length {}, expected {m}",
            b.len()
        )));
    }
    check_finite("least-squares system", a, Some(b))?;
    let rcond = rcond.unwrap_or_else(|| default_rcond(m, n));
    let svd = a.thin_svd().map_err(svd_failed)?;
    let sv: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let rank = rank_of(&sv, rcond);
    let u = svd.U();
    let v = svd.V();
    let mut x = vec![0.0; n];
    for k in 0..rank {
        let coef = (0..m).map(|i| u[(i, k)] * b[i]).sum::<f64>() / sv[k];
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += coef * v[(j, k)];
        }
    }
    Ok(LstsqResult {
        solution: x,
        rank,
        singular_values: sv,
    })
}

/// Orthonormal basis of `ker A` from a full SVD, together with `rank A`.
/// A matrix with no rows has the whole space as kernel.
pub fn nullspace_basis(a: MatRef<'_, f64>, rcond: Option<f64>) -> Result<(Mat<f64>, usize)> {
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 {
        return Ok((Mat::identity(n, n), 0));
    }
    if n == 0 {
        return Ok((Mat::zeros(0, 0), 0));
    }
    check_finite("matrix", a, None)?;
    let svd = a.svd().map_err(svd_failed)?;
    let sv: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let rank = rank_of(&sv, rcond.unwrap_or_else(|| default_rcond(m, n)));
    Ok((svd.V().subcols(rank, n - rank).to_owned(), rank))
}

/// Interpolation exponent of the boundary weight; `θ = ∞` is the constrained limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta {
    Finite(f64),
    Infinite,
}

impl Theta {
    pub fn is_infinite(self) -> bool {
        matches!(self, Theta::Infinite)
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theta::Finite(t) => write!(f, "{t}"),
            Theta::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Theta {
    type Err = KansaError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞") {
            return Ok(Theta::Infinite);
        }
        let t: f64 = s
            .parse()
            .map_err(|_| KansaError::config("theta", format!("cannot parse {s:?}")))?;
        Theta::try_from(t)
    }
}

impl TryFrom<f64> for Theta {
    type Error = KansaError;

    fn try_from(t: f64) -> Result<Self> {
        if t == f64::INFINITY {
            Ok(Theta::Infinite)
        } else if t.is_finite() && t >= 0.0 {
            Ok(Theta::Finite(t))
        } else {
            Err(KansaError::config("theta", format!("must be ≥ 0 or \"inf\", got {t}")))
        }
    }
}

impl Serialize for Theta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Theta::Finite(t) => s.serialize_f64(*t),
            Theta::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Theta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Number(t) => Theta::try_from(t),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// How `W` enters the stacked system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightConvention {
    /// Objective `‖K_𝓛λ − f‖² + W‖K_Bλ − g‖²`; boundary rows scaled by `√W`.
    #[default]
    Squared,
    /// Boundary rows scaled by `W` itself.
    Linear,
}

impl FromStr for WeightConvention {
    type Err = KansaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(WeightConvention::Squared),
            "linear" => Ok(WeightConvention::Linear),
            _ => Err(KansaError::config(
                "weight_convention",
                format!("expected \"squared\" or \"linear\", got {s:?}"),
            )),
        }
    }
}

impl fmt::Display for WeightConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightConvention::Squared => "squared",
            WeightConvention::Linear => "linear",
        })
    }
}

/// Boundary weight of a WLS(θ) solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WlsWeight {
    pub theta: Theta,
    pub h_x: f64,
    pub h_y: f64,
    pub dim: usize,
    /// `W(θ)`; infinite for `θ = ∞`.
    pub weight: f64,
    pub convention: WeightConvention,
}

impl WlsWeight {
    pub fn with_convention(mut self, convention: WeightConvention) -> Self {
        self.convention = convention;
        self
    }

    /// Factor applied to the boundary rows of the stacked system.
    pub fn row_scale(&self) -> f64 {
        match self.convention {
            WeightConvention::Squared => self.weight.sqrt(),
            WeightConvention::Linear => self.weight,
        }
    }
}

/// `W(θ) = (h_Y/h_X)^{dθ/2} h_Y^{-2θ}` with the squared convention.
pub fn wls_weight(theta: Theta, h_x: f64, h_y: f64, dim: usize) -> WlsWeight {
    let weight = match theta {
        Theta::Infinite => f64::INFINITY,
        Theta::Finite(t) => (h_y / h_x).powf(dim as f64 * t / 2.0) * h_y.powf(-2.0 * t),
    };
    WlsWeight {
        theta,
        h_x,
        h_y,
        dim,
        weight,
        convention: WeightConvention::Squared,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMethod {
    Constrained,
    Weighted { theta: f64, weight: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Numerical rank of `K_B` at the solve cutoff.
    pub boundary_rank: usize,
    /// Relative singular-value cutoff used throughout the solve.
    pub rcond: f64,
    /// Rank of the final least-squares matrix.
    pub lstsq_rank: usize,
    /// `σ_max/σ_r` of the final least-squares matrix.
    pub condition: f64,
    /// `‖K_𝓛λ − f‖₂`.
    pub pde_residual: f64,
    /// `‖K_Bλ − g‖₂`.
    pub boundary_residual: f64,
    /// Set when there were no boundary rows to constrain.
    pub unconstrained: bool,
    pub solve_seconds: f64,
}

/// Result of a dense solve on raw blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSolution {
    pub coefficients: Vec<f64>,
    pub method: SolveMethod,
    pub diagnostics: Diagnostics,
}

/// Coefficients of `u = Σ λ_j Φ(· − t_j)` with the centers and kernel they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresSolution {
    pub coefficients: Vec<f64>,
    pub method: SolveMethod,
    pub diagnostics: Diagnostics,
    pub trial_centers: PointSet,
    pub kernel: Kernel,
}

impl LeastSquaresSolution {
    fn attach(dense: DenseSolution, system: &CollocationSystem) -> Self {
        LeastSquaresSolution {
            coefficients: dense.coefficients,
            method: dense.method,
            diagnostics: dense.diagnostics,
            trial_centers: system.trial_centers().clone(),
            kernel: *system.kernel(),
        }
    }
}

pub(crate) fn matvec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let y = a * ColRef::from_slice(x);
    y.iter().copied().collect()
}

fn residual_norm(a: MatRef<'_, f64>, x: &[f64], b: &[f64]) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    matvec(a, x)
        .iter()
        .zip(b)
        .map(|(ax, b)| (ax - b) * (ax - b))
        .sum::<f64>()
        .sqrt()
}

fn check_blocks(a_pde: MatRef<'_, f64>, f: &[f64], a_bdy: MatRef<'_, f64>, g: &[f64]) -> Result<()> {
    if a_pde.ncols() != a_bdy.ncols() && a_bdy.nrows() > 0 {
        return Err(KansaError::Solver(format!(
            "blocks have {} and {} columns",
            a_pde.ncols(),
            a_bdy.ncols()
        )));
    }
    if f.len() != a_pde.nrows() || g.len() != a_bdy.nrows() {
        return Err(KansaError::Solver("right-hand side lengths do not match the blocks".into()));
    }
    check_finite("PDE block", a_pde, Some(f))?;
    check_finite("boundary block", a_bdy, Some(g))
}

/// `min ‖A_pde λ − f‖₂` subject to `A_bdy λ = g` (in the least-squares sense
/// when `g ∉ range A_bdy`).
///
/// With `A_bdy = U Σ Vᵀ`, `λ = A_bdy† g + N γ` where `N` spans the right
/// singular vectors beyond the numerical rank, and `γ` solves the reduced
/// problem `min ‖A_pde N γ − (f − A_pde A_bdy† g)‖₂`.
pub fn cls_lstsq(
    a_pde: MatRef<'_, f64>,
    f: &[f64],
    a_bdy: MatRef<'_, f64>,
    g: &[f64],
    rcond: Option<f64>,
) -> Result<DenseSolution> {
    let start = Instant::now();
    check_blocks(a_pde, f, a_bdy, g)?;
    let n = a_pde.ncols();
    if a_bdy.nrows() == 0 {
        log::warn!("no boundary rows; solving the unconstrained problem");
        let ls = svd_lstsq(a_pde, f, rcond)?;
        return Ok(DenseSolution {
            diagnostics: Diagnostics {
                boundary_rank: 0,
                rcond: rcond.unwrap_or_else(|| default_rcond(a_pde.nrows(), n)),
                lstsq_rank: ls.rank,
                condition: ls.condition(),
                pde_residual: residual_norm(a_pde, &ls.solution, f),
                boundary_residual: 0.0,
                unconstrained: true,
                solve_seconds: start.elapsed().as_secs_f64(),
            },
            coefficients: ls.solution,
            method: SolveMethod::Constrained,
        });
    }

    let svd = a_bdy.svd().map_err(svd_failed)?;
    let sv: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let cutoff = rcond.unwrap_or_else(|| default_rcond(a_bdy.nrows(), n));
    let r = rank_of(&sv, cutoff);
    let (u, v) = (svd.U(), svd.V());

    // Particular solution A_bdy† g.
    let mut lambda = vec![0.0; n];
    for k in 0..r {
        let coef = (0..g.len()).map(|i| u[(i, k)] * g[i]).sum::<f64>() / sv[k];
        for (j, l) in lambda.iter_mut().enumerate() {
            *l += coef * v[(j, k)];
        }
    }

    let (lstsq_rank, condition) = if r < n && a_pde.nrows() > 0 {
        let null = v.subcols(r, n - r);
        let reduced = a_pde * null;
        let shift = matvec(a_pde, &lambda);
        let rhs: Vec<f64> = f.iter().zip(&shift).map(|(f, s)| f - s).collect();
        let ls = svd_lstsq(reduced.as_ref(), &rhs, rcond)?;
        let correction = matvec(null, &ls.solution);
        for (l, c) in lambda.iter_mut().zip(&correction) {
            *l += c;
        }
        (ls.rank, ls.condition())
    } else {
        (0, f64::NAN)
    };

    Ok(DenseSolution {
        diagnostics: Diagnostics {
            boundary_rank: r,
            rcond: cutoff,
            lstsq_rank,
            condition,
            pde_residual: residual_norm(a_pde, &lambda, f),
            boundary_residual: residual_norm(a_bdy, &lambda, g),
            unconstrained: false,
            solve_seconds: start.elapsed().as_secs_f64(),
        },
        coefficients: lambda,
        method: SolveMethod::Constrained,
    })
}

/// Stacked least squares `[A_pde; s·A_bdy] λ ≈ [f; s·g]` with `s = √W`
/// (squared convention) or `s = W` (linear convention). `θ = ∞` is
/// delegated to [`cls_lstsq`].
pub fn wls_lstsq(
    a_pde: MatRef<'_, f64>,
    f: &[f64],
    a_bdy: MatRef<'_, f64>,
    g: &[f64],
    weight: &WlsWeight,
    rcond: Option<f64>,
) -> Result<DenseSolution> {
    let theta = match weight.theta {
        Theta::Infinite => return cls_lstsq(a_pde, f, a_bdy, g, rcond),
        Theta::Finite(t) => t,
    };
    let scale = weight.row_scale();
    if !(scale.is_finite() && scale > 0.0) {
        return Err(KansaError::Numeric(format!(
            "boundary weight {} is not usable",
            weight.weight
        )));
    }
    let start = Instant::now();
    check_blocks(a_pde, f, a_bdy, g)?;
    let (nx, ny, n) = (a_pde.nrows(), a_bdy.nrows(), a_pde.ncols());
    let stacked = Mat::from_fn(nx + ny, n, |i, j| {
        if i < nx {
            a_pde[(i, j)]
        } else {
            scale * a_bdy[(i - nx, j)]
        }
    });
    let rhs: Vec<f64> = f.iter().copied().chain(g.iter().map(|g| scale * g)).collect();
    let ls = svd_lstsq(stacked.as_ref(), &rhs, rcond)?;
    let bdy_cutoff = rcond.unwrap_or_else(|| default_rcond(ny, n));
    let boundary_rank = if ny > 0 {
        let sv = a_bdy.singular_values().map_err(svd_failed)?;
        rank_of(&sv, bdy_cutoff)
    } else {
        0
    };
    Ok(DenseSolution {
        diagnostics: Diagnostics {
            boundary_rank,
            rcond: rcond.unwrap_or_else(|| default_rcond(nx + ny, n)),
            lstsq_rank: ls.rank,
            condition: ls.condition(),
            pde_residual: residual_norm(a_pde, &ls.solution, f),
            boundary_residual: residual_norm(a_bdy, &ls.solution, g),
            unconstrained: ny == 0,
            solve_seconds: start.elapsed().as_secs_f64(),
        },
        coefficients: ls.solution,
        method: SolveMethod::Weighted {
            theta,
            weight: weight.weight,
        },
    })
}

/// Constrained least-squares solve of an assembled system.
pub fn solve_cls(system: &CollocationSystem, rcond: Option<f64>) -> Result<LeastSquaresSolution> {
    let dense = cls_lstsq(
        system.pde_matrix(),
        system.pde_rhs(),
        system.boundary_matrix(),
        system.boundary_rhs(),
        rcond,
    )?;
    Ok(LeastSquaresSolution::attach(dense, system))
}

/// Weighted least-squares solve of an assembled system.
pub fn solve_wls(
    system: &CollocationSystem,
    weight: &WlsWeight,
    rcond: Option<f64>,
) -> Result<LeastSquaresSolution> {
    let dense = wls_lstsq(
        system.pde_matrix(),
        system.pde_rhs(),
        system.boundary_matrix(),
        system.boundary_rhs(),
        weight,
        rcond,
    )?;
    Ok(LeastSquaresSolution::attach(dense, system))
}

/// `(‖A_pde λ − f‖² + W ‖A_bdy λ − g‖²)^{1/2}` on raw blocks.
pub fn weighted_residual(
    a_pde: MatRef<'_, f64>,
    f: &[f64],
    a_bdy: MatRef<'_, f64>,
    g: &[f64],
    weight: f64,
    lambda: &[f64],
) -> f64 {
    let pde = residual_norm(a_pde, lambda, f).powi(2);
    let bdy = residual_norm(a_bdy, lambda, g).powi(2);
    // W = 0 must not turn an infinite weight times zero into NaN, and vice versa.
    if weight == 0.0 {
        pde.sqrt()
    } else {
        (pde + weight * bdy).sqrt()
    }
}

/// `J_W(λ)` of an assembled system.
pub fn objective_j(system: &CollocationSystem, weight: &WlsWeight, lambda: &[f64]) -> f64 {
    weighted_residual(
        system.pde_matrix(),
        system.pde_rhs(),
        system.boundary_matrix(),
        system.boundary_rhs(),
        weight.weight,
        lambda,
    )
}
