//! Elliptic operators in expanded (non-divergence) form and manufactured
//! solutions whose derivative jets come from forward-mode differentiation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{KansaError, Result};
use crate::geometry::Domain;
use crate::jet::{Jet, MAX_DIM};
use crate::kernels::Kernel;

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64]) -> [f64; MAX_DIM] + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&[f64]) -> [[f64; MAX_DIM]; MAX_DIM] + Send + Sync>;

/// `𝓛u = Σ_ij A_ij ∂_i∂_j u + Σ_j B_j ∂_j u + C u`.
///
/// `A` defaults to the identity; `B` and `C` default to zero. Divergence-form
/// operators must be expanded by the caller.
#[derive(Clone)]
pub struct EllipticOperator {
    name: String,
    dim: usize,
    second_order: Option<MatrixField>,
    first_order: Option<VectorField>,
    zeroth_order: Option<ScalarField>,
}

impl EllipticOperator {
    pub fn laplacian(dim: usize) -> Self {
        EllipticOperator {
            name: "laplace".into(),
            dim,
            second_order: None,
            first_order: None,
            zeroth_order: None,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Replaces `A`; the returned matrix must be symmetric.
    pub fn with_second_order(
        mut self,
        a: impl Fn(&[f64]) -> [[f64; MAX_DIM]; MAX_DIM] + Send + Sync + 'static,
    ) -> Self {
        self.second_order = Some(Arc::new(a));
        self
    }

    pub fn with_first_order(
        mut self,
        b: impl Fn(&[f64]) -> [f64; MAX_DIM] + Send + Sync + 'static,
    ) -> Self {
        self.first_order = Some(Arc::new(b));
        self
    }

    pub fn with_zeroth_order(mut self, c: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.zeroth_order = Some(Arc::new(c));
        self
    }

    pub fn builtin(kind: OperatorKind) -> Self {
        match kind {
            OperatorKind::Laplace => Self::laplacian(2),
            OperatorKind::Convdiff => Self::laplacian(2)
                .with_first_order(|_| [2.0, 3.0, 0.0])
                .with_zeroth_order(|_| -4.0),
            OperatorKind::HelmholtzX2 => {
                Self::laplacian(2).with_zeroth_order(|x| x[0] * x[0] + 1.0)
            }
            OperatorKind::HelmholtzX => Self::laplacian(2).with_zeroth_order(|x| x[0]),
        }
        .named(kind.to_string())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `𝓛u(x)` from the 2-jet of `u` at `x`.
    pub fn apply(&self, jet: &Jet, x: &[f64]) -> f64 {
        debug_assert_eq!(jet.dim(), self.dim);
        let d = self.dim;
        let mut out = match &self.second_order {
            None => jet.laplacian(),
            Some(a) => {
                let a = a(x);
                let mut s = 0.0;
                for i in 0..d {
                    debug_assert!((0..d).all(|j| a[i][j] == a[j][i]), "A(x) must be symmetric");
                    for j in 0..d {
                        s += a[i][j] * jet.hessian(i, j);
                    }
                }
                s
            }
        };
        if let Some(b) = &self.first_order {
            let b = b(x);
            out += (0..d).map(|j| b[j] * jet.gradient()[j]).sum::<f64>();
        }
        if let Some(c) = &self.zeroth_order {
            out += c(x) * jet.value();
        }
        out
    }
}

/// `𝓛u(x)` from the 2-jet of `u` at `x`.
pub fn apply_operator(op: &EllipticOperator, jet: &Jet, x: &[f64]) -> f64 {
    op.apply(jet, x)
}

impl fmt::Debug for EllipticOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EllipticOperator")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("variable_second_order", &self.second_order.is_some())
            .field("first_order", &self.first_order.is_some())
            .field("zeroth_order", &self.zeroth_order.is_some())
            .finish()
    }
}

/// Built-in operators on `[−1, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `Δu`
    Laplace,
    /// `Δu + [2, 3]ᵀ∇u − 4u`
    Convdiff,
    /// `Δu + (x² + 1)u`
    HelmholtzX2,
    /// `Δu + x u`
    HelmholtzX,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 4] = [
        OperatorKind::Laplace,
        OperatorKind::Convdiff,
        OperatorKind::HelmholtzX2,
        OperatorKind::HelmholtzX,
    ];
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::Laplace => "laplace",
            OperatorKind::Convdiff => "convdiff",
            OperatorKind::HelmholtzX2 => "helmholtz_x2",
            OperatorKind::HelmholtzX => "helmholtz_x",
        })
    }
}

impl FromStr for OperatorKind {
    type Err = KansaError;
    fn from_str(s: &str) -> Result<Self> {
        OperatorKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| KansaError::config("operator", format!("unknown operator {s:?}")))
    }
}

/// An exact solution `u*` with exact value/gradient/Hessian.
#[derive(Clone)]
pub struct ManufacturedSolution {
    name: String,
    dim: usize,
    evaluator: Arc<dyn Fn(&[f64]) -> Jet + Send + Sync>,
}

impl ManufacturedSolution {
    /// Wraps an expression written over jets; derivatives follow by
    /// forward-mode differentiation.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        expr: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static,
    ) -> Self {
        ManufacturedSolution {
            name: name.into(),
            dim,
            evaluator: Arc::new(move |x| expr(&Jet::variables(x))),
        }
    }

    /// Wraps a function that already returns the full 2-jet.
    pub fn from_jet_fn(
        name: impl Into<String>,
        dim: usize,
        f: impl Fn(&[f64]) -> Jet + Send + Sync + 'static,
    ) -> Self {
        ManufacturedSolution {
            name: name.into(),
            dim,
            evaluator: Arc::new(f),
        }
    }

    /// `u* = Φ(· − center)`, which lies in any trial space containing `center`.
    pub fn kernel_translate(kernel: Kernel, center: Vec<f64>) -> Self {
        ManufacturedSolution::from_jet_fn("kernel_translate", kernel.dim(), move |x| {
            kernel.jet(x, &center)
        })
    }

    pub fn builtin(kind: SolutionKind) -> Self {
        let name = kind.to_string();
        match kind {
            SolutionKind::Trig => Self::new(name, 2, |v| {
                let a = std::f64::consts::FRAC_PI_2;
                (v[0] * a).sin() * (v[1] * a).cos()
            }),
            SolutionKind::Peaks3 => Self::new(name, 2, |v| peaks(v[0] * 3.0, v[1] * 3.0)),
            SolutionKind::Peaks1 => Self::new(name, 2, |v| peaks(v[0], v[1])),
            SolutionKind::Franke => {
                Self::new(name, 2, |v| franke(v[0] * 2.0 - 1.0, v[1] * 2.0 - 1.0))
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jet(&self, x: &[f64]) -> Jet {
        (self.evaluator)(x)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.jet(x).value()
    }
}

/// Value, gradient and Hessian of `u*` at `x`.
pub fn solution_jet(s: &ManufacturedSolution, x: &[f64]) -> Jet {
    s.jet(x)
}

impl fmt::Debug for ManufacturedSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedSolution")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

/// `p(s,t) = 3(1−s)² e^{−s²−(t+1)²} − 10(s/5 − s³ − t⁵) e^{−s²−t²} − e^{−(s+1)²−t²}/3`
pub fn peaks(s: Jet, t: Jet) -> Jet {
    let one_minus_s = 1.0 - s;
    let t_plus_1 = t + 1.0;
    let s_plus_1 = s + 1.0;
    let s2 = s * s;
    let t2 = t * t;
    let a = 3.0 * one_minus_s * one_minus_s * (-s2 - t_plus_1 * t_plus_1).exp();
    let b = 10.0 * (s / 5.0 - s.powi(3) - t.powi(5)) * (-s2 - t2).exp();
    let c = (-(s_plus_1 * s_plus_1) - t2).exp() / 3.0;
    a - b - c
}

/// Franke's bivariate test function on the unit square.
pub fn franke(s: Jet, t: Jet) -> Jet {
    let sq = |j: Jet| j * j;
    let a = 0.75 * ((-(sq(9.0 * s - 2.0) + sq(9.0 * t - 2.0)) / 4.0).exp());
    let b = 0.75 * (-sq(9.0 * s + 1.0) / 49.0 - (9.0 * t + 1.0) / 10.0).exp();
    let c = 0.5 * ((-(sq(9.0 * s - 7.0) + sq(9.0 * t - 3.0)) / 4.0).exp());
    let d = 0.2 * (-sq(9.0 * s - 4.0) - sq(9.0 * t - 7.0)).exp();
    a + b + c - d
}

/// Built-in exact solutions on `[−1, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    /// `sin(πx/2) cos(πy/2)`
    Trig,
    /// `peaks(3x, 3y)`, the full peaks function.
    Peaks3,
    /// `peaks(x, y)`, the zoomed-in peak.
    Peaks1,
    /// `franke(2x − 1, 2y − 1)`
    Franke,
}

impl SolutionKind {
    pub const ALL: [SolutionKind; 4] = [
        SolutionKind::Trig,
        SolutionKind::Peaks3,
        SolutionKind::Peaks1,
        SolutionKind::Franke,
    ];
}

impl fmt::Display for SolutionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolutionKind::Trig => "trig",
            SolutionKind::Peaks3 => "peaks3",
            SolutionKind::Peaks1 => "peaks1",
            SolutionKind::Franke => "franke",
        })
    }
}

impl FromStr for SolutionKind {
    type Err = KansaError;
    fn from_str(s: &str) -> Result<Self> {
        SolutionKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| KansaError::config("problem", format!("unknown problem {s:?}")))
    }
}

/// `𝓛u = f` in the box, `u = g` on its boundary, with `f = 𝓛u*`, `g = u*`.
#[derive(Debug, Clone)]
pub struct BoundaryValueProblem {
    operator: EllipticOperator,
    domain: Domain,
    exact: ManufacturedSolution,
}

impl BoundaryValueProblem {
    pub fn new(
        operator: EllipticOperator,
        domain: Domain,
        exact: ManufacturedSolution,
    ) -> Result<Self> {
        if operator.dim() != domain.dim() || exact.dim() != domain.dim() {
            return Err(KansaError::Geometry(format!(
                "dimension mismatch: operator {}, solution {}, domain {}",
                operator.dim(),
                exact.dim(),
                domain.dim()
            )));
        }
        Ok(BoundaryValueProblem {
            operator,
            domain,
            exact,
        })
    }

    /// A built-in solution/operator pair on `[−1, 1]²`.
    pub fn builtin(solution: SolutionKind, operator: OperatorKind) -> Self {
        Self::new(
            EllipticOperator::builtin(operator),
            Domain::reference_square(),
            ManufacturedSolution::builtin(solution),
        )
        .expect("built-ins are two-dimensional")
    }

    pub fn operator(&self) -> &EllipticOperator {
        &self.operator
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn exact(&self) -> &ManufacturedSolution {
        &self.exact
    }

    /// PDE data `f(x) = 𝓛u*(x)`.
    pub fn source(&self, x: &[f64]) -> f64 {
        self.operator.apply(&self.exact.jet(x), x)
    }

    /// Dirichlet data `g(y) = u*(y)`.
    pub fn boundary_value(&self, y: &[f64]) -> f64 {
        self.exact.value(y)
    }
}
