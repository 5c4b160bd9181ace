//! Radial kernels with exact value/gradient/Hessian jets.
//!
//! For a radial kernel `Φ(x) = ψ(‖x‖)` with `δ = x − z`, `r = ‖δ‖`:
//!
//! ```text
//! ∇Φ = a(r) δ,    ∇²Φ = a(r) I + b(r) δ δᵀ,
//! a = ψ'(r)/r,    b = (ψ''(r) − ψ'(r)/r) / r².
//! ```
//!
//! For the Matérn–Sobolev kernel `ψ = φ_ν` this gives `a = −φ_{ν−1}` and
//! `b = φ_{ν−2}`, which is why `ν ≥ 2` is required.

use std::fmt;

use crate::error::{KansaError, Result};
use crate::jet::{Jet, MAX_DIM};
use crate::special_functions::{matern_profile, matern_profile_triple, HalfOrder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// `Φ(x) = ‖x‖^ν K_ν(‖x‖)` with `ν = m − d/2`; reproduces `H^m(ℝ^d)`.
    MaternSobolev { m: u32 },
    /// `exp(−ε² r²)`.
    Gaussian { shape: f64 },
    /// `sqrt(1 + ε² r²)`, used without polynomial augmentation.
    Multiquadric { shape: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    dim: usize,
    /// Matérn order ν, cached.
    order: Option<HalfOrder>,
}

impl Kernel {
    pub fn matern_sobolev(m: u32, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let twice = 2 * m as i64 - dim as i64;
        if twice < 4 {
            return Err(KansaError::KernelParameter(format!(
                "Matérn–Sobolev needs ν = m − d/2 ≥ 2 for second derivatives; m = {m}, d = {dim} gives ν = {}",
                twice as f64 / 2.0
            )));
        }
        let order = HalfOrder::new(twice as f64 / 2.0)
            .map_err(|e| KansaError::KernelParameter(e.to_string()))?;
        Ok(Kernel {
            family: KernelFamily::MaternSobolev { m },
            dim,
            order: Some(order),
        })
    }

    pub fn gaussian(shape: f64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        check_shape(shape)?;
        Ok(Kernel {
            family: KernelFamily::Gaussian { shape },
            dim,
            order: None,
        })
    }

    pub fn multiquadric(shape: f64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        check_shape(shape)?;
        Ok(Kernel {
            family: KernelFamily::Multiquadric { shape },
            dim,
            order: None,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Matérn order `ν = m − d/2`, if this is a Matérn–Sobolev kernel.
    pub fn matern_order(&self) -> Option<HalfOrder> {
        self.order
    }

    /// Whether every interpolation matrix on distinct points is positive definite.
    pub fn is_positive_definite(&self) -> bool {
        !matches!(self.family, KernelFamily::Multiquadric { .. })
    }

    /// Radial profile `ψ(r)`.
    pub fn profile(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::MaternSobolev { .. } => {
                matern_profile(self.order.expect("matern order"), r).expect("validated order")
            }
            KernelFamily::Gaussian { shape } => (-(shape * shape) * r * r).exp(),
            KernelFamily::Multiquadric { shape } => (1.0 + shape * shape * r * r).sqrt(),
        }
    }

    /// `Φ(0)`, the diagonal of every interpolation matrix.
    pub fn peak_value(&self) -> f64 {
        self.profile(0.0)
    }

    /// `Φ(x − z)`.
    pub fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        self.profile(distance(x, z))
    }

    /// Value, gradient and Hessian of `x ↦ Φ(x − z)`.
    pub fn jet(&self, x: &[f64], z: &[f64]) -> Jet {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        assert_eq!(z.len(), self.dim, "center dimension mismatch");
        let mut offset = [0.0; MAX_DIM];
        for i in 0..self.dim {
            offset[i] = x[i] - z[i];
        }
        let offset = &offset[..self.dim];
        let r = offset.iter().map(|d| d * d).sum::<f64>().sqrt();
        let (value, a, b) = self.radial_parts(r);
        Jet::radial(value, offset, a, b)
    }

    /// `(ψ(r), ψ'(r)/r, (ψ'' − ψ'/r)/r²)`; the last entry is irrelevant at `r = 0`.
    fn radial_parts(&self, r: f64) -> (f64, f64, f64) {
        match self.family {
            KernelFamily::MaternSobolev { .. } => {
                let [lower2, lower1, value] =
                    matern_profile_triple(self.order.expect("matern order"), r);
                let b = if r == 0.0 { 0.0 } else { lower2 };
                (value, -lower1, b)
            }
            KernelFamily::Gaussian { shape } => {
                let e2 = shape * shape;
                let v = (-e2 * r * r).exp();
                (v, -2.0 * e2 * v, 4.0 * e2 * e2 * v)
            }
            KernelFamily::Multiquadric { shape } => {
                let e2 = shape * shape;
                let s = (1.0 + e2 * r * r).sqrt();
                (s, e2 / s, -e2 * e2 / (s * s * s))
            }
        }
    }
}

/// Value, gradient and Hessian of `x ↦ Φ(x − z)`.
pub fn kernel_jet(kernel: &Kernel, x: &[f64], z: &[f64]) -> Jet {
    kernel.jet(x, z)
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::MaternSobolev { m } => write!(f, "matern(m={m})"),
            KernelFamily::Gaussian { shape } => write!(f, "gaussian(eps={shape})"),
            KernelFamily::Multiquadric { shape } => write!(f, "multiquadric(eps={shape})"),
        }
    }
}

pub(crate) fn distance(x: &[f64], z: &[f64]) -> f64 {
    x.iter()
        .zip(z)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(KansaError::KernelParameter(format!(
            "dimension must be in 1..={MAX_DIM}, got {dim}"
        )))
    }
}

fn check_shape(shape: f64) -> Result<()> {
    if shape > 0.0 && shape.is_finite() {
        Ok(())
    } else {
        Err(KansaError::KernelParameter(format!(
            "shape parameter must be positive, got {shape}"
        )))
    }
}
