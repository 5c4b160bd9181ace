//! Second-order jets: a value with its gradient and Hessian.
//!
//! [`Jet`] doubles as a truncated second-order Taylor number, so composing
//! arithmetic and elementary functions on jets seeded with
//! [`Jet::variable`] yields exact first and second derivatives (forward-mode
//! automatic differentiation). Kernels produce jets directly from closed forms.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Largest spatial dimension a jet can carry.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    dim: usize,
    value: f64,
    gradient: [f64; MAX_DIM],
    hessian: [[f64; MAX_DIM]; MAX_DIM],
}

impl Jet {
    pub fn constant(dim: usize, value: f64) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&dim),
            "jet dimension must be in 1..={MAX_DIM}, got {dim}"
        );
        Jet {
            dim,
            value,
            gradient: [0.0; MAX_DIM],
            hessian: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(dim, 0.0)
    }

    /// The coordinate function `x_axis` evaluated at `value`.
    pub fn variable(dim: usize, axis: usize, value: f64) -> Self {
        let mut j = Self::constant(dim, value);
        j.gradient[axis] = 1.0;
        j
    }

    /// Seeds one variable per coordinate of `x`.
    pub fn variables(x: &[f64]) -> Vec<Jet> {
        (0..x.len())
            .map(|i| Jet::variable(x.len(), i, x[i]))
            .collect()
    }

    /// Builds a jet from explicit parts. `hessian` is row-major `dim × dim`
    /// and is symmetrized.
    pub fn from_parts(value: f64, gradient: &[f64], hessian: &[f64]) -> Self {
        let dim = gradient.len();
        assert_eq!(hessian.len(), dim * dim, "hessian must be dim × dim");
        let mut j = Self::constant(dim, value);
        j.gradient[..dim].copy_from_slice(gradient);
        for a in 0..dim {
            for b in a..dim {
                let h = 0.5 * (hessian[a * dim + b] + hessian[b * dim + a]);
                j.hessian[a][b] = h;
                j.hessian[b][a] = h;
            }
        }
        j
    }

    /// Radial construction: gradient `a·δ`, Hessian `a·I + b·δδᵀ`.
    pub(crate) fn radial(value: f64, offset: &[f64], a: f64, b: f64) -> Self {
        let dim = offset.len();
        let mut j = Self::constant(dim, value);
        for i in 0..dim {
            j.gradient[i] = a * offset[i];
            for k in i..dim {
                let mut h = b * offset[i] * offset[k];
                if i == k {
                    h += a;
                }
                j.hessian[i][k] = h;
                j.hessian[k][i] = h;
            }
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn gradient(&self) -> &[f64] {
        &self.gradient[..self.dim]
    }

    pub fn hessian(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.dim && j < self.dim);
        self.hessian[i][j]
    }

    /// Sum of the Hessian diagonal.
    pub fn laplacian(&self) -> f64 {
        (0..self.dim).map(|i| self.hessian[i][i]).sum()
    }

    /// `alpha * self`.
    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = *self;
        out.value *= alpha;
        for i in 0..self.dim {
            out.gradient[i] *= alpha;
            for k in 0..self.dim {
                out.hessian[i][k] *= alpha;
            }
        }
        out
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &Jet) {
        debug_assert_eq!(self.dim, other.dim);
        self.value += alpha * other.value;
        for i in 0..self.dim {
            self.gradient[i] += alpha * other.gradient[i];
            for k in 0..self.dim {
                self.hessian[i][k] += alpha * other.hessian[i][k];
            }
        }
    }

    /// Chain rule for a scalar function with `f(u)`, `f'(u)`, `f''(u)` given.
    fn compose(&self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Self::constant(self.dim, f);
        for i in 0..self.dim {
            out.gradient[i] = df * self.gradient[i];
            for k in 0..self.dim {
                out.hessian[i][k] =
                    df * self.hessian[i][k] + d2f * self.gradient[i] * self.gradient[k];
            }
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.compose(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let v = self.value;
        self.compose(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose(c, -s, -c)
    }

    pub fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.compose(s, 0.5 / s, -0.25 / (s * self.value))
    }

    pub fn powi(&self, n: i32) -> Self {
        let v = self.value;
        let nf = n as f64;
        let d2 = if n == 0 || n == 1 {
            0.0
        } else {
            nf * (nf - 1.0) * v.powi(n - 2)
        };
        let d1 = if n == 0 { 0.0 } else { nf * v.powi(n - 1) };
        self.compose(v.powi(n), d1, d2)
    }

    pub fn powf(&self, p: f64) -> Self {
        let v = self.value;
        self.compose(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
    }
}

/// Sum of the Hessian diagonal.
pub fn trace_laplacian(j: &Jet) -> f64 {
    j.laplacian()
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.add_scaled(1.0, &rhs);
        self
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        self.add_scaled(1.0, &rhs);
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self.add_scaled(-1.0, &rhs);
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = Jet::constant(self.dim, self.value * rhs.value);
        for i in 0..self.dim {
            out.gradient[i] = self.gradient[i] * rhs.value + self.value * rhs.gradient[i];
            for k in 0..self.dim {
                out.hessian[i][k] = self.hessian[i][k] * rhs.value
                    + self.gradient[i] * rhs.gradient[k]
                    + rhs.gradient[i] * self.gradient[k]
                    + self.value * rhs.hessian[i][k];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let v = rhs.value;
        self * rhs.compose(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.value += rhs;
        self
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.value -= rhs;
        self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        -rhs + self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn xy(x: f64, y: f64) -> (Jet, Jet) {
        (Jet::variable(2, 0, x), Jet::variable(2, 1, y))
    }

    #[test]
    fn polynomial_derivatives() {
        // u = x² y + 3y³ at (2, -1)
        let (x, y) = xy(2.0, -1.0);
        let u = x.powi(2) * y + 3.0 * y.powi(3);
        assert_relative_eq!(u.value(), -4.0 - 3.0);
        assert_relative_eq!(u.gradient()[0], 2.0 * 2.0 * -1.0);
        assert_relative_eq!(u.gradient()[1], 4.0 + 9.0);
        assert_relative_eq!(u.hessian(0, 0), -2.0);
        assert_relative_eq!(u.hessian(0, 1), 4.0);
        assert_relative_eq!(u.hessian(1, 0), 4.0);
        assert_relative_eq!(u.hessian(1, 1), 18.0 * -1.0);
        assert_relative_eq!(u.laplacian(), -20.0);
    }

    #[test]
    fn quotient_and_transcendentals() {
        // u = sin(x) e^{y} / (1 + x²)
        let (x, y) = xy(0.3, 0.7);
        let u = x.sin() * y.exp() / (1.0 + x * x);
        let f = |x: f64, y: f64| x.sin() * y.exp() / (1.0 + x * x);
        let h = 1e-4;
        let fxx = (f(0.3 + h, 0.7) - 2.0 * f(0.3, 0.7) + f(0.3 - h, 0.7)) / (h * h);
        let fxy = (f(0.3 + h, 0.7 + h) - f(0.3 + h, 0.7 - h) - f(0.3 - h, 0.7 + h)
            + f(0.3 - h, 0.7 - h))
            / (4.0 * h * h);
        assert_relative_eq!(u.value(), f(0.3, 0.7), max_relative = 1e-15);
        assert_relative_eq!(u.hessian(0, 0), fxx, max_relative = 1e-6);
        assert_relative_eq!(u.hessian(0, 1), fxy, max_relative = 1e-6);
    }

    #[test]
    fn sqrt_ln_powf_agree() {
        let (x, y) = xy(1.3, 0.4);
        let r2 = x * x + y * y;
        let a = r2.sqrt();
        let b = r2.powf(0.5);
        let c = (0.5 * r2.ln()).exp();
        for other in [b, c] {
            assert_relative_eq!(a.value(), other.value(), max_relative = 1e-14);
            for i in 0..2 {
                assert_relative_eq!(a.gradient()[i], other.gradient()[i], max_relative = 1e-13);
                for k in 0..2 {
                    assert_relative_eq!(a.hessian(i, k), other.hessian(i, k), max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_hessian_has_zero_laplacian() {
        let j = Jet::from_parts(3.0, &[1.0, 2.0], &[0.0; 4]);
        assert_eq!(trace_laplacian(&j), 0.0);
    }

    #[test]
    fn from_parts_symmetrizes() {
        let j = Jet::from_parts(0.0, &[0.0, 0.0], &[1.0, 2.0, 4.0, 5.0]);
        assert_eq!(j.hessian(0, 1), 3.0);
        assert_eq!(j.hessian(1, 0), 3.0);
    }
}
