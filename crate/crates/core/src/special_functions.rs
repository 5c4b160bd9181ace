//! Modified Bessel functions of the second kind `K_ν` for non-negative
//! half-integer orders, and the Matérn profile `φ_ν(r) = r^ν K_ν(r)`.
//!
//! Integer orders start from `K_0`, `K_1`, evaluated by the power/log series
//! for `x ≤ 2`, Steed's continued fraction for `2 < x < 30` and the
//! large-argument asymptotic expansion beyond. Half-integer orders start from
//! the closed form `K_{1/2}(x) = sqrt(π/(2x)) e^{-x}`. Higher orders follow by
//! upward recurrence, which is stable for `K`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{KansaError, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 2.0;
const ASYMPTOTIC_LIMIT: f64 = 30.0;
/// Beyond this argument `e^{-x}` is treated as zero.
pub const UNDERFLOW_ARGUMENT: f64 = 700.0;
/// Largest supported order, stored as twice the order (i.e. ν ≤ 20).
pub const MAX_TWICE_ORDER: u32 = 40;

/// A non-negative half-integer order `ν ∈ {0, 1/2, 1, 3/2, ...}`, stored as `2ν`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfOrder(u32);

impl HalfOrder {
    pub const fn integer(n: u32) -> Self {
        HalfOrder(2 * n)
    }

    /// The order `n + 1/2`.
    pub const fn half_odd(n: u32) -> Self {
        HalfOrder(2 * n + 1)
    }

    pub const fn from_twice(twice: u32) -> Self {
        HalfOrder(twice)
    }

    /// Parses a real order, which must be a supported half-integer.
    pub fn new(order: f64) -> Result<Self> {
        let twice = 2.0 * order;
        if !(twice.is_finite() && twice >= 0.0 && twice.fract() == 0.0)
            || twice > MAX_TWICE_ORDER as f64
        {
            return Err(KansaError::UnsupportedOrder(order));
        }
        Ok(HalfOrder(twice as u32))
    }

    pub const fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    fn check_supported(self) -> Result<()> {
        if self.0 > MAX_TWICE_ORDER {
            Err(KansaError::UnsupportedOrder(self.value()))
        } else {
            Ok(())
        }
    }
}

impl std::fmt::Display for HalfOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselMethod {
    SmallArgumentSeries,
    ContinuedFraction,
    LargeArgumentAsymptotic,
    UpwardRecurrence,
    HalfIntegerClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEvaluation {
    pub order: HalfOrder,
    pub argument: f64,
    pub value: f64,
    pub method: BesselMethod,
    /// Set when `argument > UNDERFLOW_ARGUMENT` and the value was flushed to 0.
    pub underflow: bool,
}

/// `K_ν(x)` for `x > 0`.
pub fn bessel_k(order: HalfOrder, x: f64) -> Result<f64> {
    bessel_k_eval(order, x).map(|e| e.value)
}

/// `K_ν(x)` together with the evaluation path taken.
pub fn bessel_k_eval(order: HalfOrder, x: f64) -> Result<BesselEvaluation> {
    order.check_supported()?;
    if !(x > 0.0) {
        return Err(KansaError::Domain(format!("K_ν requires x > 0, got {x}")));
    }
    let n = order.twice() / 2;
    let eval = |value, method, underflow| BesselEvaluation {
        order,
        argument: x,
        value,
        method,
        underflow,
    };

    if !order.is_integer() {
        if x > UNDERFLOW_ARGUMENT {
            return Ok(eval(0.0, BesselMethod::HalfIntegerClosedForm, true));
        }
        // K_{-1/2} = K_{1/2}
        let k_half = (FRAC_PI_2 / x).sqrt() * (-x).exp();
        let value = recur_k(k_half, k_half, 0.5, n, x);
        return Ok(eval(value, BesselMethod::HalfIntegerClosedForm, false));
    }

    let base_method = base_method(x);
    let method = if n >= 2 {
        BesselMethod::UpwardRecurrence
    } else {
        base_method
    };
    if x > UNDERFLOW_ARGUMENT {
        return Ok(eval(0.0, method, true));
    }
    let (k0, k1) = k0_k1(x);
    let value = match n {
        0 => k0,
        1 => k1,
        _ => recur_k(k0, k1, 1.0, n - 1, x),
    };
    Ok(eval(value, method, false))
}

/// Runs `K_{μ+1} = K_{μ-1} + (2μ/x) K_μ` `steps` times starting at `(K_{μ-1}, K_μ)`.
fn recur_k(mut below: f64, mut current: f64, mut mu: f64, steps: u32, x: f64) -> f64 {
    for _ in 0..steps {
        let next = below + 2.0 * mu / x * current;
        below = current;
        current = next;
        mu += 1.0;
    }
    current
}

fn base_method(x: f64) -> BesselMethod {
    if x <= SERIES_LIMIT {
        BesselMethod::SmallArgumentSeries
    } else if x < ASYMPTOTIC_LIMIT {
        BesselMethod::ContinuedFraction
    } else {
        BesselMethod::LargeArgumentAsymptotic
    }
}

/// `(K_0(x), K_1(x))` for `0 < x ≤ UNDERFLOW_ARGUMENT`.
fn k0_k1(x: f64) -> (f64, f64) {
    let (phi0, phi1) = phi0_phi1(x);
    (phi0, phi1 / x)
}

/// `(K_0(x), x K_1(x))`; the second entry is finite (→ 1) as `x → 0`.
fn phi0_phi1(x: f64) -> (f64, f64) {
    match base_method(x) {
        BesselMethod::SmallArgumentSeries => small_argument_series(x),
        BesselMethod::ContinuedFraction => {
            let (k0, k1) = steed_continued_fraction(x);
            (k0, x * k1)
        }
        _ => (asymptotic(0.0, x), x * asymptotic(1.0, x)),
    }
}

/// Power/log series for `K_0(x)` and `x K_1(x)`, with `t = x²/4`:
///
/// `K_0 = Σ t^k/(k!)² (H_k − ln(x/2) − γ)`
/// `x K_1 = 1 + t Σ t^k/(k!(k+1)!) (2 ln(x/2) − ψ(k+1) − ψ(k+2))`
fn small_argument_series(x: f64) -> (f64, f64) {
    let t = 0.25 * x * x;
    let log_half = (0.5 * x).ln();
    let mut term0 = 1.0;
    let mut term1 = 1.0;
    let mut harmonic = 0.0;
    let mut k0 = 0.0;
    let mut s1 = 0.0;
    for k in 0..64 {
        let psi1 = harmonic - EULER_GAMMA;
        let psi2 = psi1 + 1.0 / (k as f64 + 1.0);
        k0 += term0 * (harmonic - log_half - EULER_GAMMA);
        s1 += term1 * (2.0 * log_half - psi1 - psi2);
        let scale = 1.0 + log_half.abs() + harmonic;
        if term0 * scale <= 1e-17 * k0.abs() && term1 * scale <= 1e-17 * s1.abs() {
            break;
        }
        let kf = k as f64 + 1.0;
        term0 *= t / (kf * kf);
        term1 *= t / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
    }
    (k0, 1.0 + t * s1)
}

/// Steed's method for the CF2 continued fraction (Temme's normalization),
/// specialised to order 0. Returns `(K_0(x), K_1(x))`, valid for `x ≳ 2`.
fn steed_continued_fraction(x: f64) -> (f64, f64) {
    const MAX_ITER: usize = 10_000;
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < f64::EPSILON * 0.5 {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// `K_ν(x) ~ sqrt(π/(2x)) e^{-x} Σ_k Π_{j≤k} (4ν² − (2j−1)²) / (k! (8x)^k)`.
fn asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0f64;
    let mut sum = 1.0;
    for k in 1..64 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (FRAC_PI_2 / x).sqrt() * (-x).exp() * sum
}

/// `φ_ν(r) = r^ν K_ν(r)`, extended to `r = 0` by `φ_ν(0) = 2^{ν−1} Γ(ν)` for ν > 0.
pub fn matern_profile(order: HalfOrder, r: f64) -> Result<f64> {
    order.check_supported()?;
    if !(r >= 0.0) {
        return Err(KansaError::Domain(format!("φ_ν requires r ≥ 0, got {r}")));
    }
    if order.twice() == 0 && r == 0.0 {
        return Err(KansaError::SingularProfile);
    }
    Ok(profile_ladder(order, r)[2])
}

/// `[φ_{ν−2}(r), φ_{ν−1}(r), φ_ν(r)]` for `ν ≥ 2`, `r ≥ 0`.
///
/// At `r = 0` and `ν = 2` the first entry is `+∞`; callers multiply it by
/// squared offsets that vanish there.
pub(crate) fn matern_profile_triple(order: HalfOrder, r: f64) -> [f64; 3] {
    debug_assert!(order.twice() >= 4);
    profile_ladder(order, r)
}

/// Builds `φ` upward with `φ_{μ+1} = 2μ φ_μ + r² φ_{μ−1}`; every term is
/// non-negative so the recurrence loses no precision. Entries of the result
/// below the ladder start are NaN.
fn profile_ladder(order: HalfOrder, r: f64) -> [f64; 3] {
    if r > UNDERFLOW_ARGUMENT {
        return [0.0; 3];
    }
    // (φ_{μ−1}, r² φ_{μ−1}, φ_μ) at the ladder start μ.
    let (mut mu, mut below, mut below_scaled, mut current) = if order.is_integer() {
        if r == 0.0 {
            (1.0, f64::INFINITY, 0.0, 1.0)
        } else {
            let (phi0, phi1) = phi0_phi1(r);
            (1.0, phi0, r * r * phi0, phi1)
        }
    } else {
        let e = FRAC_PI_2.sqrt() * (-r).exp();
        let below = if r == 0.0 { f64::INFINITY } else { e / r };
        (0.5, below, r * e, e)
    };
    let target = order.value();
    if target < mu {
        // ν = 0 (integer) or ν = 1/2.
        return if order.is_integer() {
            [f64::NAN, f64::NAN, below]
        } else {
            [f64::NAN, f64::NAN, current]
        };
    }
    let mut below2 = f64::NAN;
    while mu < target {
        let next = 2.0 * mu * current + below_scaled;
        below2 = below;
        below = current;
        below_scaled = r * r * current;
        current = next;
        mu += 1.0;
    }
    [below2, below, current]
}
