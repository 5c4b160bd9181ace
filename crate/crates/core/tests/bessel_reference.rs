//! `K_ν` against two independent oracles: a 50-digit mpmath table
//! (`data/gen_bessel_reference.py`) and direct quadrature of
//! `K_ν(x) = ∫₀^∞ e^{−x cosh t} cosh(νt) dt`.

use kansa::special_functions::{bessel_k, matern_profile, HalfOrder};

fn reference_rows() -> Vec<(u32, f64, f64)> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/bessel_k_reference.csv");
    let mut reader = csv::Reader::from_path(path).expect("reference table");
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn matches_high_precision_table() {
    let rows = reference_rows();
    assert_eq!(rows.len(), 13 * 24);
    for (twice, x, want) in rows {
        let got = bessel_k(HalfOrder::from_twice(twice), x).unwrap();
        let rel = ((got - want) / want).abs();
        assert!(rel <= 1e-12, "K_{}({x}) = {got}, want {want} (rel {rel:.2e})", twice as f64 / 2.0);
    }
}

/// Trapezoid rule on `[0, T]`; the integrand decays double-exponentially so
/// the rule converges geometrically.
fn quadrature_k(nu: f64, x: f64) -> f64 {
    let upper = ((40.0 + nu * 8.0) / x).ln().max(1.0).acosh().max(1.0) + 2.0;
    let upper = upper.max((60.0 / x + 1.0).acosh() + 1.0);
    let n = 20_000;
    let h = upper / n as f64;
    let f = |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh();
    let mut sum = 0.5 * (f(0.0) + f(upper));
    for i in 1..n {
        sum += f(i as f64 * h);
    }
    sum * h
}

#[test]
fn matches_quadrature() {
    for twice in 0..=10u32 {
        let nu = twice as f64 / 2.0;
        for x in [0.3, 0.9, 1.5, 2.5, 5.0, 11.0, 20.0, 35.0] {
            let want = quadrature_k(nu, x);
            let got = bessel_k(HalfOrder::from_twice(twice), x).unwrap();
            let rel = ((got - want) / want).abs();
            assert!(rel <= 1e-11, "K_{nu}({x}) = {got}, quadrature {want} (rel {rel:.2e})");
        }
    }
}

#[test]
fn profile_matches_table_scaled() {
    for (twice, x, k) in reference_rows() {
        if twice < 4 || x < 1e-3 {
            continue;
        }
        let nu = twice as f64 / 2.0;
        let got = matern_profile(HalfOrder::from_twice(twice), x).unwrap();
        let want = x.powf(nu) * k;
        assert!(((got - want) / want).abs() <= 1e-12, "phi_{nu}({x})");
    }
}

#[test]
fn recurrence_on_the_documented_range() {
    for n in 1..=8u32 {
        let nu = n as f64;
        let mut x: f64 = 0.01;
        while x <= 30.0 {
            let k = |m: u32| bessel_k(HalfOrder::integer(m), x).unwrap();
            let rhs = k(n - 1) + 2.0 * nu / x * k(n);
            assert!(((k(n + 1) - rhs) / rhs).abs() <= 1e-10, "n={n}, x={x}");
            x *= 1.37;
        }
    }
}
