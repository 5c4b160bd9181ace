use kansa::analysis::{error_from_jets, evaluate_expansion, fit_rate};
use kansa::geometry::{closed_grid, Domain, Location, PointSet};
use kansa::jet::Jet;
use kansa::kernels::Kernel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn expansion_jets_match_finite_differences() {
    let d = Domain::reference_square();
    let centers = closed_grid(&d, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let coeffs: Vec<f64> = (0..centers.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let kernel = Kernel::matern_sobolev(4, 2).unwrap();
    let h = 1e-5;
    for _ in 0..30 {
        let x = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
        let mut probes = vec![x.to_vec()];
        for i in 0..2 {
            for s in [h, -h] {
                let mut p = x.to_vec();
                p[i] += s;
                probes.push(p);
            }
        }
        let set = PointSet::from_points(d.clone(), Location::Closure, &probes).unwrap();
        let jets = evaluate_expansion(&kernel, &centers, &coeffs, &set);
        let scale = 1.0 + jets[0].value().abs();
        for i in 0..2 {
            let (p, m) = (&jets[1 + 2 * i], &jets[2 + 2 * i]);
            let g = (p.value() - m.value()) / (2.0 * h);
            assert!((g - jets[0].gradient()[i]).abs() <= 1e-5 * scale);
            for j in 0..2 {
                let fd = (p.gradient()[j] - m.gradient()[j]) / (2.0 * h);
                assert!((fd - jets[0].hessian(i, j)).abs() <= 1e-5 * scale);
            }
        }
    }
}

fn jet_strategy() -> impl Strategy<Value = Jet> {
    (-2.0f64..2.0, prop::array::uniform2(-2.0f64..2.0), prop::array::uniform4(-2.0f64..2.0))
        .prop_map(|(v, g, h)| Jet::from_parts(v, &g, &h))
}

proptest! {
    #[test]
    fn fit_rate_ignores_scale_and_order(
        rate in 0.5f64..6.0,
        c in 1e-3f64..1e3,
        hs in prop::collection::vec(0.01f64..0.5, 3..8),
        scale_h in 0.1f64..10.0,
        rotate in 0usize..8,
    ) {
        let mut hs = hs;
        hs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        hs.dedup_by(|a, b| (*a / *b - 1.0).abs() < 1e-3);
        prop_assume!(hs.len() >= 2);
        let pairs: Vec<(f64, f64)> = hs.iter().map(|&h| (h, c * h.powf(rate))).collect();
        let base = fit_rate(&pairs).unwrap();
        prop_assert!((base - rate).abs() <= 1e-8);
        let scaled: Vec<(f64, f64)> = pairs.iter().map(|&(h, e)| (h * scale_h, 7.0 * e)).collect();
        prop_assert!((fit_rate(&scaled).unwrap() - base).abs() <= 1e-8);
        let mut rotated = pairs.clone();
        let n = rotated.len();
        rotated.rotate_left(rotate % n);
        prop_assert!((fit_rate(&rotated).unwrap() - base).abs() <= 1e-10);
    }

    #[test]
    fn errors_are_absolutely_homogeneous(
        exact in prop::collection::vec(jet_strategy(), 1..12),
        delta in prop::collection::vec(jet_strategy(), 12),
        c in -5.0f64..5.0,
    ) {
        let n = exact.len();
        let zero: Vec<Jet> = (0..n).map(|_| Jet::zero(2)).collect();
        let approx: Vec<Jet> = exact.iter().zip(&delta).map(|(e, d)| e.clone() + d.scale(c)).collect();
        let unit = error_from_jets(&delta[..n], &zero).unwrap();
        let report = error_from_jets(&approx, &exact).unwrap();
        let tol = 1e-12 * (1.0 + exact.iter().map(|j| j.value().abs()).fold(0.0, f64::max)) * 10.0;
        prop_assert!((report.l2 - c.abs() * unit.l2).abs() <= tol * (1.0 + c.abs()));
        prop_assert!((report.h2 - c.abs() * unit.h2).abs() <= tol * 10.0 * (1.0 + c.abs()));
    }
}
