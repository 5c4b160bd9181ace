use faer::{Mat, Side};
use kansa::kernels::Kernel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn families() -> Vec<Kernel> {
    vec![
        Kernel::matern_sobolev(3, 2).unwrap(),
        Kernel::matern_sobolev(4, 2).unwrap(),
        Kernel::matern_sobolev(6, 2).unwrap(),
        Kernel::matern_sobolev(4, 3).unwrap(),
        Kernel::gaussian(1.0, 2).unwrap(),
        Kernel::multiquadric(1.0, 2).unwrap(),
    ]
}

fn random_pair(rng: &mut ChaCha8Rng, dim: usize) -> (Vec<f64>, Vec<f64>) {
    loop {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let z: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let r = x.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if (0.05..=3.0).contains(&r) {
            return (x, z);
        }
    }
}

#[test]
fn jets_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-5;
    for k in families() {
        let dim = k.dim();
        for _ in 0..50 {
            let (x, z) = random_pair(&mut rng, dim);
            let jet = k.jet(&x, &z);
            let scale = jet.value().abs().max(1e-3);
            for i in 0..dim {
                let mut p = x.clone();
                let mut m = x.clone();
                p[i] += h;
                m[i] -= h;
                let g = (k.value(&p, &z) - k.value(&m, &z)) / (2.0 * h);
                assert!((g - jet.gradient()[i]).abs() <= 1e-5 * scale, "{k} gradient");
                for j in 0..dim {
                    let fd = (k.jet(&p, &z).gradient()[j] - k.jet(&m, &z).gradient()[j]) / (2.0 * h);
                    assert!((fd - jet.hessian(i, j)).abs() <= 1e-5 * scale, "{k} hessian {i}{j}");
                }
            }
        }
    }
}

#[test]
fn interpolation_matrices_are_positive_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in families().into_iter().filter(Kernel::is_positive_definite) {
        let dim = k.dim();
        let mut pts: Vec<Vec<f64>> = Vec::new();
        while pts.len() < 50 {
            let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let far = pts.iter().all(|q| {
                p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= 0.05
            });
            if far {
                pts.push(p);
            }
        }
        let a = Mat::from_fn(50, 50, |i, j| k.value(&pts[i], &pts[j]));
        for i in 0..50 {
            for j in 0..50 {
                assert_eq!(a[(i, j)], a[(j, i)]);
            }
        }
        let ev = a.self_adjoint_eigenvalues(Side::Lower).unwrap();
        assert!(ev[0] > 0.0, "{k}: smallest eigenvalue {}", ev[0]);
    }
}

proptest! {
    #[test]
    fn translation_invariance(
        x in prop::array::uniform2(-1.0f64..1.0),
        z in prop::array::uniform2(-1.0f64..1.0),
        t in prop::array::uniform2(-0.5f64..0.5),
    ) {
        for k in families().into_iter().filter(|k| k.dim() == 2) {
            let a = k.jet(&x, &z);
            let xs = [x[0] + t[0], x[1] + t[1]];
            let zs = [z[0] + t[0], z[1] + t[1]];
            let b = k.jet(&xs, &zs);
            // Shifting perturbs the offset by rounding only.
            let tol = 1e-12 * (1.0 + a.value().abs());
            prop_assert!((a.value() - b.value()).abs() <= tol);
            for i in 0..2 {
                prop_assert!((a.gradient()[i] - b.gradient()[i]).abs() <= tol);
                for j in 0..2 {
                    prop_assert!((a.hessian(i, j) - b.hessian(i, j)).abs() <= tol);
                }
            }
        }
    }
}
