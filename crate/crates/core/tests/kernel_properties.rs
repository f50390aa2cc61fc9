use polymer2d::disorder::{lambda, sigma};
use polymer2d::kernel::{heat_kernel, is_reachable, replica_overlap, srw_prob};
use polymer2d::{make_coupling, DisorderLaw, LatticePoint};
use proptest::prelude::*;

fn cone_sum(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let r = n as i64;
    let mut s = 0.0;
    for x1 in -r..=r {
        for x2 in -r..=r {
            s += f(srw_prob(n, LatticePoint::new(x1, x2)));
        }
    }
    s
}

proptest! {
    #[test]
    fn kernel_is_symmetric(n in 0usize..200, x1 in -60i64..60, x2 in -60i64..60) {
        let z = LatticePoint::new(x1, x2);
        let q: f64 = srw_prob(n, z);
        prop_assert_eq!(q, srw_prob::<f64>(n, -z));
        prop_assert_eq!(q, srw_prob::<f64>(n, LatticePoint::new(x2, x1)));
        prop_assert_eq!(q, srw_prob::<f64>(n, LatticePoint::new(-x1, x2)));
    }

    #[test]
    fn kernel_vanishes_off_the_cone(n in 0usize..200, x1 in -250i64..250, x2 in -250i64..250) {
        let z = LatticePoint::new(x1, x2);
        let q: f64 = srw_prob(n, z);
        prop_assert_eq!(q > 0.0, is_reachable(n, z));
        if !is_reachable(n, z) {
            prop_assert_eq!(q, 0.0);
        }
    }

    #[test]
    fn kernel_is_normalized(n in 1usize..=64) {
        prop_assert!((cone_sum(n, |q| q) - 1.0).abs() < 1e-12);
        let ret: f64 = srw_prob(2 * n, LatticePoint::ORIGIN);
        prop_assert!((cone_sum(n, |q| q * q) - ret).abs() < 1e-12);
    }

    #[test]
    fn chapman_kolmogorov(n in 1usize..20, m in 1usize..20, x1 in -10i64..10, x2 in -10i64..10) {
        let z = LatticePoint::new(x1, x2);
        let r = n as i64;
        let mut s = 0.0;
        for y1 in -r..=r {
            for y2 in -r..=r {
                let y = LatticePoint::new(y1, y2);
                s += srw_prob::<f64>(n, y) * srw_prob::<f64>(m, z - y);
            }
        }
        prop_assert!((s - srw_prob::<f64>(n + m, z)).abs() < 1e-14);
    }

    #[test]
    fn heat_kernel_scaling(t in 0.01f64..10.0, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let lhs = heat_kernel(t, [a, b]).unwrap();
        let s = t.sqrt();
        let rhs = heat_kernel(1.0, [a / s, b / s]).unwrap() / t;
        prop_assert!((lhs / rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_is_positive_and_lambda_even(beta in 1e-4f64..2.0) {
        for law in [DisorderLaw::Gaussian, DisorderLaw::Rademacher] {
            prop_assert!(sigma(law, beta) > 0.0);
            prop_assert!((lambda(law, beta) - lambda(law, -beta)).abs() < 1e-15);
        }
    }

    #[test]
    fn coupling_invariants(beta_hat in 0.01f64..0.99, k in 0u32..15) {
        let n = 1usize << k;
        for law in [DisorderLaw::Gaussian, DisorderLaw::Rademacher] {
            let c = make_coupling(law, beta_hat, n).unwrap();
            let r = replica_overlap::<f64>(n).unwrap().value;
            prop_assert!((c.beta - beta_hat / r.sqrt()).abs() < 1e-15);
            let s2 = (lambda(law, 2.0 * c.beta) - 2.0 * lambda(law, c.beta)).exp_m1();
            prop_assert!((c.sigma_sq() - s2).abs() <= 1e-15 * s2);
        }
    }
}

#[test]
fn heat_kernel_examples() {
    assert!((heat_kernel(0.5, [0.0, 0.0]).unwrap() - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
    assert!((heat_kernel(1.0f64, [1.0, 0.0]).unwrap() - 0.0965323526).abs() < 1e-10);
    assert!(heat_kernel(0.0, [0.0, 0.0]).is_err());
}

#[test]
fn overlap_increases_and_coupling_decreases() {
    let mut prev_r = 0.0;
    let mut prev_beta = f64::INFINITY;
    for k in 6..=14 {
        let n = 1usize << k;
        let r = replica_overlap::<f64>(n).unwrap().value;
        let c = make_coupling(DisorderLaw::Gaussian, 0.5, n).unwrap();
        assert!(r > prev_r);
        assert!(c.beta < prev_beta);
        prev_r = r;
        prev_beta = c.beta;
    }
}

#[test]
fn sigma_ratio_tends_to_one_along_ladder() {
    for law in [DisorderLaw::Gaussian, DisorderLaw::Rademacher] {
        let gaps: Vec<f64> = [1usize << 6, 1 << 10, 1 << 14]
            .iter()
            .map(|&n| {
                let c = make_coupling::<f64>(law, 0.5, n).unwrap();
                (c.sigma_sq().sqrt() / c.beta - 1.0).abs()
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{law:?} {gaps:?}");
    }
}
