mod common;

use nalgebra::DVector;
use pdmd_core::{build_lifted, build_lifted_scaled, lift_vector, theta_powers, ThetaScale};
use proptest::prelude::*;

use common::{random_ensemble, rng};

#[test]
fn lift_examples() {
    let v = DVector::from_vec(vec![1.0, 3.0]);
    assert_eq!(lift_vector(&v, 2.0, 1).unwrap().as_slice(), &[1.0, 3.0, 2.0, 6.0]);
    assert_eq!(lift_vector(&v, 0.0, 2).unwrap().as_slice(), &[1.0, 3.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(lift_vector(&DVector::from_element(1, 5.0), -7.3, 0).unwrap().as_slice(), &[5.0]);
    assert!(lift_vector(&v, f64::NAN, 1).is_err());
    assert!(lift_vector(&DVector::<f64>::zeros(0), 1.0, 1).is_err());
    assert_eq!(theta_powers(-0.5, 2).unwrap().as_slice(), &[-0.5, 0.25]);
}

#[test]
fn zero_order_has_empty_kronecker_blocks() {
    let mut r = rng(3);
    let ens = random_ensemble(&mut r, 3, 2, 10);
    let data = build_lifted(&ens, 0).unwrap();
    assert_eq!(data.xkr.nrows(), 0);
    assert_eq!(data.ukr.nrows(), 0);
    assert_eq!(data.regressor().nrows(), 5);
}

#[test]
fn normalized_lifting_uses_scaled_theta() {
    let mut r = rng(5);
    let ens = random_ensemble(&mut r, 2, 1, 20).map_theta(|t| 10.0 * t);
    let scale = ThetaScale::fit(ens.theta()).unwrap();
    let data = build_lifted_scaled(&ens, 2, scale).unwrap();
    for k in 0..ens.len() {
        let tn = scale.normalize(ens.theta()[k]);
        assert!(tn.abs() <= 1.0 + 1e-15);
        let expect = lift_vector(&ens.states()[k], tn, 2).unwrap();
        assert_eq!(data.xkr.column(k), expect.rows(2, 4));
    }
}

proptest! {
    #[test]
    fn lift_matches_brute_force(
        v in prop::collection::vec(-10.0f64..10.0, 1..6),
        theta in -3.0f64..3.0,
        n_p in 0usize..5,
    ) {
        let lifted = lift_vector(&DVector::from_vec(v.clone()), theta, n_p).unwrap();
        prop_assert_eq!(lifted.len(), (n_p + 1) * v.len());
        for p in 0..=n_p {
            for (j, vj) in v.iter().enumerate() {
                let expect = theta.powi(p as i32) * vj;
                let got = lifted[p * v.len() + j];
                prop_assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn columns_are_lifted_snapshots(seed in 0u64..1000, n_x in 1usize..5, n_u in 1usize..3, n_d in 1usize..15, n_p in 0usize..4) {
        let mut r = rng(seed);
        let ens = random_ensemble(&mut r, n_x, n_u, n_d);
        let data = build_lifted(&ens, n_p).unwrap();
        prop_assert_eq!(data.regressor().nrows(), (n_p + 1) * (n_x + n_u));
        for k in 0..n_d {
            let th = ens.theta()[k];
            let lx = lift_vector(&ens.states()[k], th, n_p).unwrap();
            let lu = lift_vector(&ens.inputs()[k], th, n_p).unwrap();
            prop_assert_eq!(data.x.column(k), lx.rows(0, n_x));
            prop_assert_eq!(data.xkr.column(k), lx.rows(n_x, n_p * n_x));
            prop_assert_eq!(data.u.column(k), lu.rows(0, n_u));
            prop_assert_eq!(data.ukr.column(k), lu.rows(n_u, n_p * n_u));
            prop_assert_eq!(data.xplus.column(k), ens.states()[k + 1].column(0));
        }
    }

    #[test]
    fn split_and_concat_is_invariant(seed in 0u64..1000, n_d in 2usize..20, cut_frac in 0.05f64..0.95, n_p in 0usize..4) {
        let mut r = rng(seed);
        let ens = random_ensemble(&mut r, 3, 2, n_d);
        let cut = ((n_d as f64 * cut_frac) as usize).clamp(1, n_d - 1);
        let (head, tail) = ens.split_at(cut).unwrap();
        let whole = build_lifted(&ens, n_p).unwrap();
        let joined = build_lifted(&head, n_p).unwrap().hconcat(&build_lifted(&tail, n_p).unwrap()).unwrap();
        prop_assert_eq!(whole, joined);
    }

    #[test]
    fn scale_round_trips(lo in -50.0f64..50.0, width in 1e-3f64..100.0, t in 0.0f64..1.0) {
        let s = ThetaScale::from_range(lo, lo + width).unwrap();
        let theta = lo + t * width;
        let n = s.normalize(theta);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&n));
        prop_assert!((s.denormalize(n) - theta).abs() <= 1e-12 * theta.abs().max(width));
    }
}
