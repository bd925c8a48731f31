mod common;

use nalgebra::{Complex, DMatrix, DVector};
use pdmd_core::{make_random_polylpv, Error, PolyLpvModel, ReducedModel, ThetaScale};
use proptest::prelude::*;

use common::{gaussian_matrix, gaussian_signal, gaussian_vector, rng, uniform_theta};

fn scalar_model(a: f64, b: f64, dt: f64) -> PolyLpvModel<f64> {
    PolyLpvModel::new(
        vec![DMatrix::from_element(1, 1, a)],
        vec![DMatrix::from_element(1, 1, b)],
        DMatrix::identity(1, 1),
        ThetaScale::identity(),
        dt,
    )
    .unwrap()
}

fn random_model(seed: u64, n_x: usize, n_u: usize, n_y: usize, n_p: usize, scale: ThetaScale) -> PolyLpvModel<f64> {
    let mut r = rng(seed);
    let a = (0..=n_p).map(|_| gaussian_matrix(&mut r, n_x, n_x) * 0.2).collect();
    let b = (0..=n_p).map(|_| gaussian_matrix(&mut r, n_x, n_u)).collect();
    PolyLpvModel::new(a, b, gaussian_matrix(&mut r, n_y, n_x), scale, 0.1).unwrap()
}

#[test]
fn hand_recursion() {
    let m = scalar_model(0.5, 1.0, 1.0);
    let u: Vec<_> = [1.0, 0.0, 0.0].iter().map(|&v| DVector::from_element(1, v)).collect();
    let traj = m.simulate(&u, &[0.0; 3], &DVector::zeros(1)).unwrap();
    let xs: Vec<f64> = traj.states.iter().map(|x| x[0]).collect();
    assert_eq!(xs, vec![0.0, 1.0, 0.5, 0.25]);
    assert_eq!(traj.theta, vec![0.0; 3]);
    assert!(m.simulate(&u, &[0.0; 2], &DVector::zeros(1)).is_err());
    assert!(m.simulate(&u, &[0.0; 3], &DVector::zeros(2)).is_err());
}

#[test]
fn midpoint_of_range_gives_constant_term() {
    let scale = ThetaScale::from_range(2.0, 6.0).unwrap();
    let m = random_model(3, 3, 2, 2, 3, scale);
    let (a, b) = m.eval_at(4.0).unwrap();
    assert_eq!(a, m.a_coeffs()[0]);
    assert_eq!(b, m.b_coeffs()[0]);
    assert!(m.eval_at(f64::NAN).is_err());
}

#[test]
fn frequency_response_examples() {
    // G = b / (z - a); z = -1 at Nyquist.
    let dt = 0.01;
    let m = scalar_model(0.5, 2.0, dt);
    let nyq = std::f64::consts::PI / dt;
    let fr = m.frequency_response(0.0, &[1e-6, nyq]).unwrap();
    assert!((fr.g[0][(0, 0)] - Complex::new(4.0, 0.0)).norm() < 1e-6);
    assert!((fr.g[1][(0, 0)] - Complex::new(-2.0 / 1.5, 0.0)).norm() < 1e-12);

    for bad in [vec![0.0], vec![-1.0], vec![2.0 * nyq], vec![2.0, 1.0], vec![1.0, 1.0]] {
        let err = m.frequency_response(0.0, &bad).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{bad:?}: {err}");
    }
}

#[test]
fn pole_on_unit_circle_is_singular() {
    let dt = 0.1;
    let w0: f64 = 3.0;
    let (c, s) = ((w0 * dt).cos(), (w0 * dt).sin());
    let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let m = PolyLpvModel::new(vec![rot], vec![DMatrix::from_element(2, 1, 1.0)], DMatrix::identity(2, 2), ThetaScale::identity(), dt)
        .unwrap();
    let err = m.frequency_response(0.0, &[1.0, w0]).unwrap_err();
    assert!(matches!(err, Error::Singular { .. }), "{err}");
    assert!(m.frequency_response(0.0, &[1.0, 2.0]).is_ok());
}

#[test]
fn sinusoid_settles_to_frequency_response() {
    let m = random_model(5, 3, 1, 2, 1, ThetaScale::identity());
    let th = 0.3;
    assert!(m.eigenvalues_at(th).unwrap().spectral_radius < 0.9);
    let w = 2.0;
    let n = 600;
    let u: Vec<_> = (0..n).map(|k| DVector::from_element(1, (w * k as f64 * m.dt()).cos())).collect();
    let traj = m.simulate(&u, &vec![th; n], &DVector::zeros(3)).unwrap();
    let g = &m.frequency_response(th, &[w]).unwrap().g[0];
    for k in n - 20..n {
        let phasor = Complex::new(0.0, w * k as f64 * m.dt()).exp();
        for i in 0..2 {
            let expect = (g[(i, 0)] * phasor).re;
            assert!((traj.outputs[k][i] - expect).abs() < 1e-3, "k={k}: {} vs {expect}", traj.outputs[k][i]);
        }
    }
}

#[test]
fn continuous_equivalent_of_exponential() {
    let dt = 0.02;
    let m = scalar_model((-3.0f64 * dt).exp(), 1.0, dt);
    let spec = m.eigenvalues_at(0.0).unwrap();
    let s = spec.continuous_equivalent(dt);
    assert!((s[0] - Complex::new(-3.0, 0.0)).norm() < 1e-10);
    assert!(spec.stable);
    assert!(!scalar_model(1.0, 1.0, dt).eigenvalues_at(0.0).unwrap().stable);
}

#[test]
fn eigenvalue_examples() {
    let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![0.2, -0.9, 0.5]));
    let m = PolyLpvModel::new(vec![diag], vec![DMatrix::zeros(3, 1)], DMatrix::identity(3, 3), ThetaScale::identity(), 1.0).unwrap();
    let spec = m.eigenvalues_at(0.0).unwrap();
    let mods: Vec<f64> = spec.eigenvalues.iter().map(|l| l.norm()).collect();
    assert!((mods[0] - 0.9).abs() < 1e-12 && (mods[1] - 0.5).abs() < 1e-12 && (mods[2] - 0.2).abs() < 1e-12);
    assert!((spec.spectral_radius - 0.9).abs() < 1e-12);
}

#[test]
fn reduced_state_maps() {
    let mut r = rng(12);
    let basis = gaussian_matrix(&mut r, 6, 3).qr().q();
    let full = random_model(13, 6, 1, 6, 1, ThetaScale::identity());
    let rom = ReducedModel::new(pdmd_core::reduce(&full, &basis).unwrap().model().clone(), basis.clone()).unwrap();
    let z = gaussian_vector(&mut r, 3);
    let back = rom.project_state(&rom.lift_state(&z).unwrap()).unwrap();
    assert!((back - &z).amax() < 1e-12);
    // Components orthogonal to the basis are dropped.
    let x = gaussian_vector(&mut r, 6);
    let p = rom.lift_state(&rom.project_state(&x).unwrap()).unwrap();
    assert!((basis.transpose() * (&x - &p)).amax() < 1e-12);
    assert!(rom.project_state(&DVector::zeros(5)).is_err());
    assert!(rom.lift_state(&DVector::zeros(6)).is_err());
}

#[test]
fn scheduled_simulation_records_theta() {
    let m = scalar_model(0.5, 1.0, 1.0);
    let u = vec![DVector::from_element(1, 1.0); 4];
    let traj = m.simulate_with(&u, &DVector::zeros(1), |k, z| Ok(k as f64 + z[0])).unwrap();
    assert_eq!(traj.theta, vec![0.0, 2.0, 3.5, 4.75]);
    let err = m.simulate_with(&u, &DVector::zeros(1), |k, _| if k == 2 { Err(Error::Numerical("stop".into())) } else { Ok(0.0) });
    assert!(err.is_err());
    let blow = scalar_model(1e200, 1.0, 1.0);
    let err = blow.simulate(&u, &[0.0; 4], &DVector::from_element(1, 1e200)).unwrap_err();
    assert!(matches!(err, Error::Diverged { step: 1, .. }), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn horner_matches_naive_sum(seed in 0u64..10_000, n_p in 0usize..5, th in -2.0f64..2.0, lo in -3.0f64..0.0, w in 0.1f64..4.0) {
        let scale = ThetaScale::from_range(lo, lo + w).unwrap();
        let m = random_model(seed, 3, 2, 1, n_p, scale);
        let t = scale.normalize(th);
        let mut a = DMatrix::zeros(3, 3);
        let mut b = DMatrix::zeros(3, 2);
        for i in 0..=n_p {
            a += &m.a_coeffs()[i] * t.powi(i as i32);
            b += &m.b_coeffs()[i] * t.powi(i as i32);
        }
        let (ha, hb) = m.eval_at(th).unwrap();
        prop_assert!((ha - &a).amax() <= 1e-12 * a.amax().max(1.0));
        prop_assert!((hb - &b).amax() <= 1e-12 * b.amax().max(1.0));
    }

    #[test]
    fn simulation_is_linear_in_input_and_state(seed in 0u64..10_000, alpha in -3.0f64..3.0) {
        let m = random_model(seed, 4, 2, 3, 2, ThetaScale::identity());
        let mut r = rng(seed + 1);
        let n = 30;
        let th = uniform_theta(&mut r, n);
        let u1 = gaussian_signal(&mut r, 0.1, n, 2);
        let u2 = gaussian_signal(&mut r, 0.1, n, 2);
        let (x1, x2) = (gaussian_vector(&mut r, 4), gaussian_vector(&mut r, 4));
        let t1 = m.simulate(u1.samples(), &th, &x1).unwrap();
        let t2 = m.simulate(u2.samples(), &th, &x2).unwrap();
        let mix = u1.samples().iter().zip(u2.samples()).map(|(a, b)| a * alpha + b).collect::<Vec<_>>();
        let t3 = m.simulate(&mix, &th, &(&x1 * alpha + &x2)).unwrap();
        for k in 0..=n {
            let expect = &t1.outputs[k] * alpha + &t2.outputs[k];
            prop_assert!((&t3.outputs[k] - &expect).amax() <= 1e-10 * expect.amax().max(1.0));
        }
    }

    #[test]
    fn eigenvalues_satisfy_invariants(seed in 0u64..10_000, n in 1usize..7, th in -1.0f64..1.0) {
        let m = random_model(seed, n, 1, 1, 2, ThetaScale::identity());
        let (a, _) = m.eval_at(th).unwrap();
        let spec = m.eigenvalues_at(th).unwrap();
        prop_assert_eq!(spec.eigenvalues.len(), n);
        prop_assert!(spec.eigenvalues.windows(2).all(|w| w[0].norm() >= w[1].norm() - 1e-12));
        let ac = a.map(|v| Complex::new(v, 0.0));
        let scale = a.norm().max(1.0);
        let mut sum = Complex::new(0.0, 0.0);
        let mut prod = Complex::new(1.0, 0.0);
        for l in &spec.eigenvalues {
            let shifted = &ac - DMatrix::<Complex<f64>>::identity(n, n) * *l;
            let smin = shifted.singular_values().min();
            prop_assert!(smin <= 1e-9 * scale, "sigma_min {smin}");
            sum += l;
            prod *= l;
        }
        prop_assert!((sum - Complex::new(a.trace(), 0.0)).norm() <= 1e-9 * scale);
        prop_assert!((prod - Complex::new(a.determinant(), 0.0)).norm() <= 1e-9 * scale.powi(n as i32));
    }

    #[test]
    fn frozen_response_is_resolvent_and_conjugate_symmetric(seed in 0u64..10_000, th in -1.0f64..1.0, w in 0.05f64..31.0) {
        let m = random_model(seed, 4, 2, 3, 1, ThetaScale::identity());
        let fr = match m.frequency_response(th, &[w]) {
            Ok(fr) => fr,
            Err(Error::Singular { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let (a, b) = m.eval_at(th).unwrap();
        let zc = Complex::new(0.0, w * m.dt()).exp();
        let res = (DMatrix::<Complex<f64>>::identity(4, 4) * zc - a.map(|v| Complex::new(v, 0.0))).try_inverse().unwrap();
        let g = m.c().map(|v| Complex::new(v, 0.0)) * res * b.map(|v| Complex::new(v, 0.0));
        prop_assert!((&fr.g[0] - &g).norm() <= 1e-9 * g.norm().max(1.0));
        // G(-w) = conj(G(w)) for real coefficients.
        let res_neg = (DMatrix::<Complex<f64>>::identity(4, 4) * zc.conj() - a.map(|v| Complex::new(v, 0.0))).try_inverse().unwrap();
        let g_neg = m.c().map(|v| Complex::new(v, 0.0)) * res_neg * b.map(|v| Complex::new(v, 0.0));
        prop_assert!((g_neg - fr.g[0].conjugate()).norm() <= 1e-9 * g.norm().max(1.0));
    }

    #[test]
    fn frozen_simulation_is_convolution(seed in 0u64..10_000, th in -1.0f64..1.0) {
        let m = random_model(seed, 3, 2, 2, 2, ThetaScale::identity());
        let (a, b) = m.eval_at(th).unwrap();
        let mut r = rng(seed + 2);
        let n = 25;
        let u = gaussian_signal(&mut r, 0.1, n, 2);
        let x0 = gaussian_vector(&mut r, 3);
        let traj = m.simulate(u.samples(), &vec![th; n], &x0).unwrap();
        let powers: Vec<DMatrix<f64>> = std::iter::successors(Some(DMatrix::identity(3, 3)), |p| Some(&a * p)).take(n + 1).collect();
        for k in 0..=n {
            let mut y = m.c() * &powers[k] * &x0;
            for j in 0..k {
                y += m.c() * &powers[k - 1 - j] * &b * &u.samples()[j];
            }
            prop_assert!((&traj.outputs[k] - &y).amax() <= 1e-8 * y.amax().max(1.0));
        }
    }
}

#[test]
fn random_plant_trajectory_is_bounded() {
    let plant = make_random_polylpv::<f64>(4, 1, 2, 0.9, 77).unwrap();
    let m = plant.as_poly_lpv().unwrap();
    let mut r = rng(78);
    let th = uniform_theta(&mut r, 1000);
    let u = gaussian_signal(&mut r, m.dt(), 1000, 1);
    let traj = m.simulate(u.samples(), &th, &DVector::zeros(4)).unwrap();
    assert!(traj.states.iter().all(|x| x.amax() < 1e3));
}
