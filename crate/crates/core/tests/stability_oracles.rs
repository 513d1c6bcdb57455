mod common;

use hotrack::cli::scenario_file::load_scenario;
use hotrack::observers::GainSet;
use hotrack::stability::{
    build_error_matrices, check_theorem1, check_theorem2, eigenvalues, hurwitz, lyapunov_residual, lyapunov_solve,
    self_observer_polynomial, spectra_match, theorem1_polynomials, theorem2_polynomial, tracking_polynomial,
    RealPolynomial, StabilityError, Verdict, HURWITZ_MARGIN,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{kronecker_lyapunov, random_hurwitz, random_polynomial, random_topology, routh_hurwitz, scenario_path};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn companion_verdict_matches_routh_table(seed in any::<u64>()) {
        let (coefficients, truth) = random_polynomial(&mut ChaCha8Rng::seed_from_u64(seed), 8);
        let v = hurwitz(&RealPolynomial::new(coefficients.clone()).unwrap(), HURWITZ_MARGIN).unwrap();
        prop_assert_eq!(v.stable, routh_hurwitz(&coefficients));
        prop_assert_eq!(v.stable, truth);
    }

    #[test]
    fn roots_are_zeros(seed in any::<u64>()) {
        let (coefficients, _) = random_polynomial(&mut ChaCha8Rng::seed_from_u64(seed), 8);
        let p = RealPolynomial::new(coefficients).unwrap();
        for z in p.roots().unwrap() {
            let scale: f64 = p.coefficients().iter().map(|c| c.abs()).sum::<f64>() * z.norm().max(1.0).powi(p.degree() as i32);
            prop_assert!(p.eval(z).norm() < 1e-9 * scale);
        }
    }

    #[test]
    fn lyapunov_matches_kronecker_oracle(seed in any::<u64>(), eta in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=8);
        let f = random_hurwitz(&mut rng, n);
        let q = lyapunov_solve(&f, eta).unwrap();
        let oracle = kronecker_lyapunov(&f, eta);
        prop_assert!((&q - &oracle).norm() < 1e-8 * oracle.norm());
        prop_assert!(lyapunov_residual(&f, &q, eta) < 1e-8 * q.norm());
    }

    #[test]
    fn lyapunov_scales_inversely(seed in any::<u64>(), alpha in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=8);
        let f = random_hurwitz(&mut rng, n);
        let q = lyapunov_solve(&f, 1.0).unwrap();
        let scaled = lyapunov_solve(&(&f * alpha), 1.0).unwrap();
        prop_assert!((scaled * alpha - &q).norm() < 1e-8 * q.norm());
    }

    #[test]
    fn unstable_matrices_are_rejected(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=8);
        let f = -random_hurwitz(&mut rng, n);
        prop_assert_eq!(lyapunov_solve(&f, 1.0), Err(StabilityError::NotHurwitz));
    }

    #[test]
    fn error_matrix_spectra_factor(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = rng.gen_range(3..=5);
        let n = rng.gen_range(1..=5);
        let t = random_topology(&mut rng, n);
        let gm = t.matrices();
        let mut g = || (0..l).map(|_| rng.gen_range(0.5..5.0)).collect::<Vec<f64>>();
        let gains = GainSet { k: g(), c0: g(), r: g()[1..].to_vec(), tau: vec![1.0; n], d0: vec![0.1; n] };
        let m = build_error_matrices(l, &gains, &gm.coupling).unwrap();
        let polys = theorem1_polynomials(&gains, &gm.eigenvalues);
        let union = |ps: &[RealPolynomial]| ps.iter().flat_map(|p| p.roots().unwrap()).collect::<Vec<_>>();
        prop_assert!(spectra_match(&eigenvalues(&m.f1), &union(&polys.leader_observer), 1e-6));
        prop_assert!(spectra_match(&eigenvalues(&m.f3), &union(&polys.tracking), 1e-6));
        let own = self_observer_polynomial(&gains.r).roots().unwrap();
        let repeated: Vec<_> = own.iter().flat_map(|z| std::iter::repeat_n(*z, n)).collect();
        prop_assert!(spectra_match(&eigenvalues(&m.f2), &repeated, 1e-5));
        let tracking: Vec<_> = theorem2_polynomial(&gains.k).roots().unwrap().into_iter()
            .flat_map(|z| std::iter::repeat_n(z, n)).collect();
        prop_assert!(spectra_match(&eigenvalues(&m.f6), &tracking, 1e-4));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectra_clause_holds_for_integer_gains(seed in any::<u64>()) {
        // Small integers often give repeated, defective roots such as (s + 1)^3.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=5);
        let mut g = |len: usize| (0..len).map(|_| f64::from(rng.gen_range(1u8..=3))).collect::<Vec<f64>>();
        let gains = GainSet { k: g(3), c0: g(3), r: g(2), tau: vec![1.0; n], d0: vec![0.1; n] };
        let t = hotrack::graph::Topology::chain(n).unwrap();
        let mut s = hotrack::sim::Scenario::new(hotrack::sim::Mode::Nonlinear, 3, t, gains);
        s.nonlinearity = hotrack::models::Nonlinearity::none(3);
        let report = check_theorem2(&s);
        prop_assert_eq!(report.clause("error_matrix_spectra").unwrap().verdict, Verdict::Pass, "{}", report.to_text());
    }
}

#[test]
fn tracking_polynomial_coefficients_by_hand() {
    // k = (2, 3, 4), λ = 0.5: s^3 + 4 s^2 + 3 s + 1.
    assert_eq!(tracking_polynomial(&[2.0, 3.0, 4.0], 0.5).coefficients(), &[1.0, 4.0, 3.0, 1.0]);
}

#[test]
fn lyapunov_on_repeated_block_spectrum() {
    let companion = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -3.0, -3.0, -3.0]);
    let f = companion.kronecker(&DMatrix::<f64>::identity(5, 5));
    let q = lyapunov_solve(&f, 1.0).unwrap();
    assert!((&q - kronecker_lyapunov(&f, 1.0)).norm() < 1e-8 * q.norm());
}

#[test]
fn scenario_file_verdicts() {
    let linear_limit = load_scenario(&scenario_path("linear_limit.toml")).unwrap();
    let report = check_theorem2(&linear_limit);
    assert!(report.clauses.iter().all(|c| c.verdict == Verdict::Pass), "{}", report.to_text());

    let mut defective = linear_limit.clone();
    defective.gains.k = vec![1.0, 3.0, 3.0];
    let report = check_theorem2(&defective);
    assert_eq!(report.clause("error_matrix_spectra").unwrap().verdict, Verdict::Pass);

    let unstable = load_scenario(&scenario_path("unstable_tracking_gains.toml")).unwrap();
    assert_eq!(check_theorem2(&unstable).failing(), vec!["tracking_polynomial"]);

    let nonlinear = load_scenario(&scenario_path("five_followers_nonlinear.toml")).unwrap();
    let report = check_theorem2(&nonlinear);
    for clause in ["tracking_polynomial", "leader_observer_lyapunov", "self_observer_lyapunov", "tracking_lyapunov"] {
        assert_eq!(report.clause(clause).unwrap().verdict, Verdict::Pass, "{clause}");
    }

    let equilibrium = load_scenario(&scenario_path("equilibrium.toml")).unwrap();
    assert!(check_theorem1(&equilibrium).passed());
}
