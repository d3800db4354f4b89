use proptest::prelude::*;
use twomode::{
    build_drift_diffusion, check_stability, coefficients, decompose, derive_constants, rel_diff,
    solve_steady_state, symplectic_eigenvalues, SystemParams,
};

fn params_strategy() -> impl Strategy<Value = SystemParams> {
    (
        0.1f64..2.0,
        0.0f64..0.4,
        0.0f64..0.5,
        -4.6f64..0.0,
        -4.6f64..0.0,
        0.0f64..10.0,
        0.0f64..10.0,
    )
        .prop_map(|(delta, lambda, g, lk, lg, n1, n2)| SystemParams {
            delta,
            omega0: 1.0,
            lambda_drive: lambda,
            g_coupling: g,
            kappa: lk.exp(),
            gamma: lg.exp(),
            nbar1: n1,
            nbar2: n2,
        })
}

fn well_conditioned(p: &SystemParams) -> bool {
    let c = derive_constants(p).unwrap();
    c.eta > 1e-6 * c.delta_aux.powi(2) * c.gamma_aux_sq
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eta_sign_agrees_with_spectrum(p in params_strategy()) {
        let r = check_stability(&p).unwrap();
        prop_assume!(r.routh_hurwitz_eta.abs() > 1e-9 && r.max_real_eigenvalue.abs() > 1e-9);
        prop_assert_eq!(r.eta_agrees(&p), Some(true));
    }

    #[test]
    fn frequency_split_and_trace(p in params_strategy()) {
        let c = derive_constants(&p).unwrap();
        prop_assert!(((c.omega_plus - c.omega_minus) - 4.0 * p.lambda_drive).abs() < 1e-15);
        let dd = build_drift_diffusion(&p).unwrap();
        prop_assert!((dd.a_matrix.trace() + 2.0 * (p.kappa + p.gamma)).abs() < 1e-14);
    }

    #[test]
    fn stable_points_satisfy_all_identities(p in params_strategy()) {
        let r = check_stability(&p).unwrap();
        prop_assume!(r.stable && well_conditioned(&p));
        let dd = build_drift_diffusion(&p).unwrap();
        let s = solve_steady_state(&dd).unwrap();
        let cf = coefficients(&p).unwrap();
        let b = decompose(&p, &cf, &dd, &s).unwrap();

        prop_assert!(b.max_route_disagreement() < 1e-10, "{:?}", b);
        prop_assert!(b.satisfies_second_law());
        prop_assert!(cf.d1 > 0.0 && cf.a31 >= 0.0 && cf.a11 >= 0.0);
        prop_assert!(rel_diff(b.pi12(), b.pi21()) < 1e-10 || b.pi12().abs() < 1e-300);

        let (nu_p, nu_m) = symplectic_eigenvalues(&s).unwrap();
        prop_assert!(nu_m >= 0.5 - 1e-10 && nu_p >= nu_m);

        let (n1, n2) = (p.n1(), p.n2());
        let (s14, s23, s34) = cf.offdiag_covariances(n1, n2);
        for (closed, num) in [(s14, s.get(0, 3)), (s23, s.get(1, 2)), (s34, s.get(2, 3))] {
            prop_assert!((closed - num).abs() <= 1e-10 * num.abs().max(1e-8), "{} vs {}", closed, num);
        }
    }

    #[test]
    fn onsager_part_is_non_negative(p in params_strategy()) {
        let r = check_stability(&p).unwrap();
        prop_assume!(r.stable && well_conditioned(&p));
        let dd = build_drift_diffusion(&p).unwrap();
        let s = solve_steady_state(&dd).unwrap();
        let b = decompose(&p, &coefficients(&p).unwrap(), &dd, &s).unwrap();
        prop_assert!(b.pi1 >= -1e-10 * b.pi0.abs().max(1.0));
        if p.n1() != p.n2() && p.g_coupling > 0.0 {
            prop_assert_eq!((b.j12 + b.jp12).signum(), (p.n1() - p.n2()).signum());
        }
    }
}
