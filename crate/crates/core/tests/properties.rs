use std::sync::OnceLock;

use proptest::prelude::*;
use romkit_core::certify::{certificate, min_max_theta, residual_dual_norm_direct};
use romkit_core::greedy::{greedy_build, GreedyOptions, GreedyOutput};
use romkit_core::problem::{make_thermal_block, SamplingStrategy};
use romkit_core::reduced::rb_solve;
use romkit_core::sparse::dot2;
use romkit_core::truth::{solve_fom, GeneralizedEigenOracle};
use romkit_core::{AffineProblem, ParameterPoint};

struct Fixture {
    problem: AffineProblem,
    greedy: GreedyOutput,
    oracle: GeneralizedEigenOracle,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let problem = make_thermal_block(10, 2, 0.1, 10.0).unwrap();
        let train = problem.domain().sample(60, SamplingStrategy::Random, 21);
        let greedy = greedy_build(
            &problem,
            &train,
            &GreedyOptions {
                tol: 1e-4,
                n_max: 10,
                mu_1: None,
            },
        )
        .unwrap();
        let oracle = GeneralizedEigenOracle::new(&problem).unwrap();
        Fixture { problem, greedy, oracle }
    })
}

fn parameter() -> impl Strategy<Value = ParameterPoint> {
    prop::collection::vec(-1.0f64..=1.0, 4).prop_map(|t| ParameterPoint::new(t.into_iter().map(|t| 10f64.powf(t)).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn min_theta_brackets_the_exact_constants(mu in parameter()) {
        let f = fixture();
        let (theta, _) = f.problem.eval_thetas(&mu).unwrap();
        let (alpha_lb, gamma_ub) = min_max_theta(&theta, f.problem.theta_a_ref());
        let exact = f.oracle.constants_for(&theta);
        prop_assert!(alpha_lb <= exact.alpha_delta * (1.0 + 1e-10));
        prop_assert!(exact.gamma_delta <= gamma_ub * (1.0 + 1e-10));
        prop_assert!(alpha_lb > 0.0);
    }

    #[test]
    fn estimators_bound_errors_and_outputs_are_monotone(mu in parameter(), n in 1usize..=10) {
        let f = fixture();
        let n = n.min(f.greedy.basis.len());
        let model = f.greedy.model.truncated(n);
        let residual = f.greedy.residual.truncated(n);
        let basis = f.greedy.basis.truncated(n);
        let cert = certificate(&model, &residual, &mu).unwrap();
        let truth = solve_fom(&f.problem, &mu).unwrap();
        let e = &truth.u - basis.lift(&cert.coefficients);
        let err_mu = f.problem.operator(&mu).unwrap().quad_form(&e).max(0.0).sqrt();
        let err_v = f.problem.x().quad_form(&e).max(0.0).sqrt();
        prop_assert!(err_mu <= cert.eta_en + 1e-10);
        prop_assert!(err_v <= cert.eta_v + 1e-10);
        prop_assert!(truth.s - cert.s_rb <= cert.eta_s + 1e-10);
        prop_assert!(truth.s - cert.s_rb >= -1e-12 * truth.s);
    }

    #[test]
    fn online_dual_norm_matches_the_direct_riesz_solve(mu in parameter(), n in 1usize..=10) {
        let f = fixture();
        let n = n.min(f.greedy.basis.len());
        let model = f.greedy.model.truncated(n);
        let basis = f.greedy.basis.truncated(n);
        let cert = certificate(&model, &f.greedy.residual.truncated(n), &mu).unwrap();
        let direct = residual_dual_norm_direct(&f.problem, &basis, &mu, &cert.coefficients).unwrap();
        if !cert.dual_norm.below_floor {
            prop_assert!((cert.r_norm - direct).abs() <= 1e-8 * direct, "{} vs {direct}", cert.r_norm);
        }
    }

    #[test]
    fn rb_solve_is_deterministic(mu in parameter()) {
        let f = fixture();
        let a = rb_solve(&f.greedy.model, &mu).unwrap();
        let b = rb_solve(&f.greedy.model, &mu).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn compensated_dot_resolves_cancelling_sums(x in prop::collection::vec(-1e3f64..1e3, 1..40)) {
        // [x, -x, 1] against [x, x, 1e-8]: the exact value is 1e-8
        let mut a: Vec<f64> = x.clone();
        a.extend(x.iter().map(|v| -v));
        a.push(1.0);
        let mut b = x.clone();
        b.extend(x.iter().copied());
        b.push(1e-8);
        prop_assert!((dot2(&a, &b) - 1e-8).abs() <= 1e-22);
    }
}
