use giantnet::algorithms::{
    giant_init, giant_step, giant_step_mixed, run, stacked_gradients, Algorithm, AlgorithmConfig, NetworkState,
    RunStatus,
};
use giantnet::diagnostics::harmonic_hessian_mean;
use giantnet::numerics::Matrix;
use giantnet::objectives::{generate_problem, ProblemInstance, ProblemSpec};
use giantnet::rng;
use giantnet::topology::{make_graph, metropolis_weights, GraphKind, MixingMatrix};
use proptest::prelude::*;

fn setup(seed: u64, logistic: bool) -> (ProblemInstance, MixingMatrix) {
    let spec = if logistic {
        ProblemSpec::logistic(6, 3, 10, 0.1)
    } else {
        ProblemSpec::quadratic(6, 3, 0.8)
    };
    let inst = generate_problem(seed, &spec).unwrap();
    let g = make_graph(GraphKind::ErdosRenyi, 6, 0.5, seed).unwrap();
    (inst, metropolis_weights(&g))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trackers_sum_to_latest_gradients(seed in 0u64..1000, logistic in any::<bool>(), k in 1usize..4) {
        let (inst, p) = setup(seed, logistic);
        let cfg = AlgorithmConfig { epsilon: 0.3, consensus_rounds: k, ..AlgorithmConfig::default() };
        let mut state = giant_init(&inst, &rng::normal_matrix(&mut rng::seeded(seed), 6, 3)).unwrap();
        for _ in 0..25 {
            let next = giant_step(&state, &inst, &p, &cfg).unwrap();
            let grads = stacked_gradients(&inst, &state.x).unwrap();
            let drift = (&next.w.column_sums() - &grads.column_sums()).norm();
            prop_assert!(drift <= 1e-9 * (1.0 + grads.frobenius_norm()));
            state = next;
        }
    }

    #[test]
    fn mean_follows_harmonic_newton_step_at_consensus(seed in 0u64..1000, logistic in any::<bool>(), eps in 0.05f64..1.0) {
        // at consensus with w = ∇f(x̄) on every agent, x̄' = x̄ - ε M ∇f(x̄)
        let (inst, p) = setup(seed, logistic);
        let x_bar = rng::normal_vector(&mut rng::seeded(seed + 5), 3);
        let x = Matrix::repeat_row(&x_bar, 6);
        let local = stacked_gradients(&inst, &x).unwrap();
        let global = inst.gradient(&x_bar).unwrap();
        let state = NetworkState {
            x: x.clone(),
            g: local.clone(),
            w: Matrix::repeat_row(&global, 6),
            iteration: 0,
        };
        let next = giant_step_mixed(&state, &inst, p.matrix(), eps, 0.0).unwrap();
        let m = harmonic_hessian_mean(&inst, &x_bar).unwrap();
        let mut expected = x_bar.clone();
        expected.axpy(-eps, &m.matvec(&global).unwrap());
        let got = next.x.column_means();
        prop_assert!((&got - &expected).norm() <= 1e-10 * (1.0 + expected.norm()));
    }

    #[test]
    fn k_rounds_equal_precomputed_power(seed in 0u64..1000, k in 1usize..5) {
        let (inst, p) = setup(seed, seed % 2 == 0);
        let mut r = rng::seeded(seed);
        let state = NetworkState {
            x: rng::normal_matrix(&mut r, 6, 3),
            g: rng::normal_matrix(&mut r, 6, 3),
            w: rng::normal_matrix(&mut r, 6, 3),
            iteration: 0,
        };
        let cfg = AlgorithmConfig { epsilon: 0.4, consensus_rounds: k, ..AlgorithmConfig::default() };
        let a = giant_step(&state, &inst, &p, &cfg).unwrap();
        let pk = MixingMatrix::new(p.matrix().power(k).unwrap()).unwrap();
        let b = giant_step(&state, &inst, &pk, &AlgorithmConfig { consensus_rounds: 1, ..cfg }).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn optimum_is_a_fixed_point() {
    for logistic in [false, true] {
        let (inst, p) = setup(3, logistic);
        let x_star = inst.reference_solution().unwrap().clone();
        let x = Matrix::repeat_row(&x_star, 6);
        let state = NetworkState {
            g: stacked_gradients(&inst, &x).unwrap(),
            w: Matrix::repeat_row(&inst.gradient(&x_star).unwrap(), 6),
            x,
            iteration: 0,
        };
        let next = giant_step(&state, &inst, &p, &AlgorithmConfig::default()).unwrap();
        assert!((&next.x - &state.x).max_abs() <= 1e-12);
        assert!((&next.w - &state.w).max_abs() <= 1e-12);
        assert!((&next.g - &state.g).max_abs() <= 1e-12);
    }
}

#[test]
fn small_step_gap_is_monotone_from_consensus() {
    let (inst, p) = setup(11, false);
    let x0 = Matrix::repeat_row(&rng::normal_vector(&mut rng::seeded(2), 3), 6);
    let cfg = AlgorithmConfig {
        epsilon: 0.05,
        max_iters: 300,
        grad_tol: 1e-12,
        ..AlgorithmConfig::default()
    };
    let out = run(Algorithm::Giant, &inst, &p, &cfg, &x0).unwrap();
    for pair in out.log.records.windows(2) {
        assert!(pair[1].opt_gap <= pair[0].opt_gap * (1.0 + 1e-12) + 1e-15);
    }
}

#[test]
fn every_algorithm_converges_on_an_easy_instance() {
    let (inst, p) = setup(5, true);
    let x0 = rng::normal_matrix(&mut rng::seeded(1), 6, 3);
    for (alg, eps) in [(Algorithm::Giant, 0.5), (Algorithm::Dgd, 0.05), (Algorithm::Gt, 0.2)] {
        let cfg = AlgorithmConfig {
            epsilon: eps,
            max_iters: 20_000,
            grad_tol: if alg == Algorithm::Dgd { 1e-2 } else { 1e-8 },
            ..AlgorithmConfig::default()
        };
        let out = run(alg, &inst, &p, &cfg, &x0).unwrap();
        assert_eq!(out.status, RunStatus::Converged, "{alg}");
    }
}
