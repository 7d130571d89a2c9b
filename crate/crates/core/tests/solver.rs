use ordnorm::solver::{
    binary_search_solve, completion_bound, core_run, deterministic_run, guaranteed_horizon,
    guaranteed_run, omega, search_with, warmup_horizon, warmup_solve, RunParams, SearchOptions,
};
use ordnorm::testkit::{exact_opt, random_instance, vertex_lists};
use ordnorm::{solve, Decision, Instance, Mode, NormApprox, Outcome, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(n: usize, d: usize, seed: u64) -> (Instance, f64) {
    let inst = random_instance(n, d, 3, seed).build().unwrap();
    let opt = exact_opt(&inst).unwrap().opt_value;
    assert!(opt.is_finite());
    (inst, opt)
}

fn params(gamma: f64, horizon: u64, cap: u64) -> RunParams {
    RunParams {
        gamma,
        horizon,
        iteration_cap: cap,
        oracle_call_cap: None,
        record: false,
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn search_is_feasible_and_within_tolerance() {
    for seed in 0..8 {
        let (inst, opt) = instance(3, 3, seed);
        let report = binary_search_solve(&inst, 0.1, seed, 1.0).unwrap();
        let obj = report.objective.unwrap();
        // weak duality: no feasible point beats the LP optimum
        assert!(obj >= opt - 1e-7, "seed {seed}: {obj} < {opt}");
        assert!(obj <= 1.1 * opt + 1e-6, "seed {seed}: {obj} vs {opt}");
        assert!(report.lower_bound.unwrap() <= opt + 1e-9);

        let solution = report.solution.unwrap();
        assert!(close(&solution.recombined(), &solution.aggregate, 1e-9));
        let lists = vertex_lists(&inst).unwrap();
        for (customer, vertices) in solution.customers.iter().zip(&lists) {
            let mass: f64 = customer.parts.iter().map(|p| p.coefficient).sum();
            assert!((mass - 1.0).abs() <= 1e-9, "{mass}");
            for part in &customer.parts {
                assert!(vertices.iter().any(|v| close(v, &part.point, 1e-12)));
            }
        }
    }
}

#[test]
fn full_search_without_early_exit() {
    let (inst, opt) = instance(2, 3, 11);
    let options = SearchOptions {
        epsilon: 0.25,
        seed: 3,
        tau: 1.0,
        early_exit: false,
    };
    let full = search_with(&inst, &options).unwrap();
    let early = search_with(
        &inst,
        &SearchOptions {
            early_exit: true,
            ..options
        },
    )
    .unwrap();
    assert!(full.objective.unwrap() <= 1.25 * opt + 1e-6);
    assert!(early.objective.unwrap() <= 1.25 * opt + 1e-6);
    assert!(early.bounds.len() <= full.bounds.len());
}

#[test]
fn same_seed_same_report() {
    let (inst, _) = instance(4, 3, 5);
    let first = serde_json::to_string(&binary_search_solve(&inst, 0.2, 9, 1.0).unwrap()).unwrap();
    let second = serde_json::to_string(&binary_search_solve(&inst, 0.2, 9, 1.0).unwrap()).unwrap();
    assert_eq!(first, second);
}

#[test]
fn warmup_bound_holds() {
    for seed in 0..10 {
        let (inst, opt) = instance(1, 4, 100 + seed);
        let eta = 0.2;
        let report = warmup_solve(&inst, eta, None).unwrap();
        assert_eq!(report.horizon, Some(warmup_horizon(4, eta)));
        let obj = report.objective.unwrap();
        assert!(obj <= eta + (1.0 + eta) * opt + 1e-9, "{obj} vs {opt}");
    }
}

#[test]
fn completed_runs_respect_the_bounds() {
    for seed in 0..6 {
        let (inst, opt) = instance(3, 3, 200 + seed);
        let eta = 0.2;
        let approx = NormApprox::new(inst.weights().clone(), eta).unwrap();
        let (n, d) = (inst.len(), inst.dim());
        let horizon = guaranteed_horizon(n, d, eta);
        // adversarial Γ on both sides of OPT
        for gamma in [0.3 * opt, opt, 3.0 * opt] {
            let om = omega(n, d, horizon, eta, gamma, approx.delta());
            let bound = completion_bound(n, horizon, eta, gamma, approx.delta());
            let cap = (3.0 * om) as u64;

            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let run = core_run(&inst, &approx, &params(gamma, horizon, cap), &mut rng).unwrap();
            if run.outcome == Outcome::Completed {
                let obj = inst.weights().evaluate(&run.state.aggregate()).unwrap();
                assert!(obj <= bound + 1e-6, "core: {obj} > {bound}");
                assert!(run.log.potential() <= om);
            }

            let run = deterministic_run(&inst, &approx, &params(gamma, horizon, cap)).unwrap();
            assert!(
                run.log.iterations as f64 <= om,
                "{} > {om}",
                run.log.iterations
            );
            assert!(run.log.potential() <= om);
            match run.outcome {
                Outcome::Completed => {
                    let obj = inst.weights().evaluate(&run.state.aggregate()).unwrap();
                    assert!(obj <= bound + 1e-6, "deterministic: {obj} > {bound}");
                }
                Outcome::NoGoodCustomer => {
                    assert!(gamma < opt + 1e-9, "rejected Γ = {gamma} ≥ OPT = {opt}")
                }
                other => panic!("unexpected outcome {other:?}"),
            }
        }
    }
}

#[test]
fn decisions_are_sound() {
    for seed in 0..5 {
        let (inst, opt) = instance(3, 3, 300 + seed);
        let eta = 0.2;
        let approx = NormApprox::new(inst.weights().clone(), eta).unwrap();
        let horizon = guaranteed_horizon(inst.len(), inst.dim(), eta);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let low = guaranteed_run(&inst, &approx, horizon, 0.5 * opt, &mut rng, None).unwrap();
        assert_eq!(low.decision, Some(Decision::OptGtGamma));
        let high = guaranteed_run(&inst, &approx, horizon, 2.0 * opt, &mut rng, None).unwrap();
        assert_eq!(high.decision, Some(Decision::Solved));
    }
}

#[test]
fn unit_tau_is_the_exact_pipeline() {
    let (inst, opt) = instance(3, 3, 42);
    let config = SolverConfig {
        seed: 4,
        ..SolverConfig::default()
    };
    let via_solve = serde_json::to_string(&solve(&inst, &config).unwrap()).unwrap();
    let direct = serde_json::to_string(&binary_search_solve(&inst, 0.1, 4, 1.0).unwrap()).unwrap();
    assert_eq!(via_solve, direct);

    let approx = solve(&inst, &SolverConfig { tau: 1.2, ..config }).unwrap();
    assert!(approx.objective.unwrap() <= 1.2 * 1.1 * opt + 1e-6);
}

#[test]
fn fixed_gamma_modes() {
    let (inst, opt) = instance(2, 2, 77);
    let base = SolverConfig {
        mode: Mode::Deterministic,
        gamma: Some(2.0 * opt),
        ..SolverConfig::default()
    };
    let r = solve(&inst, &base).unwrap();
    assert_eq!(r.decision, Decision::Solved);
    assert!(r.objective.unwrap() <= r.guarantee.unwrap() + 1e-9);
    let r = solve(
        &inst,
        &SolverConfig {
            mode: Mode::Guaranteed,
            gamma: Some(1e-9),
            ..base.clone()
        },
    )
    .unwrap();
    assert_eq!(r.decision, Decision::OptGtGamma);
    assert!(solve(
        &inst,
        &SolverConfig {
            gamma: None,
            ..base
        }
    )
    .is_err());
}
