//! Monte Carlo policy values against PDE and variational references.

use hjlab::effective::{matched_solutions, solve_effective, EffectiveProblem};
use hjlab::cell::{build_table, CellConfig, PLattice};
use hjlab::evolution::{evolve, EpsSystemProblem};
use hjlab::hamiltonian::{Hamiltonian, HamiltonianSpec};
use hjlab::mc::{
    mc_effective_estimate, mc_value_cauchy, CauchyPolicy, FeedbackPolicy, McConfig,
    SwitchingChainSpec,
};
use hjlab::oracle;
use hjlab::{CouplingMatrix, ScalarField, TorusGrid};
use std::f64::consts::PI;

#[test]
fn quadratic_value_matches_hopf_lax_within_errors() {
    // equal quadratic components with equal data reduce to a single
    // deterministic problem; the feedback policy recovers the variational
    // value up to statistics, time-step bias, and scheme error
    let eps = 0.25;
    let t = 0.2;
    let spec =
        HamiltonianSpec::new(vec![Hamiltonian::quadratic(), Hamiltonian::quadratic()]).unwrap();
    let chain = SwitchingChainSpec::two_state(1.0, 1.0, eps, 321).unwrap();
    let f_field = ScalarField::TrigPoly { axis: 0, mean: 0.0, cos: vec![-0.1], sin: vec![] };
    let f = vec![f_field.clone(), f_field.clone()];

    let grid = TorusGrid::new(1, 256).unwrap();
    let sampled = grid.sample(|x| f_field.eval(x));
    let problem = EpsSystemProblem {
        grid,
        spec: spec.clone(),
        coupling: CouplingMatrix::symmetric_pair(),
        epsilon: eps,
        initial: vec![sampled.clone(), sampled.clone()],
        horizon: t,
        r_grad: 2.0,
    };
    let times: Vec<f64> = (1..=32).map(|k| t * k as f64 / 32.0).collect();
    let (run, _) = evolve(&problem, &times).unwrap();
    let policy = FeedbackPolicy { fields: &run, spec: &spec, epsilon: eps };

    let x = [0.3, 0.0];
    let cfg = McConfig { paths: 20_000, dt: None };
    let est =
        mc_value_cauchy(&spec, &chain, x, 0, t, &f, &CauchyPolicy::Feedback(&policy), &cfg)
            .unwrap();

    let want = oracle::hopf_lax_quadratic(&grid, &sampled, t);
    let idx = (0.3f64 * 256.0).round() as usize;
    let dt_bias = 0.3 * chain.dt_bound();
    let slack = 3.0 * est.std_error + dt_bias + 5.0 * grid.spacing();
    assert!(
        (est.estimate - want[idx]).abs() <= slack,
        "estimate {} vs {} (slack {slack})",
        est.estimate,
        want[idx]
    );
}

#[test]
fn policy_values_upper_bound_the_pde_solution() {
    // any policy overestimates the infimum: estimate + 3 se >= PDE - slack
    let eps = 0.2;
    let t = 0.25;
    let a = ScalarField::RationalTrig {
        axis: 0,
        cos_num: 1.0 / (8.0 * PI * PI),
        sin_num: 1.0 / (4.0 * PI),
        cos_den: 0.5 + 1.0 / (8.0 * PI * PI),
    };
    let spec =
        HamiltonianSpec::new(vec![Hamiltonian::norm(), Hamiltonian::ScaledNorm { coeff: a }])
            .unwrap();
    let chain = SwitchingChainSpec::two_state(1.0, 1.0, eps, 99).unwrap();
    let f = vec![
        ScalarField::TrigPoly { axis: 0, mean: 0.0, cos: vec![], sin: vec![0.5] },
        ScalarField::Const { value: 0.0 },
    ];
    let grid = TorusGrid::new(1, 320).unwrap();
    let initial: Vec<Vec<f64>> = f.iter().map(|s| grid.sample(|x| s.eval(x))).collect();
    let problem = EpsSystemProblem {
        grid,
        spec: spec.clone(),
        coupling: CouplingMatrix::symmetric_pair(),
        epsilon: eps,
        initial,
        horizon: t,
        r_grad: 2.0,
    };
    let times: Vec<f64> = (1..=25).map(|k| t * k as f64 / 25.0).collect();
    let (run, _) = evolve(&problem, &times).unwrap();
    let pde_value = {
        let snap = run.last().unwrap();
        let idx = (0.4f64 * 320.0).round() as usize;
        snap.components[0][idx]
    };
    let cfg = McConfig { paths: 8_000, dt: None };
    for policy in [
        CauchyPolicy::Stay,
        CauchyPolicy::OpenLoop { radius: 1.0, steps: 4 },
    ] {
        let est = mc_value_cauchy(&spec, &chain, [0.4, 0.0], 0, t, &f, &policy, &cfg).unwrap();
        assert!(
            est.estimate + 3.0 * est.std_error >= pde_value - 5.0 * grid.spacing(),
            "policy undercut the PDE value: {} vs {pde_value}",
            est.estimate
        );
    }
}

#[test]
fn feedback_value_close_to_pde_value_from_above() {
    let eps = 0.2;
    let t = 0.25;
    let spec =
        HamiltonianSpec::new(vec![Hamiltonian::quadratic(), Hamiltonian::quadratic()]).unwrap();
    let chain = SwitchingChainSpec::two_state(1.0, 1.0, eps, 7777).unwrap();
    let f = vec![
        ScalarField::TrigPoly { axis: 0, mean: 0.0, cos: vec![], sin: vec![0.3] },
        ScalarField::TrigPoly { axis: 0, mean: 0.1, cos: vec![0.2], sin: vec![] },
    ];
    let grid = TorusGrid::new(1, 256).unwrap();
    let initial: Vec<Vec<f64>> = f.iter().map(|s| grid.sample(|x| s.eval(x))).collect();
    let problem = EpsSystemProblem {
        grid,
        spec: spec.clone(),
        coupling: CouplingMatrix::symmetric_pair(),
        epsilon: eps,
        initial,
        horizon: t,
        r_grad: 4.0,
    };
    let times: Vec<f64> = (1..=32).map(|k| t * k as f64 / 32.0).collect();
    let (run, _) = evolve(&problem, &times).unwrap();
    let idx = (0.6f64 * 256.0).round() as usize;
    let pde_value = run.last().unwrap().components[0][idx];
    let policy = FeedbackPolicy { fields: &run, spec: &spec, epsilon: eps };
    let cfg = McConfig { paths: 20_000, dt: None };
    let est = mc_value_cauchy(
        &spec,
        &chain,
        [0.6, 0.0],
        0,
        t,
        &f,
        &CauchyPolicy::Feedback(&policy),
        &cfg,
    )
    .unwrap();
    let gap = est.estimate - pde_value;
    // above up to statistics, below PDE + policy/scheme slack
    assert!(gap >= -3.0 * est.std_error - 5.0 * grid.spacing(), "gap {gap}");
    assert!(gap <= 0.05 + 3.0 * est.std_error, "policy too loose: gap {gap}");
}

#[test]
fn long_run_estimate_recovers_quadratic_effective_hamiltonian() {
    let spec =
        HamiltonianSpec::new(vec![Hamiltonian::quadratic(), Hamiltonian::quadratic()]).unwrap();
    let chain = SwitchingChainSpec::two_state(1.0, 1.0, 1.0, 5150).unwrap();
    let cfg = McConfig { paths: 2_000, dt: None };
    let p = 0.8;
    let (est, _) = mc_effective_estimate(&spec, &chain, [p, 0.0], 20.0, 2.5, 20, &cfg).unwrap();
    let want = p * p;
    assert!((est - want).abs() <= 0.1 * want.max(0.1), "estimate {est} vs {want}");
}

#[test]
fn long_run_estimate_on_the_norm_pair() {
    let a = ScalarField::RationalTrig {
        axis: 0,
        cos_num: 1.0 / (8.0 * PI * PI),
        sin_num: 1.0 / (4.0 * PI),
        cos_den: 0.5 + 1.0 / (8.0 * PI * PI),
    };
    let spec =
        HamiltonianSpec::new(vec![Hamiltonian::norm(), Hamiltonian::ScaledNorm { coeff: a }])
            .unwrap();
    let chain = SwitchingChainSpec::two_state(1.0, 1.0, 1.0, 31).unwrap();
    let cfg = McConfig { paths: 2_000, dt: None };
    let (est, _) = mc_effective_estimate(&spec, &chain, [1.0, 0.0], 20.0, 1.5, 24, &cfg).unwrap();
    assert!((est - 1.0).abs() <= 0.15, "estimate {est} vs 1");
}

#[test]
fn zero_slope_nonnegative_cost_gives_small_estimate() {
    // P = 0 with a nonnegative Lagrangian reachable at zero cost: the
    // estimator sits at a small positive bias
    let spec = HamiltonianSpec::new(vec![
        Hamiltonian::QuadraticMinusPotential {
            potential: ScalarField::TrigPoly { axis: 0, mean: 1.0, cos: vec![-1.0], sin: vec![] },
        },
        Hamiltonian::QuadraticMinusPotential {
            potential: ScalarField::TrigPoly { axis: 0, mean: 1.0, cos: vec![-1.0], sin: vec![] },
        },
    ])
    .unwrap();
    let chain = SwitchingChainSpec::two_state(1.0, 1.0, 1.0, 12).unwrap();
    let cfg = McConfig { paths: 1_000, dt: None };
    let (est, _) = mc_effective_estimate(&spec, &chain, [0.0, 0.0], 20.0, 1.0, 10, &cfg).unwrap();
    // L >= 0 with min 0 at the start point: holding still costs nothing, so
    // the estimate sits in a small band around zero
    assert!(est.abs() <= 0.05, "estimate {est}");
}

#[test]
fn matched_solutions_feed_mc_consistency() {
    // sanity: the matched trajectory at t >> eps equals the effective field
    let spec =
        HamiltonianSpec::new(vec![Hamiltonian::quadratic(), Hamiltonian::quadratic()]).unwrap();
    let k = CouplingMatrix::symmetric_pair();
    let mut cfg = CellConfig::new(TorusGrid::new(1, 64).unwrap());
    cfg.r_grad = 3.0;
    let table =
        build_table(&spec, &k, &PLattice::line(vec![-2.0, -1.0, 0.0, 1.0, 2.0]), &[0.08, 0.04], &cfg)
            .unwrap();
    let grid = TorusGrid::new(1, 128).unwrap();
    let f1 = grid.sample(|x| (2.0 * PI * x[0]).sin() * 0.1);
    let f2 = grid.sample(|_| 0.05);
    let f_bar: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| 0.5 * (a + b)).collect();
    let problem = EffectiveProblem { table, grid, f_bar, horizon: 0.5 };
    let (urun, _) = solve_effective(&problem, &[0.5]).unwrap();
    let matched = matched_solutions(&urun, &[f1, f2], 0.01).unwrap();
    let d = matched.fields[0].components[0]
        .iter()
        .zip(&urun[0].components[0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(d < 1e-12, "layer term should be dead at t = 50 eps: {d}");
}

#[test]
fn dpp_split_edges_are_consistent() {
    use hjlab::mc::check_dpp;
    let eps = 0.25;
    let t = 0.3;
    let spec =
        HamiltonianSpec::new(vec![Hamiltonian::quadratic(), Hamiltonian::quadratic()]).unwrap();
    let chain = SwitchingChainSpec::two_state(1.0, 1.0, eps, 5).unwrap();
    let f = vec![
        ScalarField::TrigPoly { axis: 0, mean: 0.0, cos: vec![], sin: vec![0.2] },
        ScalarField::Const { value: 0.1 },
    ];
    let grid = TorusGrid::new(1, 128).unwrap();
    let initial: Vec<Vec<f64>> = f.iter().map(|s| grid.sample(|x| s.eval(x))).collect();
    let problem = EpsSystemProblem {
        grid,
        spec: spec.clone(),
        coupling: CouplingMatrix::symmetric_pair(),
        epsilon: eps,
        initial,
        horizon: t,
        r_grad: 4.0,
    };
    let times: Vec<f64> = (1..=48).map(|k| t * k as f64 / 48.0).collect();
    let (run, _) = evolve(&problem, &times).unwrap();
    let policy = FeedbackPolicy { fields: &run, spec: &spec, epsilon: eps };
    let cfg = McConfig { paths: 6_000, dt: None };
    let slack = 5.0 / 128.0;
    // split at 0: the nested estimate is the PDE value itself
    let at_zero = check_dpp(&spec, &chain, [0.3, 0.0], 0, t, 0.0, &f, &run, &policy, slack, &cfg)
        .unwrap();
    assert!(at_zero.pass, "h = 0 split failed: diff {}", at_zero.difference);
    assert!(at_zero.nested.std_error < 1e-12, "nested at h = 0 is deterministic");
    // split at t: terminal-cost consistency with the initial data
    let at_t =
        check_dpp(&spec, &chain, [0.3, 0.0], 0, t, t, &f, &run, &policy, slack, &cfg).unwrap();
    assert!(at_t.pass, "h = t split failed: diff {}", at_t.difference);
    // split in the middle
    let at_half = check_dpp(
        &spec,
        &chain,
        [0.3, 0.0],
        0,
        t,
        t / 2.0,
        &f,
        &run,
        &policy,
        slack,
        &cfg,
    )
    .unwrap();
    assert!(at_half.pass, "h = t/2 split failed: diff {}", at_half.difference);
}

#[test]
fn dirichlet_policy_value_upper_bounds_the_pde_solution() {
    use hjlab::dirichlet::{solve_dirichlet_eps, BoxDomain, DirichletProblem};
    use hjlab::mc::{mc_value_dirichlet, DirichletPolicy};
    let eps = 0.2;
    let spec =
        HamiltonianSpec::new(vec![Hamiltonian::norm(), Hamiltonian::norm()]).unwrap();
    let chain = SwitchingChainSpec::two_state(1.0, 1.0, eps, 41).unwrap();
    let dom = BoxDomain::interval(0.0, 1.0, 161).unwrap();
    let g_vals = [-0.5, -1.0];
    let g_fields = vec![
        ScalarField::Const { value: g_vals[0] },
        ScalarField::Const { value: g_vals[1] },
    ];
    let problem = DirichletProblem {
        domain: dom,
        spec: spec.clone(),
        coupling: CouplingMatrix::symmetric_pair(),
        epsilon: eps,
        g: vec![vec![g_vals[0]; dom.len()], vec![g_vals[1]; dom.len()]],
        r_grad: 2.0,
    };
    let (sol, _) = solve_dirichlet_eps(&problem, 1e-8, 4_000_000).unwrap();
    let x = 0.25f64;
    let idx = (x * 160.0).round() as usize;
    let pde_value = sol.components[0][idx];
    let cfg = McConfig { paths: 4_000, dt: None };
    for policy in [
        DirichletPolicy::StayForever,
        DirichletPolicy::DriftWhenState { state: 0, velocity: [-1.0, 0.0] },
        DirichletPolicy::DriftWhenState { state: 1, velocity: [-1.0, 0.0] },
    ] {
        let (est, _) = mc_value_dirichlet(
            &spec,
            &chain,
            &dom,
            [x, 0.0],
            0,
            &g_fields,
            &policy,
            12.0,
            &cfg,
        )
        .unwrap();
        assert!(
            est.estimate + 3.0 * est.std_error >= pde_value - 5.0 * dom.spacing(),
            "policy undercut the exit value: {} vs {pde_value}",
            est.estimate
        );
    }
}
