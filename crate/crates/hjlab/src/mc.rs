//! Monte Carlo oracles for the stochastic switching control representations:
//! chain sampling, policy-value estimators for the Cauchy and exit-time
//! problems, the dynamic-programming consistency check, and the long-run
//! effective-Hamiltonian estimator.
//!
//! Paths use counter-based ChaCha streams derived from the master seed and
//! estimates are reduced pairwise in fixed order, so results are identical
//! for any thread count.

use crate::dirichlet::BoxDomain;
use crate::error::{HjError, Result};
use crate::grid::{StateField, Vec2};
use crate::hamiltonian::{HamiltonianSpec, INFINITE_COST};
use crate::scalar_field::ScalarField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// The switching process: holding rate `rates[i] / epsilon` in state i.
#[derive(Clone, Debug)]
pub struct SwitchingChainSpec {
    /// leave rate per state (before the 1/epsilon speedup)
    pub rates: Vec<f64>,
    /// jump target distribution per state (row-normalized off-diagonals);
    /// for the 2-state chain this is the deterministic swap
    jump_probs: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub seed: u64,
}

impl SwitchingChainSpec {
    pub fn two_state(c1: f64, c2: f64, epsilon: f64, seed: u64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0 && epsilon > 0.0) {
            return Err(HjError::Config("rates and epsilon must be positive".into()));
        }
        Ok(Self {
            rates: vec![c1, c2],
            jump_probs: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            epsilon,
            seed,
        })
    }

    /// Uniformized jump chain of a row-stochastic coupling matrix: leave
    /// state i at rate (1 - c_ii)/epsilon, land on j with probability
    /// c_ij / (1 - c_ii).
    pub fn from_coupling(k: &crate::coupling::CouplingMatrix, epsilon: f64, seed: u64) -> Result<Self> {
        let m = k.m();
        let mut rates = Vec::with_capacity(m);
        let mut jump_probs = Vec::with_capacity(m);
        for i in 0..m {
            let leave = 1.0 - k.entry(i, i);
            if leave <= 0.0 {
                return Err(HjError::Config(format!("state {i} is absorbing")));
            }
            rates.push(leave);
            jump_probs.push((0..m).map(|j| if j == i { 0.0 } else { k.entry(i, j) / leave }).collect());
        }
        Ok(Self { rates, jump_probs, epsilon, seed })
    }

    pub fn m(&self) -> usize {
        self.rates.len()
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().fold(0.0f64, |a, &b| a.max(b))
    }

    /// Largest admissible lattice step.
    pub fn dt_bound(&self) -> f64 {
        0.1 * self.epsilon / self.max_rate()
    }

    fn stream(&self, path: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path + 1);
        rng
    }
}

/// Simulate the chain by exponential clocks and discretize the state to the
/// dt lattice: entry k is the state on [k dt, (k+1) dt).
pub fn sample_chain(spec: &SwitchingChainSpec, horizon: f64, dt: f64, start: usize) -> Result<Vec<u8>> {
    validate_dt(spec, dt)?;
    let mut rng = spec.stream(0);
    Ok(sample_chain_rng(spec, horizon, dt, start, &mut rng))
}

fn validate_dt(spec: &SwitchingChainSpec, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(HjError::Config("dt must be positive".into()));
    }
    let bound = spec.dt_bound();
    if dt > bound * (1.0 + 1e-12) {
        return Err(HjError::Config(format!(
            "dt = {dt} too coarse for the jump law; need dt <= 0.1 eps / max rate = {bound}"
        )));
    }
    Ok(())
}

fn sample_chain_rng(
    spec: &SwitchingChainSpec,
    horizon: f64,
    dt: f64,
    start: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<u8> {
    let steps = (horizon / dt).round().max(1.0) as usize;
    let mut seq = Vec::with_capacity(steps + 1);
    let mut state = start;
    let mut t = 0.0f64;
    // next jump time
    let mut next_jump = t + exponential(rng, spec.rates[state] / spec.epsilon);
    for k in 0..=steps {
        t = k as f64 * dt;
        while next_jump <= t {
            state = jump_target(spec, state, rng);
            next_jump += exponential(rng, spec.rates[state] / spec.epsilon);
        }
        seq.push(state as u8);
    }
    seq
}

#[inline]
fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen::<f64>();
    -((1.0 - u).max(f64::MIN_POSITIVE)).ln() / rate
}

fn jump_target(spec: &SwitchingChainSpec, state: usize, rng: &mut ChaCha8Rng) -> usize {
    if spec.m() == 2 {
        return 1 - state;
    }
    let u: f64 = rng.gen::<f64>();
    let probs = &spec.jump_probs[state];
    let mut acc = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    probs.len() - 1
}

#[derive(Clone, Debug, Serialize)]
pub struct JumpLawReport {
    pub empirical: f64,
    pub expected: f64,
    pub std_error: f64,
    pub pass: bool,
}

/// Frequency test of the jump law: the no-jump probability by time t in the
/// start state equals exp(-c t / eps). Uses the exact exponential holding
/// times, so the estimator is unbiased and a pure 3-sigma band applies.
pub fn jump_law_check(
    spec: &SwitchingChainSpec,
    start: usize,
    t: f64,
    paths: usize,
) -> JumpLawReport {
    let rate = spec.rates[start] / spec.epsilon;
    let stays: usize = (0..paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = spec.stream(k as u64);
            usize::from(exponential(&mut rng, rate) > t)
        })
        .sum();
    let empirical = stays as f64 / paths as f64;
    let expected = (-rate * t).exp();
    let std_error = (expected * (1.0 - expected) / paths as f64).sqrt();
    JumpLawReport {
        empirical,
        expected,
        std_error,
        pass: (empirical - expected).abs() <= 3.0 * std_error,
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub paths: usize,
    pub discarded: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct McConfig {
    pub paths: usize,
    /// lattice step; defaults to the chain's dt bound
    pub dt: Option<f64>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { paths: 10_000, dt: None }
    }
}

/// How the controller picks velocities along a path.
pub enum CauchyPolicy<'a> {
    /// zero velocity (the only finite-cost policy for indicator Lagrangians)
    Stay,
    /// one constant velocity, optimized over a lattice of the given radius;
    /// selection and estimation use disjoint path halves
    OpenLoop { radius: f64, steps: usize },
    /// feedback extracted from a PDE solve by the subdifferential map
    Feedback(&'a FeedbackPolicy<'a>),
}

/// Velocity field read off a solved oscillatory run: at backward time s the
/// controller moves with -dH/dp(x/eps, Du_state(x, t - s)).
pub struct FeedbackPolicy<'a> {
    pub fields: &'a [StateField],
    pub spec: &'a HamiltonianSpec,
    pub epsilon: f64,
}

impl FeedbackPolicy<'_> {
    fn velocity(&self, x: Vec2, state: usize, solution_time: f64) -> Vec2 {
        // nearest snapshot at or below the requested solution time
        let snap = self
            .fields
            .iter()
            .min_by(|a, b| {
                let da = (a.time - solution_time).abs();
                let db = (b.time - solution_time).abs();
                da.partial_cmp(&db).unwrap()
            })
            .expect("nonempty feedback run");
        let grid = &snap.grid;
        let u = &snap.components[state];
        let h = grid.spacing();
        let n = grid.points_per_axis();
        let mut grad = [0.0f64; 2];
        // cell-slope gradient of the linear interpolant
        let locate = |coord: f64| -> (usize, usize) {
            let s = (coord - coord.floor()) * n as f64;
            let i = (s.floor() as usize).min(n - 1);
            (i, (i + 1) % n)
        };
        if grid.dim() == 1 {
            let (i, ip) = locate(x[0]);
            grad[0] = (u[ip] - u[i]) / h;
        } else {
            let (i, ip) = locate(x[0]);
            let (j, jp) = locate(x[1]);
            grad[0] = (u[ip + j * n] - u[i + j * n]) / h;
            grad[1] = (u[i + jp * n] - u[i + j * n]) / h;
        }
        let xi = [x[0] / self.epsilon, x[1] / self.epsilon];
        match self.spec.component(state).velocity(xi, grad) {
            Some(v) => [-v[0], -v[1]],
            None => [0.0, 0.0],
        }
    }
}

/// A realized controlled trajectory: the lattice step, the velocity chosen
/// on each step, the chain state per step, the visited positions, and the
/// accumulated cost. Mostly a debugging and inspection record; the
/// estimators integrate paths without materializing them.
#[derive(Clone, Debug)]
pub struct ControlledPath {
    pub dt: f64,
    pub controls: Vec<Vec2>,
    pub states: Vec<u8>,
    pub positions: Vec<Vec2>,
    pub cost: f64,
    pub discarded: bool,
}

/// Materialize one path of the finite-horizon problem under a policy.
/// `path_index` selects the RNG stream, matching the estimators' paths.
#[allow(clippy::too_many_arguments)]
pub fn sample_controlled_path(
    spec: &HamiltonianSpec,
    chain: &SwitchingChainSpec,
    x: Vec2,
    start: usize,
    t: f64,
    f: &[ScalarField],
    policy: &CauchyPolicy,
    path_index: u64,
    cfg: &McConfig,
) -> Result<ControlledPath> {
    let dt = cfg.dt.unwrap_or_else(|| chain.dt_bound());
    validate_dt(chain, dt)?;
    let velocity: Box<dyn Fn(Vec2, usize, f64) -> Vec2> = match policy {
        CauchyPolicy::Stay => Box::new(|_, _, _| [0.0, 0.0]),
        CauchyPolicy::Feedback(fb) => Box::new(|p, s, rem| fb.velocity(p, s, rem)),
        CauchyPolicy::OpenLoop { .. } => {
            return Err(HjError::Config(
                "open-loop paths depend on the selection phase; use the estimator".into(),
            ))
        }
    };
    let mut rng = chain.stream(path_index);
    let states = sample_chain_rng(chain, t, dt, start, &mut rng);
    let steps = states.len() - 1;
    let mut pos = x;
    let mut cost = 0.0f64;
    let mut controls = Vec::with_capacity(steps);
    let mut positions = Vec::with_capacity(steps + 1);
    positions.push(pos);
    let mut discarded = false;
    for k in 0..steps {
        let s = k as f64 * dt;
        let state = states[k] as usize;
        let q = velocity(pos, state, t - s);
        controls.push(q);
        let xi = [pos[0] / chain.epsilon, pos[1] / chain.epsilon];
        let l = spec
            .component(state)
            .lagrangian(xi, [-q[0], -q[1]])
            .unwrap_or(INFINITE_COST);
        if l >= INFINITE_COST {
            discarded = true;
            break;
        }
        cost += l * dt;
        pos = [pos[0] + q[0] * dt, pos[1] + q[1] * dt];
        positions.push(pos);
    }
    if !discarded {
        cost += f[states[steps] as usize].eval(pos);
    }
    Ok(ControlledPath { dt, controls, states, positions, cost, discarded })
}

struct PathOutcome {
    cost: f64,
    /// position and state at the split time (for nested estimates)
    split_cost: f64,
    split_pos: Vec2,
    split_state: usize,
    discarded: bool,
}

#[allow(clippy::too_many_arguments)]
fn integrate_path(
    spec: &HamiltonianSpec,
    chain: &SwitchingChainSpec,
    x: Vec2,
    t: f64,
    f: &[ScalarField],
    velocity: &dyn Fn(Vec2, usize, f64) -> Vec2,
    dt: f64,
    split: f64,
    states: &[u8],
) -> PathOutcome {
    let steps = states.len() - 1;
    let mut pos = x;
    let mut cost = 0.0f64;
    let mut split_cost = 0.0;
    let mut split_pos = x;
    let mut split_state = states[0] as usize;
    let mut discarded = false;
    let mut recorded_split = split <= 0.0;
    for k in 0..steps {
        let s = k as f64 * dt;
        if !recorded_split && s >= split - 1e-12 {
            split_cost = cost;
            split_pos = pos;
            split_state = states[k] as usize;
            recorded_split = true;
        }
        let state = states[k] as usize;
        let q = velocity(pos, state, t - s);
        let xi = [pos[0] / chain.epsilon, pos[1] / chain.epsilon];
        let l = spec
            .component(state)
            .lagrangian(xi, [-q[0], -q[1]])
            .unwrap_or(INFINITE_COST);
        if l >= INFINITE_COST {
            discarded = true;
            break;
        }
        cost += l * dt;
        pos = [pos[0] + q[0] * dt, pos[1] + q[1] * dt];
    }
    if !recorded_split {
        split_cost = cost;
        split_pos = pos;
        split_state = states[steps] as usize;
    }
    if !discarded {
        let terminal = states[steps] as usize;
        cost += f[terminal].eval(pos);
    }
    PathOutcome { cost, split_cost, split_pos, split_state, discarded }
}

fn reduce_outcomes(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = pairwise_sum(values) / n as f64;
    let var_terms: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&var_terms) / ((n.max(2) - 1) as f64);
    (mean, (var / n as f64).sqrt())
}

fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Policy value for the finite-horizon problem started at (x, start state, t):
/// an upper estimate of the value function under any policy.
pub fn mc_value_cauchy(
    spec: &HamiltonianSpec,
    chain: &SwitchingChainSpec,
    x: Vec2,
    start: usize,
    t: f64,
    f: &[ScalarField],
    policy: &CauchyPolicy,
    cfg: &McConfig,
) -> Result<McEstimate> {
    if !spec.all_convex() {
        return Err(HjError::NonConvex(0));
    }
    if f.len() != spec.m() {
        return Err(HjError::Config("terminal data and spec component counts differ".into()));
    }
    let dt = cfg.dt.unwrap_or_else(|| chain.dt_bound());
    validate_dt(chain, dt)?;
    match policy {
        CauchyPolicy::Stay => {
            let vel = |_: Vec2, _: usize, _: f64| [0.0, 0.0];
            run_paths(spec, chain, x, start, t, f, &vel, dt, 0, cfg.paths)
        }
        CauchyPolicy::Feedback(fb) => {
            let vel = |p: Vec2, s: usize, rem: f64| fb.velocity(p, s, rem);
            run_paths(spec, chain, x, start, t, f, &vel, dt, 0, cfg.paths)
        }
        CauchyPolicy::OpenLoop { radius, steps } => {
            let qs = velocity_lattice(*radius, *steps, dims_of(f));
            let half = cfg.paths / 2;
            let mut best_q = qs[0];
            let mut best = f64::INFINITY;
            for &q in &qs {
                let vel = move |_: Vec2, _: usize, _: f64| q;
                let est = run_paths(spec, chain, x, start, t, f, &vel, dt, 0, half)?;
                if est.discarded == 0 && est.estimate < best {
                    best = est.estimate;
                    best_q = q;
                }
            }
            let vel = move |_: Vec2, _: usize, _: f64| best_q;
            // estimation paths are a disjoint stream range
            run_paths(spec, chain, x, start, t, f, &vel, dt, half as u64 + 1, cfg.paths - half)
        }
    }
}

fn dims_of(f: &[ScalarField]) -> usize {
    // initial data validated upstream; the lattice only needs the dimension
    if f.iter().all(|s| s.validate(1).is_ok()) {
        1
    } else {
        2
    }
}

fn velocity_lattice(radius: f64, steps: usize, dim: usize) -> Vec<Vec2> {
    let n = steps.max(1);
    let mut out = Vec::new();
    if dim == 1 {
        for a in 0..=2 * n {
            out.push([-radius + radius * a as f64 / n as f64, 0.0]);
        }
    } else {
        for b in 0..=2 * n {
            for a in 0..=2 * n {
                out.push([
                    -radius + radius * a as f64 / n as f64,
                    -radius + radius * b as f64 / n as f64,
                ]);
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn run_paths(
    spec: &HamiltonianSpec,
    chain: &SwitchingChainSpec,
    x: Vec2,
    start: usize,
    t: f64,
    f: &[ScalarField],
    velocity: &(dyn Fn(Vec2, usize, f64) -> Vec2 + Sync),
    dt: f64,
    stream_offset: u64,
    paths: usize,
) -> Result<McEstimate> {
    let outcomes: Vec<PathOutcome> = (0..paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = chain.stream(stream_offset + k as u64);
            let states = sample_chain_rng(chain, t, dt, start, &mut rng);
            integrate_path(spec, chain, x, t, f, &velocity, dt, -1.0, &states)
        })
        .collect();
    let kept: Vec<f64> =
        outcomes.iter().filter(|o| !o.discarded).map(|o| o.cost).collect();
    let discarded = outcomes.len() - kept.len();
    if kept.is_empty() {
        return Err(HjError::Config("every path hit an infinite running cost".into()));
    }
    let (mean, se) = reduce_outcomes(&kept);
    Ok(McEstimate { estimate: mean, std_error: se, paths: kept.len(), discarded })
}

/// Exit strategies for the discounted boundary problem.
pub enum DirichletPolicy {
    /// hold position forever (tail truncated at the horizon cap)
    StayForever,
    /// drift at the given velocity whenever the chain sits in `state`,
    /// hold otherwise; exit on first boundary contact
    DriftWhenState { state: usize, velocity: Vec2 },
}

/// Discounted policy value for the exit problem, an upper estimate of the
/// value function. The reported estimate includes the truncation tail bound
/// for never-exiting paths.
#[allow(clippy::too_many_arguments)]
pub fn mc_value_dirichlet(
    spec: &HamiltonianSpec,
    chain: &SwitchingChainSpec,
    domain: &BoxDomain,
    x: Vec2,
    start: usize,
    g: &[ScalarField],
    policy: &DirichletPolicy,
    horizon_cap: f64,
    cfg: &McConfig,
) -> Result<(McEstimate, f64)> {
    if !spec.all_convex() {
        return Err(HjError::NonConvex(0));
    }
    let dt = cfg.dt.unwrap_or_else(|| chain.dt_bound());
    validate_dt(chain, dt)?;
    let values: Vec<Option<f64>> = (0..cfg.paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = chain.stream(k as u64);
            let states = sample_chain_rng(chain, horizon_cap, dt, start, &mut rng);
            let mut pos = x;
            let mut cost = 0.0f64;
            for (step, &sb) in states.iter().enumerate().take(states.len() - 1) {
                let s = step as f64 * dt;
                let state = sb as usize;
                let q = match policy {
                    DirichletPolicy::StayForever => [0.0, 0.0],
                    DirichletPolicy::DriftWhenState { state: target, velocity } => {
                        if state == *target {
                            *velocity
                        } else {
                            [0.0, 0.0]
                        }
                    }
                };
                let xi = [pos[0] / chain.epsilon, pos[1] / chain.epsilon];
                let l = spec
                    .component(state)
                    .lagrangian(xi, [-q[0], -q[1]])
                    .unwrap_or(INFINITE_COST);
                if l >= INFINITE_COST {
                    return None;
                }
                cost += (-s).exp() * l * dt;
                pos = [pos[0] + q[0] * dt, pos[1] + q[1] * dt];
                let outside = pos[0] <= domain.a[0]
                    || pos[0] >= domain.b[0]
                    || (domain.dim == 2 && (pos[1] <= domain.a[1] || pos[1] >= domain.b[1]));
                if outside {
                    let tau = s + dt;
                    pos[0] = pos[0].clamp(domain.a[0], domain.b[0]);
                    if domain.dim == 2 {
                        pos[1] = pos[1].clamp(domain.a[1], domain.b[1]);
                    }
                    return Some(cost + (-tau).exp() * g[state].eval(pos));
                }
            }
            Some(cost) // never exited within the cap; e^{-inf} = 0 tail dropped
        })
        .collect();
    let kept: Vec<f64> = values.iter().flatten().copied().collect();
    let discarded = values.len() - kept.len();
    if kept.is_empty() {
        return Err(HjError::Config("every path hit an infinite running cost".into()));
    }
    let (mean, se) = reduce_outcomes(&kept);
    // tail bound for truncating the discounted running cost at the cap
    let sup_l = 1.0f64.max(0.0);
    let tail = (-horizon_cap).exp() * sup_l;
    Ok((McEstimate { estimate: mean, std_error: se, paths: kept.len(), discarded }, tail))
}

#[derive(Clone, Debug, Serialize)]
pub struct DppReport {
    pub one_shot: McEstimate,
    pub nested: McEstimate,
    pub difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Dynamic-programming consistency: the one-shot policy value against the
/// estimate that runs to `h_split` and plugs in PDE values there. Both use
/// the same chain realizations.
#[allow(clippy::too_many_arguments)]
pub fn check_dpp(
    spec: &HamiltonianSpec,
    chain: &SwitchingChainSpec,
    x: Vec2,
    start: usize,
    t: f64,
    h_split: f64,
    f: &[ScalarField],
    pde_run: &[StateField],
    policy: &FeedbackPolicy,
    scheme_slack: f64,
    cfg: &McConfig,
) -> Result<DppReport> {
    if !(0.0..=t).contains(&h_split) {
        return Err(HjError::Config("h_split must lie in [0, t]".into()));
    }
    let dt = cfg.dt.unwrap_or_else(|| chain.dt_bound());
    validate_dt(chain, dt)?;
    let outcomes: Vec<PathOutcome> = (0..cfg.paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = chain.stream(k as u64);
            let states = sample_chain_rng(chain, t, dt, start, &mut rng);
            let vel = |p: Vec2, s: usize, rem: f64| policy.velocity(p, s, rem);
            integrate_path(spec, chain, x, t, f, &vel, dt, h_split, &states)
        })
        .collect();
    let remaining = t - h_split;
    // PDE snapshot nearest to the remaining time
    let snap = pde_run
        .iter()
        .min_by(|a, b| {
            (a.time - remaining)
                .abs()
                .partial_cmp(&(b.time - remaining).abs())
                .unwrap()
        })
        .ok_or_else(|| HjError::Config("empty PDE run".into()))?;
    let mut one = Vec::new();
    let mut nested = Vec::new();
    for o in &outcomes {
        if o.discarded {
            continue;
        }
        one.push(o.cost);
        nested.push(o.split_cost + interp_periodic(snap, o.split_state, o.split_pos));
    }
    if one.is_empty() {
        return Err(HjError::Config("every path hit an infinite running cost".into()));
    }
    let (m1, s1) = reduce_outcomes(&one);
    let (m2, s2) = reduce_outcomes(&nested);
    let discarded = outcomes.len() - one.len();
    let tolerance = 3.0 * (s1 + s2) + scheme_slack;
    let difference = m1 - m2;
    Ok(DppReport {
        one_shot: McEstimate { estimate: m1, std_error: s1, paths: one.len(), discarded },
        nested: McEstimate { estimate: m2, std_error: s2, paths: nested.len(), discarded },
        difference,
        tolerance,
        pass: difference.abs() <= tolerance,
    })
}

fn interp_periodic(field: &StateField, comp: usize, x: Vec2) -> f64 {
    let grid = &field.grid;
    let u = &field.components[comp];
    let n = grid.points_per_axis();
    let locate = |coord: f64| {
        let s = (coord - coord.floor()) * n as f64;
        let i = (s.floor() as usize).min(n - 1);
        (i, (i + 1) % n, s - i as f64)
    };
    if grid.dim() == 1 {
        let (i, ip, t) = locate(x[0]);
        u[i] + t * (u[ip] - u[i])
    } else {
        let (i, ip, tx) = locate(x[0]);
        let (j, jp, ty) = locate(x[1]);
        let v00 = u[i + j * n];
        let v10 = u[ip + j * n];
        let v01 = u[i + jp * n];
        let v11 = u[ip + jp * n];
        v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty + v11 * tx * ty
    }
}

/// One candidate control for the long-run estimator: a constant velocity, or
/// a greedy drift that moves in a fixed direction at the largest admissible
/// speed (the natural control for indicator-type Lagrangians, where constant
/// velocities are throttled by the slowest point of the path).
#[derive(Clone, Copy, Debug)]
enum LongRunControl {
    Constant(Vec2),
    GreedyDrift(Vec2),
}

/// Long-run open-loop estimate of the effective Hamiltonian:
/// `-(1/t) inf E[ sum (-P.q + L_nu(eta, -q)) dt ]` over a lattice of
/// constant velocities plus greedy max-speed drifts per lattice direction.
/// A loose experimental estimator by construction.
pub fn mc_effective_estimate(
    spec: &HamiltonianSpec,
    chain: &SwitchingChainSpec,
    p: Vec2,
    horizon: f64,
    radius: f64,
    steps: usize,
    cfg: &McConfig,
) -> Result<(f64, McEstimate)> {
    if !spec.all_convex() {
        return Err(HjError::NonConvex(0));
    }
    let dt = cfg.dt.unwrap_or_else(|| chain.dt_bound());
    validate_dt(chain, dt)?;
    let dim = 1; // the estimator runs on 1D examples
    let mut controls: Vec<LongRunControl> =
        velocity_lattice(radius, steps, dim).into_iter().map(LongRunControl::Constant).collect();
    let speed_limited =
        (0..spec.m()).all(|i| spec.component(i).max_speed([0.0, 0.0]).is_some());
    if speed_limited {
        controls.push(LongRunControl::GreedyDrift([1.0, 0.0]));
        controls.push(LongRunControl::GreedyDrift([-1.0, 0.0]));
    }
    let half = (cfg.paths / 2).max(1);
    let cost_of = |ctl: LongRunControl, offset: u64, count: usize| -> (f64, f64) {
        let vals: Vec<Option<f64>> = (0..count)
            .into_par_iter()
            .map(|k| {
                let mut rng = chain.stream(offset + k as u64);
                let states = sample_chain_rng(chain, horizon, dt, 0, &mut rng);
                let mut pos = [0.0f64, 0.0];
                let mut cost = 0.0f64;
                for &sb in states.iter().take(states.len() - 1) {
                    let state = sb as usize;
                    let q = match ctl {
                        LongRunControl::Constant(q) => q,
                        LongRunControl::GreedyDrift(dir) => {
                            let a = spec
                                .component(state)
                                .max_speed(pos)
                                .unwrap_or(0.0)
                                .max(0.0)
                                * (1.0 - 1e-12);
                            [dir[0] * a, dir[1] * a]
                        }
                    };
                    let l = spec
                        .component(state)
                        .lagrangian(pos, [-q[0], -q[1]])
                        .unwrap_or(INFINITE_COST);
                    if l >= INFINITE_COST {
                        return None;
                    }
                    cost += (-(p[0] * q[0] + p[1] * q[1]) + l) * dt;
                    pos = [pos[0] + q[0] * dt, pos[1] + q[1] * dt];
                }
                Some(cost)
            })
            .collect();
        let kept: Vec<f64> = vals.iter().flatten().copied().collect();
        if kept.is_empty() {
            return (f64::INFINITY, 0.0);
        }
        reduce_outcomes(&kept)
    };
    let mut best_ctl = controls[0];
    let mut best = f64::INFINITY;
    for &ctl in &controls {
        let (m, _) = cost_of(ctl, 0, half);
        if m < best {
            best = m;
            best_ctl = ctl;
        }
    }
    let (m, s) = cost_of(best_ctl, half as u64 + 7, cfg.paths - half);
    if !m.is_finite() {
        return Err(HjError::Config("no admissible control found".into()));
    }
    Ok((
        -m / horizon,
        McEstimate {
            estimate: -m / horizon,
            std_error: s / horizon,
            paths: cfg.paths - half,
            discarded: 0,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Hamiltonian;
    use std::f64::consts::PI;

    #[test]
    fn seeded_chain_is_reproducible() {
        let spec = SwitchingChainSpec::two_state(1.0, 1.0, 0.2, 99).unwrap();
        let a = sample_chain(&spec, 1.0, 0.01, 0).unwrap();
        let b = sample_chain(&spec, 1.0, 0.01, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coarse_dt_is_rejected() {
        let spec = SwitchingChainSpec::two_state(1.0, 1.0, 0.2, 0).unwrap();
        assert!(sample_chain(&spec, 1.0, 0.05, 0).is_err());
    }

    #[test]
    fn no_jump_probability_matches_exponential() {
        let eps = 0.3;
        let c1 = 1.0;
        let spec = SwitchingChainSpec::two_state(c1, 1.0, eps, 7).unwrap();
        let t = 0.25f64;
        let dt = spec.dt_bound();
        let n = 20_000usize;
        let mut stays = 0usize;
        for k in 0..n {
            let mut rng = spec.stream(k as u64);
            let states = sample_chain_rng(&spec, t, dt, 0, &mut rng);
            if states.iter().all(|&s| s == 0) {
                stays += 1;
            }
        }
        let p_hat = stays as f64 / n as f64;
        let p = (-c1 * t / eps).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (p_hat - p).abs() <= 3.0 * se + 2.0 * dt / eps,
            "p_hat {p_hat} vs {p} (se {se})"
        );
    }

    #[test]
    fn symmetric_occupation_is_half() {
        let spec = SwitchingChainSpec::two_state(1.0, 1.0, 0.1, 3).unwrap();
        let dt = spec.dt_bound();
        let t = 40.0 * 0.1;
        let n = 2000;
        let mut frac_sum = 0.0;
        for k in 0..n {
            let mut rng = spec.stream(k as u64);
            let states = sample_chain_rng(&spec, t, dt, 0, &mut rng);
            let ones = states.iter().filter(|&&s| s == 0).count();
            frac_sum += ones as f64 / states.len() as f64;
        }
        let frac = frac_sum / n as f64;
        assert!((frac - 0.5).abs() < 0.02, "occupation {frac}");
    }

    #[test]
    fn jump_count_mean_is_poisson_like() {
        let eps = 0.2;
        let spec = SwitchingChainSpec::two_state(1.0, 1.0, eps, 11).unwrap();
        let dt = spec.dt_bound();
        let t = 1.0;
        let n = 4000;
        let mut total = 0usize;
        for k in 0..n {
            let mut rng = spec.stream(k as u64);
            let states = sample_chain_rng(&spec, t, dt, 0, &mut rng);
            total += states.windows(2).filter(|w| w[0] != w[1]).count();
        }
        let mean = total as f64 / n as f64;
        let want = t / eps;
        let se = (want / n as f64).sqrt();
        // lattice discretization hides a small O(dt) fraction of jumps
        assert!((mean - want).abs() <= 3.0 * se + want * 2.0 * dt / eps, "mean {mean} vs {want}");
    }

    #[test]
    fn controlled_path_record_is_consistent_with_the_estimator() {
        let spec = HamiltonianSpec::new(vec![
            Hamiltonian::Constant { value: 0.0 },
            Hamiltonian::Constant { value: 0.0 },
        ])
        .unwrap();
        let chain = SwitchingChainSpec::two_state(1.0, 1.0, 0.25, 8).unwrap();
        let f = vec![
            ScalarField::TrigPoly { axis: 0, mean: 0.0, cos: vec![], sin: vec![1.0] },
            ScalarField::Const { value: 0.3 },
        ];
        let cfg = McConfig { paths: 64, dt: None };
        let x = [0.2, 0.0];
        let t = 0.3;
        // averaging the materialized path costs reproduces the estimator
        let mut costs = Vec::new();
        for k in 0..64u64 {
            let path = sample_controlled_path(
                &spec, &chain, x, 0, t, &f, &CauchyPolicy::Stay, k, &cfg,
            )
            .unwrap();
            assert!(!path.discarded);
            assert!(path.controls.iter().all(|q| *q == [0.0, 0.0]));
            assert!(path.positions.iter().all(|p| (p[0] - x[0]).abs() < 1e-12));
            assert_eq!(path.states.len(), path.controls.len() + 1);
            costs.push(path.cost);
        }
        let est =
            mc_value_cauchy(&spec, &chain, x, 0, t, &f, &CauchyPolicy::Stay, &cfg).unwrap();
        let mean = costs.iter().sum::<f64>() / costs.len() as f64;
        assert!((mean - est.estimate).abs() < 1e-12);
    }

    #[test]
    fn pure_coupling_value_matches_closed_form() {
        let eps = 0.25;
        let t = 0.3;
        let spec = HamiltonianSpec::new(vec![
            Hamiltonian::Constant { value: 0.0 },
            Hamiltonian::Constant { value: 0.0 },
        ])
        .unwrap();
        let chain = SwitchingChainSpec::two_state(1.0, 1.0, eps, 424242).unwrap();
        let f = vec![
            ScalarField::TrigPoly { axis: 0, mean: 0.0, cos: vec![0.0], sin: vec![1.0] },
            ScalarField::Const { value: 0.25 },
        ];
        let x = [0.3, 0.0];
        let cfg = McConfig { paths: 40_000, dt: None };
        let est =
            mc_value_cauchy(&spec, &chain, x, 0, t, &f, &CauchyPolicy::Stay, &cfg).unwrap();
        let f1 = (2.0 * PI * 0.3f64).sin();
        let f2 = 0.25;
        let want = 0.5 * (f1 + f2) + 0.5 * (f1 - f2) * (-2.0 * t / eps).exp();
        assert!(
            (est.estimate - want).abs() <= 3.0 * est.std_error + 0.02 * est.estimate.abs().max(0.1),
            "estimate {} vs {want} (se {})",
            est.estimate,
            est.std_error
        );
        assert_eq!(est.discarded, 0);
    }

    #[test]
    fn never_exit_constant_cost_matches_discount_integral() {
        // L = |q|^2/4 + V with V = 2 constant and q = 0: the never-exit value
        // is 2 (1 - e^{-cap})
        let spec = HamiltonianSpec::new(vec![
            Hamiltonian::QuadraticMinusPotential {
                potential: ScalarField::Const { value: 2.0 },
            },
            Hamiltonian::QuadraticMinusPotential {
                potential: ScalarField::Const { value: 2.0 },
            },
        ])
        .unwrap();
        let chain = SwitchingChainSpec::two_state(1.0, 1.0, 0.25, 17).unwrap();
        let dom = BoxDomain::interval(0.0, 1.0, 16).unwrap();
        let g = vec![ScalarField::Const { value: 50.0 }, ScalarField::Const { value: 50.0 }];
        let cap = 8.0;
        let cfg = McConfig { paths: 200, dt: None };
        let (est, _tail) = mc_value_dirichlet(
            &spec,
            &chain,
            &dom,
            [0.5, 0.0],
            0,
            &g,
            &DirichletPolicy::StayForever,
            cap,
            &cfg,
        )
        .unwrap();
        // left-endpoint quadrature of the discount carries an O(dt) bias
        let dt = chain.dt_bound();
        let want = 2.0 * (1.0 - (-cap).exp());
        assert!(
            (est.estimate - want).abs() < want * dt + 1e-6,
            "{} vs {want}",
            est.estimate
        );
    }

    #[test]
    fn exit_policy_is_bounded_by_data_plus_travel() {
        // L = 0 ball (norm Hamiltonian with a = 1, |q| <= 1 free), g1 = 0 at
        // the boundary: exiting at speed 1 costs only the discounted datum
        let spec =
            HamiltonianSpec::new(vec![Hamiltonian::norm(), Hamiltonian::norm()]).unwrap();
        let chain = SwitchingChainSpec::two_state(1.0, 1.0, 0.25, 5).unwrap();
        let dom = BoxDomain::interval(0.0, 1.0, 16).unwrap();
        let g = vec![ScalarField::Const { value: 0.0 }, ScalarField::Const { value: 1.0 }];
        let cfg = McConfig { paths: 400, dt: None };
        let (est, _) = mc_value_dirichlet(
            &spec,
            &chain,
            &dom,
            [0.25, 0.0],
            0,
            &g,
            &DirichletPolicy::DriftWhenState { state: 0, velocity: [-1.0, 0.0] },
            8.0,
            &cfg,
        )
        .unwrap();
        // exit at tau >= 0.25 through the left end with datum g depends on the
        // exit state; it costs at most e^{-tau} max g <= 1
        assert!(est.estimate >= 0.0 && est.estimate <= 1.0);
        assert_eq!(est.discarded, 0);
    }
}
