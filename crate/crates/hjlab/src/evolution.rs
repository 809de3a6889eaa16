//! Time-dependent solver for the fast-switching system: explicit monotone
//! Lax-Friedrichs step for the Hamiltonian part, exact matrix-exponential
//! step for the stiff linear coupling (Lie splitting), plus the barrier
//! constructions that sandwich the solution.

use crate::coupling::{CouplingMatrix, SmallMatrix};
use crate::error::{HjError, Result};
use crate::grid::{StateField, TorusGrid};
use crate::hamiltonian::{HamiltonianSpec, SampledSystem};
use rayon::prelude::*;
use serde::Serialize;

const DT_SAFETY: f64 = 0.9;
/// below this many gridpoints the substep runs single-threaded
const PAR_THRESHOLD: usize = 4096;

#[derive(Clone, Debug)]
pub struct EpsSystemProblem {
    pub grid: TorusGrid,
    pub spec: HamiltonianSpec,
    pub coupling: CouplingMatrix,
    pub epsilon: f64,
    /// initial data f_i sampled on the grid
    pub initial: Vec<Vec<f64>>,
    pub horizon: f64,
    /// gradient range defining the global LF constant
    pub r_grad: f64,
}

impl EpsSystemProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(HjError::Config("epsilon must be positive".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(HjError::Config("horizon must be positive".into()));
        }
        let m = self.spec.m();
        if self.coupling.m() != m || self.initial.len() != m {
            return Err(HjError::Config(format!(
                "component counts disagree: spec {m}, coupling {}, initial {}",
                self.coupling.m(),
                self.initial.len()
            )));
        }
        for (i, f) in self.initial.iter().enumerate() {
            if f.len() != self.grid.len() {
                return Err(HjError::Config(format!("initial component {i} has wrong length")));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(HjError::NonFinite(format!("initial component {i}")));
            }
        }
        // solving on the unit torus requires the oscillation to fit it
        let inv = 1.0 / self.epsilon;
        let periodic_ok = (inv - inv.round()).abs() < 1e-9;
        if !periodic_ok && self.has_xi_dependence() {
            return Err(HjError::Config(format!(
                "1/epsilon = {inv} is not an integer: H(x/eps) would not be 1-periodic on the torus"
            )));
        }
        Ok(())
    }

    fn has_xi_dependence(&self) -> bool {
        fn field_varies(f: &crate::scalar_field::ScalarField) -> bool {
            use crate::scalar_field::ScalarField as S;
            match f {
                S::Const { .. } => false,
                S::Scale { field, .. } => field_varies(field),
                S::Sum { terms } => terms.iter().any(field_varies),
                _ => true,
            }
        }
        fn ham_varies(h: &crate::hamiltonian::Hamiltonian) -> bool {
            use crate::hamiltonian::Hamiltonian as H;
            match h {
                H::Constant { .. } | H::DoubleWell => false,
                H::QuadraticMinusPotential { potential } => field_varies(potential),
                H::ScaledNorm { coeff } => field_varies(coeff),
                H::MaxOf { a, b } => ham_varies(a) || ham_varies(b),
            }
        }
        self.spec.components().iter().any(ham_varies)
    }

    fn sampled(&self) -> SampledSystem {
        SampledSystem::new(&self.spec, &self.grid, 1.0 / self.epsilon, self.r_grad)
    }

    pub fn initial_field(&self) -> StateField {
        StateField::new(self.grid, 0.0, self.initial.clone()).expect("validated initial data")
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct RunStats {
    pub dt: f64,
    pub steps: usize,
    pub theta: f64,
    /// largest one-sided gradient component encountered
    pub max_gradient: f64,
    /// true if the run left the configured gradient range [-r_grad, r_grad]
    pub grad_range_exceeded: bool,
}

/// The automatic step size `evolve` uses: the CFL bound with a safety factor.
pub fn step_size(problem: &EpsSystemProblem) -> f64 {
    let sys = problem.sampled();
    stable_dt(&sys, &problem.grid, problem.horizon)
}

fn stable_dt(sys: &SampledSystem, grid: &TorusGrid, horizon: f64) -> f64 {
    if sys.theta > 0.0 {
        DT_SAFETY * grid.spacing() / (2.0 * grid.dim() as f64 * sys.theta)
    } else {
        // pure coupling: the split flow is exact for any dt
        horizon / 16.0
    }
}

/// One Lie-split step: explicit monotone Hamiltonian update, then the exact
/// coupling propagator exp(dt (K - I)/eps) applied pointwise.
pub fn step(problem: &EpsSystemProblem, state: &StateField, dt: f64) -> Result<StateField> {
    problem.validate()?;
    let sys = problem.sampled();
    if sys.theta > 0.0 {
        let bound = problem.grid.spacing() / (2.0 * problem.grid.dim() as f64 * sys.theta);
        if dt > bound * (1.0 + 1e-12) {
            return Err(HjError::Cfl { given: dt, required: bound });
        }
    }
    let prop = problem.coupling.propagator(dt / problem.epsilon);
    let mut comps = state.components.clone();
    let mut scratch = comps.clone();
    ham_substep(&sys, &problem.grid, &comps, dt, &mut scratch);
    std::mem::swap(&mut comps, &mut scratch);
    coupling_substep(&prop, &mut comps);
    StateField::new(state.grid, state.time + dt, comps)
}

/// March the system and return snapshots at the requested times.
///
/// The stepping grid is the union of the uniform multiples of the automatic
/// dt and the requested sample times, so observing the run at times already
/// on the uniform grid does not perturb the trajectory.
pub fn evolve(problem: &EpsSystemProblem, sample_times: &[f64]) -> Result<(Vec<StateField>, RunStats)> {
    problem.validate()?;
    if sample_times.is_empty() {
        return Err(HjError::Config("need at least one sample time".into()));
    }
    for w in sample_times.windows(2) {
        if w[1] <= w[0] {
            return Err(HjError::Config("sample times must be strictly increasing".into()));
        }
    }
    let t_end = *sample_times.last().unwrap();
    if sample_times[0] < 0.0 || t_end > problem.horizon * (1.0 + 1e-12) {
        return Err(HjError::Config("sample times must lie in [0, horizon]".into()));
    }

    let sys = problem.sampled();
    let dt0 = stable_dt(&sys, &problem.grid, problem.horizon);
    let events = time_schedule(dt0, sample_times);

    let mut comps = problem.initial.clone();
    let mut scratch = comps.clone();
    let mut t = 0.0f64;
    let mut snapshots: Vec<StateField> = Vec::with_capacity(sample_times.len());
    let mut stats = RunStats { dt: dt0, steps: 0, theta: sys.theta, ..Default::default() };

    // propagator cache: most steps share dt0
    let prop_base = problem.coupling.propagator(dt0 / problem.epsilon);

    for (time, sample) in events {
        let dt = time - t;
        if dt > 1e-15 {
            let g = ham_substep(&sys, &problem.grid, &comps, dt, &mut scratch);
            stats.max_gradient = stats.max_gradient.max(g);
            std::mem::swap(&mut comps, &mut scratch);
            let prop = if (dt - dt0).abs() < f64::EPSILON * dt0 {
                prop_base.clone()
            } else {
                problem.coupling.propagator(dt / problem.epsilon)
            };
            coupling_substep(&prop, &mut comps);
            stats.steps += 1;
            t = time;
        } else {
            t = time.max(t);
        }
        if sample.is_some() {
            snapshots.push(StateField::new(problem.grid, sample_times[sample.unwrap()], comps.clone())?);
        }
    }
    stats.grad_range_exceeded = stats.max_gradient > problem.r_grad;
    Ok((snapshots, stats))
}

/// Merged stepping schedule: uniform multiples of dt0 plus the sample times,
/// as (time, sample index) events in increasing order. The uniform grid is
/// absolute (it re-aligns after an off-grid sample), so samples only perturb
/// their own cell.
pub(crate) fn time_schedule(dt0: f64, sample_times: &[f64]) -> Vec<(f64, Option<usize>)> {
    let t_end = *sample_times.last().unwrap();
    let mut events: Vec<(f64, Option<usize>)> = Vec::new();
    let mut k = 1usize;
    let mut si = 0usize;
    loop {
        let tu = k as f64 * dt0;
        let ts = sample_times.get(si).copied();
        match ts {
            Some(s) if s <= tu * (1.0 + 1e-12) || tu > t_end => {
                if s == 0.0 {
                    events.push((0.0, Some(si)));
                } else if (s - tu).abs() < 1e-12 * (1.0 + tu) {
                    events.push((tu, Some(si)));
                    k += 1;
                } else {
                    events.push((s, Some(si)));
                }
                si += 1;
                if si >= sample_times.len() {
                    break;
                }
            }
            _ => {
                if tu >= t_end {
                    break;
                }
                events.push((tu, None));
                k += 1;
            }
        }
    }
    events
}

/// Explicit monotone update of every component; returns the largest gradient
/// component seen. Output arrays are written disjointly so the result is
/// independent of the thread count bit for bit.
fn ham_substep(
    sys: &SampledSystem,
    grid: &TorusGrid,
    u: &[Vec<f64>],
    dt: f64,
    out: &mut [Vec<f64>],
) -> f64 {
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let total = grid.len();
    let mut max_grad = 0.0f64;
    for (i, oi) in out.iter_mut().enumerate() {
        let ui = &u[i];
        let g = if grid.dim() == 1 {
            let row_kernel = |start: usize, slice: &mut [f64]| -> f64 {
                let mut local = 0.0f64;
                for (k, o) in slice.iter_mut().enumerate() {
                    let idx = start + k;
                    let um = ui[if idx == 0 { n - 1 } else { idx - 1 }];
                    let up = ui[if idx + 1 == n { 0 } else { idx + 1 }];
                    let pm = (ui[idx] - um) / h;
                    let pp = (up - ui[idx]) / h;
                    local = local.max(pm.abs()).max(pp.abs());
                    *o = ui[idx] - dt * sys.flux(i, idx, [pm, 0.0], [pp, 0.0]);
                }
                local
            };
            if total >= PAR_THRESHOLD {
                let chunk = 1024;
                oi.par_chunks_mut(chunk)
                    .enumerate()
                    .map(|(c, slice)| row_kernel(c * chunk, slice))
                    .reduce(|| 0.0, f64::max)
            } else {
                row_kernel(0, oi.as_mut_slice())
            }
        } else {
            let row_kernel = |j: usize, row: &mut [f64]| -> f64 {
                let mut local = 0.0f64;
                let jm = if j == 0 { n - 1 } else { j - 1 };
                let jp = if j + 1 == n { 0 } else { j + 1 };
                for (ii, o) in row.iter_mut().enumerate() {
                    let idx = ii + j * n;
                    let im = if ii == 0 { n - 1 } else { ii - 1 };
                    let ip = if ii + 1 == n { 0 } else { ii + 1 };
                    let pmx = (ui[idx] - ui[im + j * n]) / h;
                    let ppx = (ui[ip + j * n] - ui[idx]) / h;
                    let pmy = (ui[idx] - ui[ii + jm * n]) / h;
                    let ppy = (ui[ii + jp * n] - ui[idx]) / h;
                    local = local
                        .max(pmx.abs())
                        .max(ppx.abs())
                        .max(pmy.abs())
                        .max(ppy.abs());
                    *o = ui[idx] - dt * sys.flux(i, idx, [pmx, pmy], [ppx, ppy]);
                }
                local
            };
            if total >= PAR_THRESHOLD {
                oi.par_chunks_mut(n)
                    .enumerate()
                    .map(|(j, row)| row_kernel(j, row))
                    .reduce(|| 0.0, f64::max)
            } else {
                oi.chunks_mut(n)
                    .enumerate()
                    .map(|(j, row)| row_kernel(j, row))
                    .fold(0.0, f64::max)
            }
        };
        max_grad = max_grad.max(g);
    }
    max_grad
}

/// Apply the coupling propagator to the m-vector of component values at
/// every gridpoint.
fn coupling_substep(prop: &SmallMatrix, comps: &mut [Vec<f64>]) {
    let m = comps.len();
    if m == 1 {
        return;
    }
    let npts = comps[0].len();
    let mut xs = [0.0f64; crate::coupling::MAX_COMPONENTS];
    let mut ys = [0.0f64; crate::coupling::MAX_COMPONENTS];
    for idx in 0..npts {
        for (i, c) in comps.iter().enumerate() {
            xs[i] = c[idx];
        }
        prop.apply(&xs[..m], &mut ys[..m]);
        for (i, c) in comps.iter_mut().enumerate() {
            c[idx] = ys[i];
        }
    }
}

/// Sub/supersolution pair sandwiching the system: the averaged data plus the
/// decaying oscillation, offset by +-Ct.
#[derive(Clone, Debug)]
pub struct BarrierPair {
    pub c: f64,
    /// Lipschitz radius r = sum_i Lip(f_i) used to compute C
    pub lip_radius: f64,
    pub pi: Vec<f64>,
    pub f_bar: Vec<f64>,
    /// f_i - f_bar per component
    pub osc0: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub coupling: CouplingMatrix,
    pub grid: TorusGrid,
    /// the averaged datum equals the plain mean only in this case; flagged in
    /// reports when false
    pub doubly_stochastic: bool,
}

pub fn build_barriers(problem: &EpsSystemProblem) -> Result<BarrierPair> {
    problem.validate()?;
    let grid = problem.grid;
    let m = problem.spec.m();
    let r: f64 = (0..m)
        .map(|i| crate::grid::discrete_lipschitz(&grid, &problem.initial[i]))
        .sum();
    let c = problem.spec.sup_abs_on_ball(r, grid.dim());
    let pi = problem.coupling.perron_left();
    let mut f_bar = vec![0.0; grid.len()];
    for (i, f) in problem.initial.iter().enumerate() {
        for (fb, v) in f_bar.iter_mut().zip(f) {
            *fb += pi[i] * v;
        }
    }
    let osc0: Vec<Vec<f64>> = problem
        .initial
        .iter()
        .map(|f| f.iter().zip(&f_bar).map(|(v, fb)| v - fb).collect())
        .collect();
    Ok(BarrierPair {
        c,
        lip_radius: r,
        pi,
        f_bar,
        osc0,
        epsilon: problem.epsilon,
        coupling: problem.coupling.clone(),
        grid,
        doubly_stochastic: problem.coupling.is_doubly_stochastic(),
    })
}

impl BarrierPair {
    /// (lower, upper) barrier fields at time t.
    pub fn at(&self, t: f64) -> (StateField, StateField) {
        let m = self.osc0.len();
        let prop = self.coupling.propagator(t / self.epsilon);
        let npts = self.grid.len();
        let mut lower = vec![vec![0.0; npts]; m];
        let mut upper = vec![vec![0.0; npts]; m];
        let mut xs = [0.0f64; crate::coupling::MAX_COMPONENTS];
        let mut ys = [0.0f64; crate::coupling::MAX_COMPONENTS];
        for idx in 0..npts {
            for (i, o) in self.osc0.iter().enumerate() {
                xs[i] = o[idx];
            }
            prop.apply(&xs[..m], &mut ys[..m]);
            for i in 0..m {
                let core = self.f_bar[idx] + ys[i];
                lower[i][idx] = core - self.c * t;
                upper[i][idx] = core + self.c * t;
            }
        }
        (
            StateField::new(self.grid, t, lower).expect("finite barriers"),
            StateField::new(self.grid, t, upper).expect("finite barriers"),
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub checked: usize,
    pub violations: usize,
    pub max_lower_violation: f64,
    pub max_upper_violation: f64,
    pub slack: f64,
}

/// Check `lower - slack <= u <= upper + slack` across a run; violations are
/// data, not errors.
pub fn check_sandwich(run: &[StateField], barriers: &BarrierPair, slack: f64) -> SandwichReport {
    let mut rep = SandwichReport {
        checked: 0,
        violations: 0,
        max_lower_violation: 0.0,
        max_upper_violation: 0.0,
        slack,
    };
    for field in run {
        let (lower, upper) = barriers.at(field.time);
        for i in 0..field.m() {
            for (idx, &v) in field.components[i].iter().enumerate() {
                rep.checked += 1;
                let lo = lower.components[i][idx] - slack;
                let hi = upper.components[i][idx] + slack;
                if v < lo {
                    rep.violations += 1;
                    rep.max_lower_violation = rep.max_lower_violation.max(lo - v);
                }
                if v > hi {
                    rep.violations += 1;
                    rep.max_upper_violation = rep.max_upper_violation.max(v - hi);
                }
            }
        }
    }
    rep
}
