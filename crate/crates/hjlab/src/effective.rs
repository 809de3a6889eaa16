//! The effective Cauchy problem with a tabulated Hamiltonian, the matched
//! asymptotic solutions built on top of it, and the rate-of-convergence
//! harness comparing the oscillatory runs against them.

use crate::cell::EffectiveTable;
use crate::coupling::CouplingMatrix;
use crate::error::{HjError, Result};
use crate::evolution::{self, EpsSystemProblem};
use crate::grid::{StateField, TorusGrid};
use crate::hamiltonian::HamiltonianSpec;
use crate::scalar_field::ScalarField;
use rayon::prelude::*;
use serde::Serialize;

const DT_SAFETY: f64 = 0.9;

/// Cauchy problem for the homogenized equation.
#[derive(Clone, Debug)]
pub struct EffectiveProblem {
    pub table: EffectiveTable,
    pub grid: TorusGrid,
    /// effective initial datum (the pi-weighted combination of the f_i)
    pub f_bar: Vec<f64>,
    pub horizon: f64,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct EffectiveStats {
    pub dt: f64,
    pub steps: usize,
    pub theta: f64,
    /// interpolation queries clamped to the table hull; nonzero is a warning
    pub clamped_queries: usize,
}

impl EffectiveProblem {
    pub fn validate(&self) -> Result<()> {
        if !self.table.complete() {
            return Err(HjError::Config("effective table has failed entries".into()));
        }
        if self.table.dim() != self.grid.dim() {
            return Err(HjError::Config("table and grid dimensions differ".into()));
        }
        if self.f_bar.len() != self.grid.len() {
            return Err(HjError::Config("f_bar length does not match grid".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(HjError::Config("horizon must be positive".into()));
        }
        Ok(())
    }
}

/// Monotone LF evolution of `u_t + H_bar(Du) = 0` with the interpolated
/// table; the LF constant is the table's maximal inter-sample slope.
pub fn solve_effective(
    problem: &EffectiveProblem,
    sample_times: &[f64],
) -> Result<(Vec<StateField>, EffectiveStats)> {
    problem.validate()?;
    if sample_times.is_empty() {
        return Err(HjError::Config("need at least one sample time".into()));
    }
    for w in sample_times.windows(2) {
        if w[1] <= w[0] {
            return Err(HjError::Config("sample times must be strictly increasing".into()));
        }
    }
    let grid = problem.grid;
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let dim = grid.dim();
    let theta = problem.table.max_slope();
    let dt0 = if theta > 0.0 {
        DT_SAFETY * h / (2.0 * dim as f64 * theta)
    } else {
        problem.horizon / 16.0
    };
    let events = evolution::time_schedule(dt0, sample_times);

    let mut u = problem.f_bar.clone();
    let mut next = u.clone();
    let mut t = 0.0f64;
    let mut stats = EffectiveStats { dt: dt0, steps: 0, theta, clamped_queries: 0 };
    let mut snapshots = Vec::with_capacity(sample_times.len());
    let table = &problem.table;

    for (time, sample) in events {
        let dt = time - t;
        if dt > 1e-15 {
            let clamped: usize = if dim == 1 {
                let kernel = |start: usize, out: &mut [f64]| -> usize {
                    let mut local = 0usize;
                    for (k, o) in out.iter_mut().enumerate() {
                        let idx = start + k;
                        let um = u[if idx == 0 { n - 1 } else { idx - 1 }];
                        let up = u[if idx + 1 == n { 0 } else { idx + 1 }];
                        let pm = (u[idx] - um) / h;
                        let pp = (up - u[idx]) / h;
                        let (hv, cl) = table.interp([(pm + pp) * 0.5, 0.0]);
                        if cl {
                            local += 1;
                        }
                        *o = u[idx] - dt * (hv - 0.5 * theta * (pp - pm));
                    }
                    local
                };
                if grid.len() >= 4096 {
                    next.par_chunks_mut(1024)
                        .enumerate()
                        .map(|(c, slice)| kernel(c * 1024, slice))
                        .sum()
                } else {
                    kernel(0, next.as_mut_slice())
                }
            } else {
                let kernel = |j: usize, row: &mut [f64]| -> usize {
                    let mut local = 0usize;
                    let jm = if j == 0 { n - 1 } else { j - 1 };
                    let jp = if j + 1 == n { 0 } else { j + 1 };
                    for (ii, o) in row.iter_mut().enumerate() {
                        let idx = ii + j * n;
                        let im = if ii == 0 { n - 1 } else { ii - 1 };
                        let ip = if ii + 1 == n { 0 } else { ii + 1 };
                        let pmx = (u[idx] - u[im + j * n]) / h;
                        let ppx = (u[ip + j * n] - u[idx]) / h;
                        let pmy = (u[idx] - u[ii + jm * n]) / h;
                        let ppy = (u[ii + jp * n] - u[idx]) / h;
                        let (hv, cl) = table.interp([(pmx + ppx) * 0.5, (pmy + ppy) * 0.5]);
                        if cl {
                            local += 1;
                        }
                        *o = u[idx] - dt * (hv - 0.5 * theta * (ppx - pmx + ppy - pmy));
                    }
                    local
                };
                if grid.len() >= 4096 {
                    next.par_chunks_mut(n).enumerate().map(|(j, row)| kernel(j, row)).sum()
                } else {
                    next.chunks_mut(n).enumerate().map(|(j, row)| kernel(j, row)).sum()
                }
            };
            stats.clamped_queries += clamped;
            std::mem::swap(&mut u, &mut next);
            stats.steps += 1;
            t = time;
        } else {
            t = t.max(time);
        }
        if let Some(si) = sample {
            snapshots.push(StateField::new(grid, sample_times[si], vec![u.clone()])?);
        }
    }
    Ok((snapshots, stats))
}

/// Inner (fast-time) solution of the 2-component switching system with the
/// Hamiltonian terms dropped: `w_i = f_bar +- (f_1 - f_2)/2 e^{-2 t}`.
pub fn inner_solution(f: &[Vec<f64>], t_fast: f64) -> Result<Vec<Vec<f64>>> {
    if f.len() != 2 {
        return Err(HjError::Config("inner solution is the 2-component formula".into()));
    }
    let decay = (-2.0 * t_fast).exp();
    let mut out = vec![vec![0.0; f[0].len()]; 2];
    for idx in 0..f[0].len() {
        let fbar = 0.5 * (f[0][idx] + f[1][idx]);
        let half = 0.5 * (f[0][idx] - f[1][idx]);
        out[0][idx] = fbar + half * decay;
        out[1][idx] = fbar - half * decay;
    }
    Ok(out)
}

/// Outer solution plus the exponentially decaying initial layer.
#[derive(Clone, Debug)]
pub struct MatchedTrajectory {
    pub epsilon: f64,
    /// one m-component field per sample time of the underlying effective run
    pub fields: Vec<StateField>,
}

/// Assemble `m_i = u + (f_i - f_j)/2 e^{-2t/eps}` at the sample times of an
/// effective run on the same grid.
pub fn matched_solutions(
    u_run: &[StateField],
    f: &[Vec<f64>],
    epsilon: f64,
) -> Result<MatchedTrajectory> {
    if f.len() != 2 {
        return Err(HjError::Config("matched solutions need exactly 2 components".into()));
    }
    let mut fields = Vec::with_capacity(u_run.len());
    for snap in u_run {
        if f[0].len() != snap.grid.len() {
            return Err(HjError::Config("initial data does not match the run grid".into()));
        }
        let decay = (-2.0 * snap.time / epsilon).exp();
        let u = &snap.components[0];
        let mut comps = vec![vec![0.0; u.len()]; 2];
        for idx in 0..u.len() {
            let half = 0.5 * (f[0][idx] - f[1][idx]) * decay;
            comps[0][idx] = u[idx] + half;
            comps[1][idx] = u[idx] - half;
        }
        fields.push(StateField::new(snap.grid, snap.time, comps)?);
    }
    Ok(MatchedTrajectory { epsilon, fields })
}

#[derive(Clone, Debug)]
pub struct RateHarnessConfig<'a> {
    pub spec: &'a HamiltonianSpec,
    pub coupling: &'a CouplingMatrix,
    /// initial data families, evaluated on each epsilon's grid
    pub f: &'a [ScalarField],
    /// decreasing
    pub eps_list: Vec<f64>,
    pub horizon: f64,
    /// grid rule: N = ceil(eps_cells / eps), i.e. h <= eps / eps_cells
    pub eps_cells: usize,
    pub table: &'a EffectiveTable,
    pub r_grad: f64,
    /// number of uniform comparison times in (0, horizon]
    pub time_samples: usize,
    /// extra times to include in every run's sample set
    pub extra_sample_times: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub epsilon: f64,
    pub grid_n: usize,
    pub e_total: f64,
    pub e_layer: f64,
    pub e_bulk: f64,
    /// the initial-layer window eps |log eps|
    pub layer_window: f64,
    /// E_layer / (eps |log eps|)
    pub layer_constant: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// least-squares slope of log E against log eps
    pub fitted_slope: f64,
    pub fit_intercept: f64,
    /// pairwise slopes between consecutive epsilons
    pub per_point_ratios: Vec<f64>,
}

/// Everything one epsilon run produced, kept for downstream checks
/// (barriers, component gaps, effective-datum trends).
#[derive(Clone, Debug)]
pub struct RateRunData {
    pub epsilon: f64,
    pub problem: EpsSystemProblem,
    pub coupled: Vec<StateField>,
    pub effective: Vec<StateField>,
    pub matched: MatchedTrajectory,
}

pub struct RateOutput {
    pub report: RateReport,
    pub runs: Vec<RateRunData>,
}

/// For each epsilon: solve the oscillatory system on the tied grid, solve the
/// effective problem on the same grid, assemble the matched solutions, and
/// record sup-norm errors split into the initial-layer window and the bulk.
pub fn rate_harness(cfg: &RateHarnessConfig) -> Result<RateOutput> {
    if cfg.eps_list.len() < 2 {
        return Err(HjError::Config("need at least two epsilons".into()));
    }
    for w in cfg.eps_list.windows(2) {
        if w[1] >= w[0] {
            return Err(HjError::Config("eps_list must be strictly decreasing".into()));
        }
    }
    if cfg.f.len() != cfg.spec.m() {
        return Err(HjError::Config("initial data and spec component counts differ".into()));
    }

    let runs: Vec<Result<RateRunData>> =
        cfg.eps_list.par_iter().map(|&eps| run_one(cfg, eps)).collect();
    let mut out_runs = Vec::with_capacity(runs.len());
    for r in runs {
        out_runs.push(r?);
    }

    let mut rows = Vec::with_capacity(out_runs.len());
    for run in &out_runs {
        let layer_window = run.epsilon * run.epsilon.ln().abs();
        let mut e_total = 0.0f64;
        let mut e_layer = 0.0f64;
        let mut e_bulk = 0.0f64;
        for (snap, m) in run.coupled.iter().zip(&run.matched.fields) {
            let d = snap.sup_distance(m);
            e_total = e_total.max(d);
            if snap.time <= layer_window + 1e-12 {
                e_layer = e_layer.max(d);
            }
            if snap.time >= layer_window - 1e-12 {
                e_bulk = e_bulk.max(d);
            }
        }
        rows.push(RateRow {
            epsilon: run.epsilon,
            grid_n: run.problem.grid.points_per_axis(),
            e_total,
            e_layer,
            e_bulk,
            layer_window,
            layer_constant: e_layer / layer_window,
        });
    }

    // least squares on (log eps, log E)
    let xs: Vec<f64> = rows.iter().map(|r| r.epsilon.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.e_total.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mut ratios = Vec::new();
    for w in rows.windows(2) {
        ratios.push(
            (w[0].e_total.ln() - w[1].e_total.ln()) / (w[0].epsilon.ln() - w[1].epsilon.ln()),
        );
    }

    Ok(RateOutput {
        report: RateReport {
            rows,
            fitted_slope: slope,
            fit_intercept: intercept,
            per_point_ratios: ratios,
        },
        runs: out_runs,
    })
}

fn run_one(cfg: &RateHarnessConfig, eps: f64) -> Result<RateRunData> {
    let n = (cfg.eps_cells as f64 / eps - 1e-9).ceil() as usize;
    let grid = TorusGrid::new(cfg.table.dim(), n.max(8))?;
    let initial: Vec<Vec<f64>> = cfg.f.iter().map(|f| grid.sample(|x| f.eval(x))).collect();
    let problem = EpsSystemProblem {
        grid,
        spec: cfg.spec.clone(),
        coupling: cfg.coupling.clone(),
        epsilon: eps,
        initial: initial.clone(),
        horizon: cfg.horizon,
        r_grad: cfg.r_grad,
    };

    // comparison times: uniform in (0, T], refined inside the layer window
    let layer = eps * eps.ln().abs();
    let mut times: Vec<f64> = (1..=cfg.time_samples)
        .map(|k| cfg.horizon * k as f64 / cfg.time_samples as f64)
        .collect();
    for k in 1..=8 {
        times.push(layer * k as f64 / 8.0);
    }
    times.extend(cfg.extra_sample_times.iter().copied());
    times.retain(|t| *t > 0.0 && *t <= cfg.horizon + 1e-12);
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let (coupled, _) = evolution::evolve(&problem, &times)?;

    let pi = cfg.coupling.perron_left();
    let mut f_bar = vec![0.0; grid.len()];
    for (i, f) in initial.iter().enumerate() {
        for (fb, v) in f_bar.iter_mut().zip(f) {
            *fb += pi[i] * v;
        }
    }
    let eff_problem =
        EffectiveProblem { table: cfg.table.clone(), grid, f_bar, horizon: cfg.horizon };
    let (effective, _) = solve_effective(&eff_problem, &times)?;
    let matched = matched_solutions(&effective, &initial, eps)?;
    Ok(RateRunData { epsilon: eps, problem, coupled, effective, matched })
}
