//! Discounted cell problems: extract the effective Hamiltonian and the
//! correctors, with computable lower/upper certificate bounds.
//!
//! The solver marches the discounted system
//!
//! ```text
//! d/dtau v_i + H_i(xi, P + D v_i) + (1 + delta) v_i - sum_j c_ij v_j = 0
//! ```
//!
//! to steady state with the monotone LF flux, coupling and discount treated
//! explicitly. The joint mean is slaved to the rest of the field (the
//! discounted equation pins it algebraically), which removes the one
//! delta-slow mode from the march; the fixed point is identical.

use crate::coupling::CouplingMatrix;
use crate::error::{HjError, Result};
use crate::grid::{TorusGrid, Vec2};
use crate::hamiltonian::{HamiltonianSpec, SampledSystem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const PAR_THRESHOLD: usize = 4096;

#[derive(Clone, Debug)]
pub struct CellConfig {
    pub grid: TorusGrid,
    /// steady-state residual tolerance (per unit pseudo-time)
    pub tol: f64,
    pub max_iters: usize,
    pub r_grad: f64,
    /// grid resolution must satisfy h <= delta * h_factor
    pub h_factor: f64,
    pub dt_safety: f64,
}

impl CellConfig {
    pub fn new(grid: TorusGrid) -> Self {
        Self { grid, tol: 1e-6, max_iters: 4_000_000, r_grad: 8.0, h_factor: 1.0, dt_safety: 0.9 }
    }
}

#[derive(Clone, Debug)]
pub struct CellSolution {
    pub p: Vec2,
    pub delta: f64,
    pub grid: TorusGrid,
    /// the discounted solution v_i^delta
    pub v: Vec<Vec<f64>>,
    pub h_bar_estimate: f64,
    pub residual: f64,
    pub iterations: usize,
    /// C such that max_{i,xi} |delta v_i + H_bar| = C * delta
    pub flatness_constant: f64,
}

impl CellSolution {
    /// Mean-zero part of v (what the march actually iterates on).
    fn oscillation(&self) -> Vec<Vec<f64>> {
        correctors(self)
    }
}

/// Solve the discounted cell system at slope P.
pub fn solve_cell_discounted(
    spec: &HamiltonianSpec,
    coupling: &CouplingMatrix,
    p: Vec2,
    delta: f64,
    cfg: &CellConfig,
) -> Result<CellSolution> {
    solve_cell_discounted_from(spec, coupling, p, delta, cfg, None)
}

/// Same, warm-started from the mean-zero part of a previous solution.
pub fn solve_cell_discounted_from(
    spec: &HamiltonianSpec,
    coupling: &CouplingMatrix,
    p: Vec2,
    delta: f64,
    cfg: &CellConfig,
    warm: Option<&[Vec<f64>]>,
) -> Result<CellSolution> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(HjError::Config(format!("delta must lie in (0, 1], got {delta}")));
    }
    if !(cfg.tol > 0.0) {
        return Err(HjError::Config("tol must be positive".into()));
    }
    if spec.m() != coupling.m() {
        return Err(HjError::Config("spec and coupling component counts differ".into()));
    }
    let grid = cfg.grid;
    if grid.spacing() > delta * cfg.h_factor * (1.0 + 1e-12) {
        return Err(HjError::Config(format!(
            "grid too coarse: h = {} must be <= delta * h_factor = {}",
            grid.spacing(),
            delta * cfg.h_factor
        )));
    }
    let m = spec.m();
    let npts = grid.len();
    let sys = SampledSystem::new(spec, &grid, 1.0, cfg.r_grad);
    let n_axes = grid.dim() as f64;
    let dt = cfg.dt_safety / (2.0 * n_axes * sys.theta / grid.spacing() + 1.0 + delta);

    let mut w: Vec<Vec<f64>> = match warm {
        Some(init) if init.len() == m && init[0].len() == npts => init.to_vec(),
        _ => vec![vec![0.0; npts]; m],
    };
    project_mean_zero(&mut w);
    let mut g = vec![vec![0.0; npts]; m];

    let mut residual = f64::INFINITY;
    let mut mean_g = 0.0;
    let mut history = Vec::new();
    let mut iterations = 0usize;
    while iterations < cfg.max_iters {
        mean_g = eval_steady_operator(&sys, &grid, coupling, p, delta, &w, &mut g);
        // steady residual: the update per unit pseudo-time
        residual = 0.0;
        for gi in &g {
            for &v in gi {
                residual = residual.max((v - mean_g).abs());
            }
        }
        if !residual.is_finite() {
            return Err(HjError::NonFinite(format!("cell march diverged at iteration {iterations}")));
        }
        if iterations % 256 == 0 {
            history.push(residual);
            if history.len() > 64 {
                history.remove(0);
            }
        }
        if residual < cfg.tol {
            break;
        }
        for (wi, gi) in w.iter_mut().zip(&g) {
            if npts >= PAR_THRESHOLD {
                wi.par_chunks_mut(1024).zip(gi.par_chunks(1024)).for_each(|(wc, gc)| {
                    for (wv, gv) in wc.iter_mut().zip(gc) {
                        *wv -= dt * (gv - mean_g);
                    }
                });
            } else {
                for (wv, gv) in wi.iter_mut().zip(gi) {
                    *wv -= dt * (gv - mean_g);
                }
            }
        }
        iterations += 1;
    }
    if residual >= cfg.tol {
        return Err(HjError::NonConvergence {
            iterations,
            residual,
            tol: cfg.tol,
            history,
        });
    }

    // H_bar estimate is -mean(delta v) = mean of the steady operator; the
    // slaved mean reconstructs v = w - mean_g / delta.
    let h_bar = mean_g;
    let shift = mean_g / delta;
    let v: Vec<Vec<f64>> = w.iter().map(|wi| wi.iter().map(|x| x - shift).collect()).collect();
    let mut flat_c = 0.0f64;
    for wi in &w {
        for &x in wi {
            flat_c = flat_c.max(x.abs());
        }
    }
    Ok(CellSolution {
        p,
        delta,
        grid,
        v,
        h_bar_estimate: h_bar,
        residual,
        iterations,
        flatness_constant: flat_c,
    })
}

/// G_i = LF flux + (1+delta) w_i - sum_j c_ij w_j at every gridpoint; returns
/// the joint mean of G. The mean is accumulated in fixed order.
fn eval_steady_operator(
    sys: &SampledSystem,
    grid: &TorusGrid,
    coupling: &CouplingMatrix,
    p: Vec2,
    delta: f64,
    w: &[Vec<f64>],
    g: &mut [Vec<f64>],
) -> f64 {
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let npts = grid.len();
    let m = w.len();
    for i in 0..m {
        let wi = &w[i];
        // coupling row against all components
        let row: Vec<f64> = (0..m).map(|j| coupling.entry(i, j)).collect();
        let gi = &mut g[i];
        let kernel_1d = |start: usize, out: &mut [f64]| {
            for (k, o) in out.iter_mut().enumerate() {
                let idx = start + k;
                let um = wi[if idx == 0 { n - 1 } else { idx - 1 }];
                let up = wi[if idx + 1 == n { 0 } else { idx + 1 }];
                let pm = [p[0] + (wi[idx] - um) / h, 0.0];
                let pp = [p[0] + (up - wi[idx]) / h, 0.0];
                let mut zo = (1.0 + delta) * wi[idx];
                for (j, &cij) in row.iter().enumerate() {
                    zo -= cij * w[j][idx];
                }
                *o = sys.flux(i, idx, pm, pp) + zo;
            }
        };
        let kernel_2d = |j: usize, out: &mut [f64]| {
            let jm = if j == 0 { n - 1 } else { j - 1 };
            let jp = if j + 1 == n { 0 } else { j + 1 };
            for (ii, o) in out.iter_mut().enumerate() {
                let idx = ii + j * n;
                let im = if ii == 0 { n - 1 } else { ii - 1 };
                let ip = if ii + 1 == n { 0 } else { ii + 1 };
                let pm = [
                    p[0] + (wi[idx] - wi[im + j * n]) / h,
                    p[1] + (wi[idx] - wi[ii + jm * n]) / h,
                ];
                let pp = [
                    p[0] + (wi[ip + j * n] - wi[idx]) / h,
                    p[1] + (wi[ii + jp * n] - wi[idx]) / h,
                ];
                let mut zo = (1.0 + delta) * wi[idx];
                for (jj, &cij) in row.iter().enumerate() {
                    zo -= cij * w[jj][idx];
                }
                *o = sys.flux(i, idx, pm, pp) + zo;
            }
        };
        if grid.dim() == 1 {
            if npts >= PAR_THRESHOLD {
                gi.par_chunks_mut(1024)
                    .enumerate()
                    .for_each(|(c, slice)| kernel_1d(c * 1024, slice));
            } else {
                kernel_1d(0, gi.as_mut_slice());
            }
        } else if npts >= PAR_THRESHOLD {
            gi.par_chunks_mut(n).enumerate().for_each(|(j, rowv)| kernel_2d(j, rowv));
        } else {
            for (j, rowv) in gi.chunks_mut(n).enumerate() {
                kernel_2d(j, rowv);
            }
        }
    }
    // fixed-order accumulation keeps the march bitwise deterministic
    let mut sum = 0.0f64;
    for gi in g.iter() {
        for &v in gi {
            sum += v;
        }
    }
    sum / (m * npts) as f64
}

fn project_mean_zero(w: &mut [Vec<f64>]) {
    let total: usize = w.iter().map(|c| c.len()).sum();
    if total == 0 {
        return;
    }
    let mut sum = 0.0;
    for c in w.iter() {
        for &v in c {
            sum += v;
        }
    }
    let mean = sum / total as f64;
    for c in w.iter_mut() {
        for v in c.iter_mut() {
            *v -= mean;
        }
    }
}

/// Approximate correctors: the discounted solution minus its joint mean
/// (cell solutions are unique only up to a common additive constant).
pub fn correctors(solution: &CellSolution) -> Vec<Vec<f64>> {
    let mut out = solution.v.clone();
    project_mean_zero(&mut out);
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct EffectivePoint {
    pub p: Vec2,
    pub h_bar: f64,
    pub error_bar: f64,
    /// per-delta raw estimates, in the order of the delta sequence
    pub estimates: Vec<f64>,
}

/// Effective Hamiltonian at P: solve the discounted problem along a
/// decreasing delta sequence and extrapolate the estimates linearly to
/// delta = 0 (least squares). The error bar is the worst fit deviation at
/// the two finest deltas plus the solver tolerance.
pub fn effective_at(
    spec: &HamiltonianSpec,
    coupling: &CouplingMatrix,
    p: Vec2,
    delta_seq: &[f64],
    cfg: &CellConfig,
) -> Result<(EffectivePoint, CellSolution)> {
    if delta_seq.len() < 2 {
        return Err(HjError::Config("need at least two deltas to extrapolate".into()));
    }
    for w in delta_seq.windows(2) {
        if w[1] >= w[0] {
            return Err(HjError::Config("delta sequence must be strictly decreasing".into()));
        }
    }
    let mut estimates = Vec::with_capacity(delta_seq.len());
    let mut last: Option<CellSolution> = None;
    for &delta in delta_seq {
        let warm = last.as_ref().map(|s| s.oscillation());
        let sol = solve_cell_discounted_from(spec, coupling, p, delta, cfg, warm.as_deref())?;
        estimates.push(sol.h_bar_estimate);
        last = Some(sol);
    }
    // least-squares line est = a + b * delta
    let (a, err) = linear_extrapolate(delta_seq, &estimates);
    let point = EffectivePoint { p, h_bar: a, error_bar: err + cfg.tol, estimates };
    Ok((point, last.unwrap()))
}

/// Effective Hamiltonian at P with the grid tied to delta: each solve in the
/// sequence runs on the grid with h ~= h_over_delta * delta, so the O(h) flux
/// bias scales linearly in delta and the Richardson step removes it together
/// with the discount error. Warm starts are prolonged between grids by
/// periodic linear interpolation.
pub fn effective_at_tied(
    spec: &HamiltonianSpec,
    coupling: &CouplingMatrix,
    p: Vec2,
    delta_seq: &[f64],
    cfg: &CellConfig,
    h_over_delta: f64,
) -> Result<(EffectivePoint, CellSolution)> {
    if delta_seq.len() < 2 {
        return Err(HjError::Config("need at least two deltas to extrapolate".into()));
    }
    for w in delta_seq.windows(2) {
        if w[1] >= w[0] {
            return Err(HjError::Config("delta sequence must be strictly decreasing".into()));
        }
    }
    if !(h_over_delta > 0.0) {
        return Err(HjError::Config("h_over_delta must be positive".into()));
    }
    let dim = cfg.grid.dim();
    let mut estimates = Vec::with_capacity(delta_seq.len());
    let mut last: Option<CellSolution> = None;
    for &delta in delta_seq {
        let n = (1.0 / (delta * h_over_delta)).round().max(8.0) as usize;
        let grid = TorusGrid::new(dim, n)?;
        let mut step_cfg = cfg.clone();
        step_cfg.grid = grid;
        let warm = last.as_ref().map(|s| {
            s.oscillation().iter().map(|w| prolong(&s.grid, w, &grid)).collect::<Vec<_>>()
        });
        let sol =
            solve_cell_discounted_from(spec, coupling, p, delta, &step_cfg, warm.as_deref())?;
        estimates.push(sol.h_bar_estimate);
        last = Some(sol);
    }
    let (a, err) = linear_extrapolate(delta_seq, &estimates);
    let point = EffectivePoint { p, h_bar: a, error_bar: err + cfg.tol, estimates };
    Ok((point, last.unwrap()))
}

fn linear_extrapolate(deltas: &[f64], estimates: &[f64]) -> (f64, f64) {
    let n = deltas.len() as f64;
    let sx: f64 = deltas.iter().sum();
    let sy: f64 = estimates.iter().sum();
    let sxx: f64 = deltas.iter().map(|d| d * d).sum();
    let sxy: f64 = deltas.iter().zip(estimates).map(|(d, e)| d * e).sum();
    let denom = n * sxx - sx * sx;
    let b = (n * sxy - sx * sy) / denom;
    let a = (sy - b * sx) / n;
    let mut err = 0.0f64;
    for k in deltas.len() - 2..deltas.len() {
        err = err.max((a + b * deltas[k] - estimates[k]).abs());
    }
    (a, err)
}

/// Periodic (bi)linear prolongation of a grid function onto another grid.
pub fn prolong(from: &TorusGrid, values: &[f64], to: &TorusGrid) -> Vec<f64> {
    let table = crate::scalar_field::ScalarField::Table {
        n: from.points_per_axis(),
        values: values.to_vec(),
    };
    to.sample(|x| table.eval(x))
}

/// Evaluate a smooth test pair as a subsolution certificate: the maximum of
/// `H_i(xi, P + D phi_i) + phi_i - sum_j c_ij phi_j` over components and
/// gridpoints (central differences). This value + O(h) bounds H_bar(P) from
/// above.
pub fn upper_certificate(
    spec: &HamiltonianSpec,
    coupling: &CouplingMatrix,
    p: Vec2,
    pair: &[Vec<f64>],
    grid: &TorusGrid,
) -> Result<f64> {
    if pair.len() != spec.m() {
        return Err(HjError::Config("test pair has wrong component count".into()));
    }
    let h = grid.spacing();
    let m = spec.m();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..m {
        let phi = &pair[i];
        if phi.len() != grid.len() {
            return Err(HjError::Config("test pair length does not match grid".into()));
        }
        for idx in 0..grid.len() {
            let mut dphi = [0.0f64; 2];
            for axis in 0..grid.dim() {
                let up = grid.neighbor(idx, axis, 1);
                let dn = grid.neighbor(idx, axis, -1);
                dphi[axis] = (phi[up] - phi[dn]) / (2.0 * h);
            }
            let grad = [p[0] + dphi[0], p[1] + dphi[1]];
            let mut val = spec.eval(i, grid.point(idx), grad) + phi[idx];
            for j in 0..m {
                val -= coupling.entry(i, j) * pair[j][idx];
            }
            worst = worst.max(val);
        }
    }
    Ok(worst)
}

/// Certified lower bound for H_bar(P): the best of
/// - `-(1/2) min_xi (V_1 + V_2)` for the 2-component separable quadratic form,
/// - `min_{i, xi} H_i(xi, P)` (coercivity bound), always available.
pub fn lower_bound(spec: &HamiltonianSpec, p: Vec2, dim: usize) -> f64 {
    let samples = if dim == 1 { 8192 } else { 384 };
    let eval_min = |i: usize| -> f64 {
        let mut worst = f64::INFINITY;
        if dim == 1 {
            for k in 0..samples {
                let xi = [k as f64 / samples as f64, 0.0];
                worst = worst.min(spec.eval(i, xi, p));
            }
        } else {
            for b in 0..samples {
                for a in 0..samples {
                    let xi = [a as f64 / samples as f64, b as f64 / samples as f64];
                    worst = worst.min(spec.eval(i, xi, p));
                }
            }
        }
        worst
    };
    let mut best = (0..spec.m()).map(eval_min).fold(f64::INFINITY, f64::min);

    if spec.m() == 2 {
        let pots: Vec<_> = spec.components().iter().map(|c| c.separable_potential()).collect();
        if let (Some(v1), Some(v2)) = (pots[0], pots[1]) {
            let mut min_sum = f64::INFINITY;
            if dim == 1 {
                for k in 0..samples {
                    let xi = [k as f64 / samples as f64, 0.0];
                    min_sum = min_sum.min(v1.eval(xi) + v2.eval(xi));
                }
            } else {
                for b in 0..samples {
                    for a in 0..samples {
                        let xi = [a as f64 / samples as f64, b as f64 / samples as f64];
                        min_sum = min_sum.min(v1.eval(xi) + v2.eval(xi));
                    }
                }
            }
            best = best.max(-0.5 * min_sum);
        }
    }
    best
}

/// Rectangular lattice of slopes P.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PLattice {
    /// one sorted list of sample values per axis (1 or 2 axes)
    pub axes: Vec<Vec<f64>>,
}

impl PLattice {
    pub fn line(values: Vec<f64>) -> Self {
        Self { axes: vec![values] }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.iter().any(|a| a.is_empty())
    }

    pub fn point(&self, idx: usize) -> Vec2 {
        if self.axes.len() == 1 {
            [self.axes[0][idx], 0.0]
        } else {
            let nx = self.axes[0].len();
            [self.axes[0][idx % nx], self.axes[1][idx / nx]]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 || self.is_empty() {
            return Err(HjError::Config("P lattice needs 1 or 2 nonempty axes".into()));
        }
        for a in &self.axes {
            for w in a.windows(2) {
                if w[1] <= w[0] {
                    return Err(HjError::Config("P lattice axes must be strictly increasing".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectiveRow {
    pub p: [f64; 2],
    pub h_bar: f64,
    pub err_bar: f64,
    pub lower_cert: f64,
    pub upper_cert: f64,
    pub ok: bool,
    #[serde(default)]
    pub note: String,
}

/// Sampled effective Hamiltonian on a P-lattice with per-sample certificates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectiveTable {
    pub axes: Vec<Vec<f64>>,
    pub rows: Vec<EffectiveRow>,
    pub delta_min: f64,
    pub grid_n: usize,
}

pub fn build_table(
    spec: &HamiltonianSpec,
    coupling: &CouplingMatrix,
    lattice: &PLattice,
    delta_seq: &[f64],
    cfg: &CellConfig,
) -> Result<EffectiveTable> {
    build_table_impl(spec, coupling, lattice, delta_seq, cfg, None)
}

/// Table variant with the per-delta tied grids of [`effective_at_tied`].
pub fn build_table_tied(
    spec: &HamiltonianSpec,
    coupling: &CouplingMatrix,
    lattice: &PLattice,
    delta_seq: &[f64],
    cfg: &CellConfig,
    h_over_delta: f64,
) -> Result<EffectiveTable> {
    build_table_impl(spec, coupling, lattice, delta_seq, cfg, Some(h_over_delta))
}

fn build_table_impl(
    spec: &HamiltonianSpec,
    coupling: &CouplingMatrix,
    lattice: &PLattice,
    delta_seq: &[f64],
    cfg: &CellConfig,
    h_over_delta: Option<f64>,
) -> Result<EffectiveTable> {
    lattice.validate()?;
    if lattice.dim() != cfg.grid.dim() {
        return Err(HjError::Config("P lattice and grid dimensions differ".into()));
    }
    let points: Vec<Vec2> = (0..lattice.len()).map(|i| lattice.point(i)).collect();
    let rows: Vec<EffectiveRow> = points
        .par_iter()
        .map(|&p| {
            let lower = lower_bound(spec, p, cfg.grid.dim());
            // constant test pair: certificate max_{i, xi} H_i(xi, P)
            let zero_pair = vec![vec![0.0; cfg.grid.len()]; spec.m()];
            let upper = upper_certificate(spec, coupling, p, &zero_pair, &cfg.grid)
                .unwrap_or(f64::INFINITY);
            let solved = match h_over_delta {
                Some(r) => effective_at_tied(spec, coupling, p, delta_seq, cfg, r),
                None => effective_at(spec, coupling, p, delta_seq, cfg),
            };
            match solved {
                Ok((pt, _)) => EffectiveRow {
                    p,
                    h_bar: pt.h_bar,
                    err_bar: pt.error_bar,
                    lower_cert: lower,
                    upper_cert: upper,
                    ok: true,
                    note: String::new(),
                },
                Err(e) => EffectiveRow {
                    p,
                    h_bar: f64::NAN,
                    err_bar: f64::NAN,
                    lower_cert: lower,
                    upper_cert: upper,
                    ok: false,
                    note: e.to_string(),
                },
            }
        })
        .collect();
    Ok(EffectiveTable {
        axes: lattice.axes.clone(),
        rows,
        delta_min: *delta_seq.last().unwrap(),
        grid_n: cfg.grid.points_per_axis(),
    })
}

impl EffectiveTable {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn complete(&self) -> bool {
        self.rows.iter().all(|r| r.ok)
    }

    pub fn row_at(&self, i: usize, j: usize) -> &EffectiveRow {
        &self.rows[i + j * self.axes[0].len()]
    }

    /// Piecewise-linear (bilinear in 2D) interpolation of H_bar, clamped to
    /// the lattice hull; the flag reports whether clamping occurred.
    pub fn interp(&self, p: Vec2) -> (f64, bool) {
        match self.dim() {
            1 => {
                let (v, c) = interp_axis(&self.axes[0], p[0]);
                let (i, t) = v;
                let a = self.rows[i].h_bar;
                let b = self.rows[(i + 1).min(self.rows.len() - 1)].h_bar;
                (a + t * (b - a), c)
            }
            _ => {
                let ((i, tx), cx) = interp_axis(&self.axes[0], p[0]);
                let ((j, ty), cy) = interp_axis(&self.axes[1], p[1]);
                let nx = self.axes[0].len();
                let ip = (i + 1).min(nx - 1);
                let jp = (j + 1).min(self.axes[1].len() - 1);
                let v00 = self.rows[i + j * nx].h_bar;
                let v10 = self.rows[ip + j * nx].h_bar;
                let v01 = self.rows[i + jp * nx].h_bar;
                let v11 = self.rows[ip + jp * nx].h_bar;
                (
                    v00 * (1.0 - tx) * (1.0 - ty)
                        + v10 * tx * (1.0 - ty)
                        + v01 * (1.0 - tx) * ty
                        + v11 * tx * ty,
                    cx || cy,
                )
            }
        }
    }

    /// Largest slope between adjacent samples; the LF constant for the
    /// effective solver.
    pub fn max_slope(&self) -> f64 {
        let mut worst = 0.0f64;
        let nx = self.axes[0].len();
        if self.dim() == 1 {
            for k in 0..nx - 1 {
                let dp = self.axes[0][k + 1] - self.axes[0][k];
                worst = worst.max(((self.rows[k + 1].h_bar - self.rows[k].h_bar) / dp).abs());
            }
        } else {
            let ny = self.axes[1].len();
            for j in 0..ny {
                for k in 0..nx - 1 {
                    let dp = self.axes[0][k + 1] - self.axes[0][k];
                    worst = worst.max(
                        ((self.row_at(k + 1, j).h_bar - self.row_at(k, j).h_bar) / dp).abs(),
                    );
                }
            }
            for j in 0..ny - 1 {
                for k in 0..nx {
                    let dp = self.axes[1][j + 1] - self.axes[1][j];
                    worst = worst.max(
                        ((self.row_at(k, j + 1).h_bar - self.row_at(k, j).h_bar) / dp).abs(),
                    );
                }
            }
        }
        worst
    }
}

fn interp_axis(axis: &[f64], x: f64) -> ((usize, f64), bool) {
    let n = axis.len();
    if n == 1 {
        return ((0, 0.0), (x - axis[0]).abs() > 1e-12);
    }
    if x <= axis[0] {
        return ((0, 0.0), x < axis[0] - 1e-12);
    }
    if x >= axis[n - 1] {
        return ((n - 2, 1.0), x > axis[n - 1] + 1e-12);
    }
    let mut i = axis.partition_point(|&a| a <= x);
    i = i.clamp(1, n - 1);
    let lo = axis[i - 1];
    let hi = axis[i];
    ((i - 1, (x - lo) / (hi - lo)), false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Hamiltonian;
    use crate::scalar_field::ScalarField;
    use std::f64::consts::PI;

    fn quad_pair() -> (HamiltonianSpec, CouplingMatrix) {
        (
            HamiltonianSpec::new(vec![Hamiltonian::quadratic(), Hamiltonian::quadratic()])
                .unwrap(),
            CouplingMatrix::symmetric_pair(),
        )
    }

    fn cfg(n: usize) -> CellConfig {
        let mut c = CellConfig::new(TorusGrid::new(1, n).unwrap());
        c.r_grad = 4.0;
        c
    }

    #[test]
    fn constant_correctors_for_plain_quadratic() {
        let (spec, k) = quad_pair();
        let sol = solve_cell_discounted(&spec, &k, [0.0, 0.0], 0.1, &cfg(64)).unwrap();
        assert!(sol.h_bar_estimate.abs() < 1e-6);
        for vi in &sol.v {
            for &x in vi {
                assert!((x - sol.v[0][0]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn plain_quadratic_effective_is_p_squared() {
        let (spec, k) = quad_pair();
        let (pt, _) = effective_at(&spec, &k, [0.7, 0.0], &[0.08, 0.04], &cfg(64)).unwrap();
        assert!((pt.h_bar - 0.49).abs() < 1e-4, "got {}", pt.h_bar);
    }

    #[test]
    fn double_well_at_origin_is_one() {
        let spec =
            HamiltonianSpec::new(vec![Hamiltonian::DoubleWell, Hamiltonian::DoubleWell]).unwrap();
        let k = CouplingMatrix::symmetric_pair();
        let (pt, sol) = effective_at(&spec, &k, [0.0, 0.0], &[0.08, 0.04], &cfg(64)).unwrap();
        assert!((pt.h_bar - 1.0).abs() < 1e-6, "got {}", pt.h_bar);
        assert!(sol.flatness_constant < 1e-6);
    }

    #[test]
    fn delta_v_is_spatially_flat_to_first_order() {
        // |delta v + H_bar| <= C delta with C stable across delta
        let spec = HamiltonianSpec::new(vec![
            Hamiltonian::QuadraticMinusPotential {
                potential: ScalarField::TrigPoly { axis: 0, mean: 1.0, cos: vec![-1.0], sin: vec![] },
            },
            Hamiltonian::quadratic(),
        ])
        .unwrap();
        let k = CouplingMatrix::symmetric_pair();
        let mut cs = Vec::new();
        let mut warm: Option<CellSolution> = None;
        for &delta in &[0.16, 0.08, 0.04] {
            let w = warm.as_ref().map(|s| correctors(s));
            let sol =
                solve_cell_discounted_from(&spec, &k, [0.3, 0.0], delta, &cfg(128), w.as_deref())
                    .unwrap();
            cs.push(sol.flatness_constant);
            warm = Some(sol);
        }
        // flatness constant should not blow up as delta shrinks
        assert!(cs[2] < 3.0 * cs[0] + 1e-9, "{cs:?}");
    }

    #[test]
    fn lipschitz_in_p_of_delta_v() {
        // delta |v(P) - v(Q)| <= (C_H + slack) |P - Q| for the norm family
        let spec = HamiltonianSpec::new(vec![Hamiltonian::norm(), Hamiltonian::norm()]).unwrap();
        let k = CouplingMatrix::symmetric_pair();
        let delta = 0.1;
        let c = cfg(64);
        let a = solve_cell_discounted(&spec, &k, [0.5, 0.0], delta, &c).unwrap();
        let b = solve_cell_discounted(&spec, &k, [0.9, 0.0], delta, &c).unwrap();
        let mut gap = 0.0f64;
        for (va, vb) in a.v.iter().zip(&b.v) {
            for (x, y) in va.iter().zip(vb) {
                gap = gap.max((x - y).abs());
            }
        }
        let c_h = 1.0; // Lipschitz constant of |p|
        assert!(delta * gap <= (c_h + 0.1) * 0.4 + 1e-9);
    }

    #[test]
    fn correctors_have_zero_joint_mean() {
        let (spec, k) = quad_pair();
        let sol = solve_cell_discounted(&spec, &k, [1.0, 0.0], 0.1, &cfg(64)).unwrap();
        let c = correctors(&sol);
        let total: f64 = c.iter().flat_map(|v| v.iter()).sum();
        assert!(total.abs() < 1e-10);
    }

    #[test]
    fn zero_pair_certificate_bounds_from_above() {
        let spec = HamiltonianSpec::new(vec![
            Hamiltonian::QuadraticMinusPotential {
                potential: ScalarField::TrigPoly { axis: 0, mean: 1.0, cos: vec![-1.0], sin: vec![] },
            },
            Hamiltonian::quadratic(),
        ])
        .unwrap();
        let k = CouplingMatrix::symmetric_pair();
        let grid = TorusGrid::new(1, 64).unwrap();
        let pair = vec![vec![0.0; 64]; 2];
        let p = [0.5, 0.0];
        let cert = upper_certificate(&spec, &k, p, &pair, &grid).unwrap();
        // max_{i,xi} H_i(xi, P) = max(P^2 - 0, P^2) = P^2 here
        assert!((cert - 0.25).abs() < 1e-9);
        let (pt, _) = effective_at(&spec, &k, p, &[0.08, 0.04], &cfg(64)).unwrap();
        assert!(pt.h_bar <= cert + 0.05);
    }

    #[test]
    fn lower_bound_matches_quadratic() {
        let (spec, _) = quad_pair();
        let lb = lower_bound(&spec, [0.8, 0.0], 1);
        assert!((lb - 0.64).abs() < 1e-12);
    }

    #[test]
    fn table_round_structure_and_interp() {
        let (spec, k) = quad_pair();
        let lat = PLattice::line(vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let table = build_table(&spec, &k, &lat, &[0.08, 0.04], &cfg(64)).unwrap();
        assert!(table.complete());
        for row in &table.rows {
            let want = row.p[0] * row.p[0];
            assert!((row.h_bar - want).abs() < 5e-3, "{} vs {}", row.h_bar, want);
            assert!(row.lower_cert <= row.h_bar + 1e-9);
            assert!(row.h_bar <= row.upper_cert + 5e-3);
        }
        let (v, clamped) = table.interp([0.25, 0.0]);
        assert!(!clamped);
        // linear interp between 0 and 0.25 values
        assert!((v - 0.125).abs() < 5e-3);
        let (_, clamped) = table.interp([3.0, 0.0]);
        assert!(clamped);
    }

    #[test]
    fn table_symmetric_for_even_hamiltonians() {
        let (spec, k) = quad_pair();
        assert!(spec.all_even());
        let lat = PLattice::line(vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let table = build_table(&spec, &k, &lat, &[0.08, 0.04], &cfg(64)).unwrap();
        let n = table.rows.len();
        for i in 0..n {
            let a = &table.rows[i];
            let b = &table.rows[n - 1 - i];
            assert!((a.p[0] + b.p[0]).abs() < 1e-12);
            assert!((a.h_bar - b.h_bar).abs() < 2.0 * (a.err_bar + b.err_bar) + 1e-6);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let (spec, k) = quad_pair();
        let mut c = cfg(16); // h = 1/16 > delta = 0.02
        c.h_factor = 1.0;
        assert!(solve_cell_discounted(&spec, &k, [0.0; 2], 0.02, &c).is_err());
    }

    #[test]
    fn remark_counterexample_solution_is_exact_on_trig_pair() {
        // V_1 = 4 pi^2 sin^2(2 pi x) + cos - sin, V_2 = 4 pi^2 cos^2 + sin - cos:
        // (cos(2 pi x), sin(2 pi x)) solves the undiscounted system with
        // constant 0, so H_bar(0) = 0 while the potential-sum bound sits at
        // -2 pi^2.
        let two_pi_sq = 2.0 * PI * PI;
        let v1 = ScalarField::TrigPoly {
            axis: 0,
            mean: two_pi_sq,
            cos: vec![1.0, -two_pi_sq],
            sin: vec![-1.0, 0.0],
        };
        let v2 = ScalarField::TrigPoly {
            axis: 0,
            mean: two_pi_sq,
            cos: vec![-1.0, two_pi_sq],
            sin: vec![1.0, 0.0],
        };
        // check the closed forms really are the stated potentials
        for k in 0..40 {
            let x = k as f64 / 40.0;
            let s = (2.0 * PI * x).sin();
            let c = (2.0 * PI * x).cos();
            let w1 = 4.0 * PI * PI * s * s + c - s;
            let w2 = 4.0 * PI * PI * c * c + s - c;
            assert!((v1.eval([x, 0.0]) - w1).abs() < 1e-10);
            assert!((v2.eval([x, 0.0]) - w2).abs() < 1e-10);
        }
        let spec = HamiltonianSpec::new(vec![
            Hamiltonian::QuadraticMinusPotential { potential: v1 },
            Hamiltonian::QuadraticMinusPotential { potential: v2 },
        ])
        .unwrap();
        let lb = lower_bound(&spec, [0.0; 2], 1);
        assert!((lb + two_pi_sq).abs() < 1e-9, "lower bound {lb}");
    }
}
