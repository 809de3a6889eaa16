//! Steady Dirichlet problems on a grid-aligned interval or box, with the
//! boundary condition enforced in the viscosity sense: the equation marches
//! everywhere with one-sided interior differences at the boundary, and each
//! sweep pins the boundary from above by `u <- min(u, g)`. The datum may
//! detach from above, never from below.

use crate::cell::EffectiveTable;
use crate::coupling::CouplingMatrix;
use crate::error::{HjError, Result};
use crate::grid::Vec2;
use crate::hamiltonian::HamiltonianSpec;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxDomain {
    pub dim: usize,
    /// points per axis, boundary included
    pub n: usize,
    pub a: Vec2,
    pub b: Vec2,
}

impl BoxDomain {
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(b > a) || n < 8 {
            return Err(HjError::Config("interval needs b > a and at least 8 points".into()));
        }
        Ok(Self { dim: 1, n, a: [a, 0.0], b: [b, 0.0] })
    }

    pub fn square(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(b > a) || n < 8 {
            return Err(HjError::Config("box needs b > a and at least 8 points".into()));
        }
        Ok(Self { dim: 2, n, a: [a, a], b: [b, b] })
    }

    pub fn spacing(&self) -> f64 {
        (self.b[0] - self.a[0]) / (self.n - 1) as f64
    }

    pub fn len(&self) -> usize {
        if self.dim == 1 {
            self.n
        } else {
            self.n * self.n
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, idx: usize) -> Vec2 {
        let h = self.spacing();
        if self.dim == 1 {
            [self.a[0] + idx as f64 * h, 0.0]
        } else {
            [self.a[0] + (idx % self.n) as f64 * h, self.a[1] + (idx / self.n) as f64 * h]
        }
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        if self.dim == 1 {
            idx == 0 || idx == self.n - 1
        } else {
            let i = idx % self.n;
            let j = idx / self.n;
            i == 0 || i == self.n - 1 || j == 0 || j == self.n - 1
        }
    }

    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_boundary(i)).collect()
    }
}

/// m grid functions on a box domain.
#[derive(Clone, Debug)]
pub struct BoxField {
    pub domain: BoxDomain,
    pub components: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct DirichletProblem {
    pub domain: BoxDomain,
    pub spec: HamiltonianSpec,
    pub coupling: CouplingMatrix,
    pub epsilon: f64,
    /// boundary data per component; only boundary entries are read
    pub g: Vec<Vec<f64>>,
    pub r_grad: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DirichletStats {
    pub iterations: usize,
    pub residual: f64,
    pub dt: f64,
}

impl DirichletProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(HjError::Config("epsilon must be positive".into()));
        }
        let m = self.spec.m();
        if self.coupling.m() != m || self.g.len() != m {
            return Err(HjError::Config("component counts disagree".into()));
        }
        for (i, gi) in self.g.iter().enumerate() {
            if gi.len() != self.domain.len() {
                return Err(HjError::Config(format!("boundary data {i} has wrong length")));
            }
            if gi.iter().any(|v| !v.is_finite()) {
                return Err(HjError::NonFinite(format!("boundary data {i}")));
            }
        }
        Ok(())
    }
}

/// One-sided gradients on the box: interior points use the usual upwind
/// pair; at the boundary the outward side falls back to the interior
/// difference on that axis.
fn box_gradients(dom: &BoxDomain, u: &[f64], idx: usize) -> (Vec2, Vec2) {
    let n = dom.n;
    let h = dom.spacing();
    let mut pm = [0.0; 2];
    let mut pp = [0.0; 2];
    for axis in 0..dom.dim {
        let (i, stride) = if axis == 0 { (idx % n, 1usize) } else { (idx / n, n) };
        if i == 0 {
            let d = (u[idx + stride] - u[idx]) / h;
            pm[axis] = d;
            pp[axis] = d;
        } else if i == n - 1 {
            let d = (u[idx] - u[idx - stride]) / h;
            pm[axis] = d;
            pp[axis] = d;
        } else {
            pm[axis] = (u[idx] - u[idx - stride]) / h;
            pp[axis] = (u[idx + stride] - u[idx]) / h;
        }
    }
    (pm, pp)
}

/// Solve the oscillatory Dirichlet system by pseudo-time marching.
pub fn solve_dirichlet_eps(
    problem: &DirichletProblem,
    tol: f64,
    max_iters: usize,
) -> Result<(BoxField, DirichletStats)> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(HjError::Config("tol must be positive".into()));
    }
    let dom = problem.domain;
    let m = problem.spec.m();
    let h = dom.spacing();
    let theta = problem.spec.theta(problem.r_grad, dom.dim);
    let leave = problem.coupling.max_leave_rate() / problem.epsilon;
    let dt = 0.9 / (1.0 + 2.0 * dom.dim as f64 * theta / h + leave);

    // start from the boundary data extended inward; the monotone march
    // converges from any bounded start
    let mut u: Vec<Vec<f64>> = problem.g.clone();
    let mut next = u.clone();
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0usize;

    while iterations < max_iters {
        let mut delta_max = 0.0f64;
        for i in 0..m {
            for idx in 0..dom.len() {
                let (pm, pp) = box_gradients(&dom, &u[i], idx);
                let x = dom.point(idx);
                let xi = [x[0] / problem.epsilon, x[1] / problem.epsilon];
                let flux = crate::hamiltonian::numerical_hamiltonian(
                    &problem.spec,
                    i,
                    xi,
                    pm,
                    pp,
                    theta,
                    dom.dim,
                );
                let mut coup = 0.0;
                for j in 0..m {
                    if j != i {
                        coup += problem.coupling.entry(i, j) * (u[i][idx] - u[j][idx]);
                    }
                }
                let rate = u[i][idx] + flux + coup / problem.epsilon;
                let mut v = u[i][idx] - dt * rate;
                if dom.is_boundary(idx) {
                    v = v.min(problem.g[i][idx]);
                }
                next[i][idx] = v;
                delta_max = delta_max.max((v - u[i][idx]).abs());
            }
        }
        std::mem::swap(&mut u, &mut next);
        residual = delta_max / dt;
        if !residual.is_finite() {
            return Err(HjError::NonFinite(format!("dirichlet march diverged at {iterations}")));
        }
        if iterations % 256 == 0 {
            history.push(residual);
            if history.len() > 64 {
                history.remove(0);
            }
        }
        iterations += 1;
        if residual < tol {
            break;
        }
    }
    if residual >= tol {
        return Err(HjError::NonConvergence { iterations, residual, tol, history });
    }
    Ok((BoxField { domain: dom, components: u }, DirichletStats { iterations, residual, dt }))
}

/// Pointwise minimum of the component boundary data: the effective datum.
pub fn effective_boundary_datum(g: &[Vec<f64>]) -> Vec<f64> {
    let mut out = g[0].clone();
    for gi in &g[1..] {
        for (o, v) in out.iter_mut().zip(gi) {
            *o = o.min(*v);
        }
    }
    out
}

/// Steady effective problem `u + H_bar(Du) = 0` with datum g_bar, same
/// viscosity boundary handling, single component.
pub fn solve_dirichlet_effective(
    table: &EffectiveTable,
    domain: BoxDomain,
    g_bar: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(BoxField, DirichletStats)> {
    if !table.complete() {
        return Err(HjError::Config("effective table has failed entries".into()));
    }
    if table.dim() != domain.dim {
        return Err(HjError::Config("table and domain dimensions differ".into()));
    }
    if g_bar.len() != domain.len() {
        return Err(HjError::Config("boundary data has wrong length".into()));
    }
    let h = domain.spacing();
    let theta = table.max_slope();
    let dt = 0.9 / (1.0 + 2.0 * domain.dim as f64 * theta / h);
    let mut u = g_bar.to_vec();
    let mut next = u.clone();
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0usize;
    while iterations < max_iters {
        let mut delta_max = 0.0f64;
        for idx in 0..domain.len() {
            let (pm, pp) = box_gradients(&domain, &u, idx);
            let mid = [(pm[0] + pp[0]) * 0.5, (pm[1] + pp[1]) * 0.5];
            let (hv, _) = table.interp(mid);
            let mut diff = pp[0] - pm[0];
            if domain.dim == 2 {
                diff += pp[1] - pm[1];
            }
            let rate = u[idx] + hv - 0.5 * theta * diff;
            let mut v = u[idx] - dt * rate;
            if domain.is_boundary(idx) {
                v = v.min(g_bar[idx]);
            }
            next[idx] = v;
            delta_max = delta_max.max((v - u[idx]).abs());
        }
        std::mem::swap(&mut u, &mut next);
        residual = delta_max / dt;
        if !residual.is_finite() {
            return Err(HjError::NonFinite(format!("effective march diverged at {iterations}")));
        }
        if iterations % 256 == 0 {
            history.push(residual);
            if history.len() > 64 {
                history.remove(0);
            }
        }
        iterations += 1;
        if residual < tol {
            break;
        }
    }
    if residual >= tol {
        return Err(HjError::NonConvergence { iterations, residual, tol, history });
    }
    Ok((BoxField { domain, components: vec![u] }, DirichletStats { iterations, residual, dt }))
}
