//! Periodic uniform grids on the unit torus and grid functions living on them.
//!
//! The torus [0,1)^n (n = 1 or 2) is discretized with N points per axis at
//! spacing h = 1/N; index arithmetic wraps periodically. Points are stored in
//! row-major order, `idx = i + j*N` in 2D.

use crate::error::{HjError, Result};
use serde::{Deserialize, Serialize};

/// A point or gradient; the second coordinate is unused (zero) in 1D.
pub type Vec2 = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    h: f64,
}

impl TorusGrid {
    pub fn new(dim: usize, points_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(HjError::Config(format!("grid dim must be 1 or 2, got {dim}")));
        }
        if points_per_axis < 8 {
            return Err(HjError::Config(format!(
                "grid needs at least 8 points per axis, got {points_per_axis}"
            )));
        }
        Ok(Self { dim, n: points_per_axis, h: 1.0 / points_per_axis as f64 })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Total number of gridpoints.
    #[inline]
    pub fn len(&self) -> usize {
        if self.dim == 1 {
            self.n
        } else {
            self.n * self.n
        }
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates of a gridpoint.
    #[inline]
    pub fn point(&self, idx: usize) -> Vec2 {
        if self.dim == 1 {
            [idx as f64 * self.h, 0.0]
        } else {
            let i = idx % self.n;
            let j = idx / self.n;
            [i as f64 * self.h, j as f64 * self.h]
        }
    }

    #[inline]
    pub fn index2(&self, i: usize, j: usize) -> usize {
        i + j * self.n
    }

    /// Neighbor index with periodic wrap; `step` is +1 or -1 along `axis`.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> usize {
        let n = self.n;
        match (self.dim, axis) {
            (1, 0) => wrap(idx, n, step),
            (2, 0) => {
                let i = idx % n;
                let j = idx / n;
                wrap(i, n, step) + j * n
            }
            (2, 1) => {
                let i = idx % n;
                let j = idx / n;
                i + wrap(j, n, step) * n
            }
            _ => panic!("axis {axis} out of range for dim {}", self.dim),
        }
    }

    /// Sample a function of the point coordinates onto the grid.
    pub fn sample(&self, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        (0..self.len()).map(|idx| f(self.point(idx))).collect()
    }
}

#[inline]
fn wrap(i: usize, n: usize, step: isize) -> usize {
    if step >= 0 {
        let i = i + step as usize;
        if i >= n {
            i - n
        } else {
            i
        }
    } else {
        let s = (-step) as usize;
        if i >= s {
            i - s
        } else {
            i + n - s
        }
    }
}

/// m grid functions (one per system component) at a common time level.
#[derive(Clone, Debug)]
pub struct StateField {
    pub grid: TorusGrid,
    pub time: f64,
    pub components: Vec<Vec<f64>>,
}

impl StateField {
    pub fn new(grid: TorusGrid, time: f64, components: Vec<Vec<f64>>) -> Result<Self> {
        for (i, c) in components.iter().enumerate() {
            if c.len() != grid.len() {
                return Err(HjError::Config(format!(
                    "component {i} has {} values, grid has {} points",
                    c.len(),
                    grid.len()
                )));
            }
            if let Some(k) = c.iter().position(|v| !v.is_finite()) {
                return Err(HjError::NonFinite(format!("component {i}, gridpoint {k}")));
            }
        }
        Ok(Self { grid, time, components })
    }

    pub fn m(&self) -> usize {
        self.components.len()
    }

    /// Largest one-sided difference quotient over all components and axes,
    /// i.e. the discrete Lipschitz constant of the field.
    pub fn discrete_lipschitz(&self) -> f64 {
        let mut lip = 0.0f64;
        for c in &self.components {
            lip = lip.max(discrete_lipschitz(&self.grid, c));
        }
        lip
    }

    /// Componentwise sup-norm distance to another field on the same grid.
    pub fn sup_distance(&self, other: &StateField) -> f64 {
        let mut d = 0.0f64;
        for (a, b) in self.components.iter().zip(&other.components) {
            for (x, y) in a.iter().zip(b) {
                d = d.max((x - y).abs());
            }
        }
        d
    }
}

/// Discrete Lipschitz constant of a single grid function (max one-sided slope).
pub fn discrete_lipschitz(grid: &TorusGrid, u: &[f64]) -> f64 {
    let mut lip = 0.0f64;
    for idx in 0..grid.len() {
        for axis in 0..grid.dim() {
            let up = grid.neighbor(idx, axis, 1);
            lip = lip.max(((u[up] - u[idx]) / grid.spacing()).abs());
        }
    }
    lip
}

/// One-sided periodic difference quotients of component `comp` at `idx`:
/// `(p_minus, p_plus)` with `p_minus_k = (u(x) - u(x - h e_k))/h` and
/// `p_plus_k = (u(x + h e_k) - u(x))/h`.
pub fn upwind_gradients(field: &StateField, comp: usize, idx: usize) -> (Vec2, Vec2) {
    let grid = &field.grid;
    let u = &field.components[comp];
    let h = grid.spacing();
    let mut pm = [0.0; 2];
    let mut pp = [0.0; 2];
    for axis in 0..grid.dim() {
        let down = grid.neighbor(idx, axis, -1);
        let up = grid.neighbor(idx, axis, 1);
        pm[axis] = (u[idx] - u[down]) / h;
        pp[axis] = (u[up] - u[idx]) / h;
    }
    (pm, pp)
}
