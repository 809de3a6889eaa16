//! Named closed-form scalar fields on the torus: potentials, norm
//! coefficients, and initial data are all drawn from this registry.
//!
//! Every family is 1-periodic in each coordinate by construction; there is no
//! expression parser. `Plateau` uses smoothstep transitions so that level
//! sets are exact by construction.

use crate::error::{HjError, Result};
use crate::grid::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarField {
    #[serde(rename = "const")]
    Const { value: f64 },
    /// `mean + sum_k cos[k-1] cos(2 pi k x) + sin[k-1] sin(2 pi k x)`
    /// along the chosen axis.
    TrigPoly {
        #[serde(default)]
        axis: usize,
        mean: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    /// Piecewise-constant profile with smoothstep transitions: value `inner`
    /// on [inner_lo, inner_hi], value `outer` outside (outer_lo, outer_hi).
    Plateau {
        #[serde(default)]
        axis: usize,
        inner: f64,
        outer: f64,
        inner_lo: f64,
        inner_hi: f64,
        outer_lo: f64,
        outer_hi: f64,
    },
    /// `(1 - (cos_num cos(2 pi x) + sin_num sin(2 pi x))) / (1 + cos_den cos(2 pi x))`
    RationalTrig {
        #[serde(default)]
        axis: usize,
        cos_num: f64,
        sin_num: f64,
        cos_den: f64,
    },
    /// Values tabulated on a uniform periodic lattice with linear (bilinear
    /// in 2D) interpolation. `values.len()` must equal `n` (1D) or `n*n` (2D).
    Table { n: usize, values: Vec<f64> },
    Scale { factor: f64, field: Box<ScalarField> },
    Sum { terms: Vec<ScalarField> },
}

#[inline]
fn fract(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

#[inline]
fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

impl ScalarField {
    pub fn zero() -> Self {
        ScalarField::Const { value: 0.0 }
    }

    pub fn eval(&self, xi: Vec2) -> f64 {
        match self {
            ScalarField::Const { value } => *value,
            ScalarField::TrigPoly { axis, mean, cos, sin } => {
                let x = fract(xi[*axis]);
                let mut v = *mean;
                for (k, c) in cos.iter().enumerate() {
                    v += c * (2.0 * PI * (k + 1) as f64 * x).cos();
                }
                for (k, s) in sin.iter().enumerate() {
                    v += s * (2.0 * PI * (k + 1) as f64 * x).sin();
                }
                v
            }
            ScalarField::Plateau { axis, inner, outer, inner_lo, inner_hi, outer_lo, outer_hi } => {
                let x = fract(xi[*axis]);
                if x >= *inner_lo && x <= *inner_hi {
                    *inner
                } else if x <= *outer_lo || x >= *outer_hi {
                    *outer
                } else if x < *inner_lo {
                    outer + (inner - outer) * smoothstep((x - outer_lo) / (inner_lo - outer_lo))
                } else {
                    inner + (outer - inner) * smoothstep((x - inner_hi) / (outer_hi - inner_hi))
                }
            }
            ScalarField::RationalTrig { axis, cos_num, sin_num, cos_den } => {
                let x = fract(xi[*axis]);
                let c = (2.0 * PI * x).cos();
                let s = (2.0 * PI * x).sin();
                (1.0 - (cos_num * c + sin_num * s)) / (1.0 + cos_den * c)
            }
            ScalarField::Table { n, values } => {
                let n = *n;
                if values.len() == n {
                    let x = fract(xi[0]) * n as f64;
                    let i = (x.floor() as usize).min(n - 1);
                    let t = x - i as f64;
                    let a = values[i];
                    let b = values[(i + 1) % n];
                    a + t * (b - a)
                } else {
                    let fx = fract(xi[0]) * n as f64;
                    let fy = fract(xi[1]) * n as f64;
                    let i = (fx.floor() as usize).min(n - 1);
                    let j = (fy.floor() as usize).min(n - 1);
                    let tx = fx - i as f64;
                    let ty = fy - j as f64;
                    let ip = (i + 1) % n;
                    let jp = (j + 1) % n;
                    let v00 = values[i + j * n];
                    let v10 = values[ip + j * n];
                    let v01 = values[i + jp * n];
                    let v11 = values[ip + jp * n];
                    v00 * (1.0 - tx) * (1.0 - ty)
                        + v10 * tx * (1.0 - ty)
                        + v01 * (1.0 - tx) * ty
                        + v11 * tx * ty
                }
            }
            ScalarField::Scale { factor, field } => factor * field.eval(xi),
            ScalarField::Sum { terms } => terms.iter().map(|t| t.eval(xi)).sum(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let check_axis = |axis: usize| -> Result<()> {
            if axis >= dim {
                Err(HjError::Config(format!("field axis {axis} out of range for dim {dim}")))
            } else {
                Ok(())
            }
        };
        match self {
            ScalarField::Const { value } => {
                if !value.is_finite() {
                    return Err(HjError::NonFinite("const field".into()));
                }
            }
            ScalarField::TrigPoly { axis, .. } => check_axis(*axis)?,
            ScalarField::Plateau { axis, inner_lo, inner_hi, outer_lo, outer_hi, .. } => {
                check_axis(*axis)?;
                if !(0.0 <= *outer_lo
                    && outer_lo < inner_lo
                    && inner_lo <= inner_hi
                    && inner_hi < outer_hi
                    && *outer_hi <= 1.0)
                {
                    return Err(HjError::Config(
                        "plateau needs 0 <= outer_lo < inner_lo <= inner_hi < outer_hi <= 1".into(),
                    ));
                }
            }
            ScalarField::RationalTrig { axis, cos_den, .. } => {
                check_axis(*axis)?;
                if cos_den.abs() >= 1.0 {
                    return Err(HjError::Config("rational_trig denominator may vanish".into()));
                }
            }
            ScalarField::Table { n, values } => {
                let want = if dim == 1 { *n } else { n * n };
                if values.len() != want {
                    return Err(HjError::Config(format!(
                        "table with n = {n} needs {want} values in dim {dim}, got {}",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(HjError::NonFinite("table field".into()));
                }
            }
            ScalarField::Scale { field, .. } => field.validate(dim)?,
            ScalarField::Sum { terms } => {
                for t in terms {
                    t.validate(dim)?;
                }
            }
        }
        Ok(())
    }

    /// Minimum over a fine sample lattice (`samples` points per axis).
    pub fn sampled_min(&self, dim: usize, samples: usize) -> f64 {
        self.sampled_fold(dim, samples, f64::INFINITY, f64::min)
    }

    /// Maximum over a fine sample lattice.
    pub fn sampled_max(&self, dim: usize, samples: usize) -> f64 {
        self.sampled_fold(dim, samples, f64::NEG_INFINITY, f64::max)
    }

    fn sampled_fold(&self, dim: usize, samples: usize, init: f64, f: fn(f64, f64) -> f64) -> f64 {
        let mut acc = init;
        if dim == 1 {
            for i in 0..samples {
                acc = f(acc, self.eval([i as f64 / samples as f64, 0.0]));
            }
        } else {
            for j in 0..samples {
                for i in 0..samples {
                    acc =
                        f(acc, self.eval([i as f64 / samples as f64, j as f64 / samples as f64]));
                }
            }
        }
        acc
    }
}
