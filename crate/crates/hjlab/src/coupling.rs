//! Row-stochastic coupling matrices and the exact coupling propagator
//! exp(t (K - I)), computed by scaling-and-squaring with a diagonal Pade
//! approximant for m <= 8.

use crate::error::{HjError, Result};
use serde::{Deserialize, Serialize};

pub const MAX_COMPONENTS: usize = 8;

/// m x m nonnegative matrix with unit row sums.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CouplingMatrix {
    m: usize,
    /// row-major entries
    rows: Vec<f64>,
}

impl CouplingMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 || m > MAX_COMPONENTS {
            return Err(HjError::Config(format!("coupling matrix size {m} not in 1..={MAX_COMPONENTS}")));
        }
        let mut flat = Vec::with_capacity(m * m);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(HjError::Config(format!("coupling row {i} has {} entries, want {m}", r.len())));
            }
            let mut sum = 0.0;
            for &e in r {
                if !(e >= 0.0) {
                    return Err(HjError::Config(format!("coupling entry in row {i} is negative or NaN")));
                }
                sum += e;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(HjError::Config(format!(
                    "coupling row {i} sums to {sum:.15}, want 1 within 1e-12"
                )));
            }
            flat.extend_from_slice(r);
        }
        Ok(Self { m, rows: flat })
    }

    /// The 2-component switching matrix with both rates equal to 1.
    pub fn symmetric_pair() -> Self {
        Self { m: 2, rows: vec![0.0, 1.0, 1.0, 0.0] }
    }

    /// 2-component matrix from switching rates c1, c2 in (0, 1].
    pub fn from_rates(c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0 && c1 <= 1.0 && c2 <= 1.0) {
            return Err(HjError::Config("rates must lie in (0, 1] so rows sum to 1".into()));
        }
        Self::new(vec![vec![1.0 - c1, c1], vec![c2, 1.0 - c2]])
    }

    /// Identity: the single-equation (uncoupled) case.
    pub fn single() -> Self {
        Self { m: 1, rows: vec![1.0] }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i * self.m + j]
    }

    pub fn is_doubly_stochastic(&self) -> bool {
        (0..self.m).all(|j| {
            let col: f64 = (0..self.m).map(|i| self.entry(i, j)).sum();
            (col - 1.0).abs() < 1e-10
        })
    }

    /// Largest off-diagonal row mass, i.e. the fastest leave rate (before the
    /// 1/epsilon scaling).
    pub fn max_leave_rate(&self) -> f64 {
        (0..self.m).map(|i| 1.0 - self.entry(i, i)).fold(0.0, f64::max)
    }

    /// Normalized left Perron eigenvector: pi K = pi, sum pi = 1. Computed by
    /// damped power iteration on (K + I)/2, which also handles periodic
    /// chains like the plain 2-swap.
    pub fn perron_left(&self) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![1.0 / m as f64; m];
        let mut next = vec![0.0; m];
        for _ in 0..20_000 {
            for (j, nj) in next.iter_mut().enumerate() {
                let mut s = 0.0;
                for i in 0..m {
                    s += pi[i] * self.entry(i, j);
                }
                *nj = 0.5 * (s + pi[j]);
            }
            let norm: f64 = next.iter().sum();
            for v in next.iter_mut() {
                *v /= norm;
            }
            let delta = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            pi.copy_from_slice(&next);
            if delta < 1e-15 {
                break;
            }
        }
        pi
    }

    /// exp(t (K - I)) as a dense m x m matrix.
    pub fn propagator(&self, t: f64) -> SmallMatrix {
        let m = self.m;
        let mut a = SmallMatrix::zeros(m);
        for i in 0..m {
            for j in 0..m {
                let kij = self.entry(i, j);
                a.set(i, j, t * (kij - if i == j { 1.0 } else { 0.0 }));
            }
        }
        expm(&a)
    }
}

/// Dense row-major m x m matrix, m <= 8.
#[derive(Clone, Debug, PartialEq)]
pub struct SmallMatrix {
    pub m: usize,
    pub a: Vec<f64>,
}

impl SmallMatrix {
    pub fn zeros(m: usize) -> Self {
        Self { m, a: vec![0.0; m * m] }
    }

    pub fn identity(m: usize) -> Self {
        let mut s = Self::zeros(m);
        for i in 0..m {
            s.set(i, i, 1.0);
        }
        s
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.m + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.m + j] = v;
    }

    pub fn matmul(&self, other: &SmallMatrix) -> SmallMatrix {
        let m = self.m;
        let mut out = SmallMatrix::zeros(m);
        for i in 0..m {
            for k in 0..m {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..m {
                    out.a[i * m + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> SmallMatrix {
        SmallMatrix { m: self.m, a: self.a.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &SmallMatrix) -> SmallMatrix {
        SmallMatrix {
            m: self.m,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn inf_norm(&self) -> f64 {
        (0..self.m)
            .map(|i| (0..self.m).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Apply to a state vector: out_i = sum_j A_ij x_j.
    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let m = self.m;
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..m {
                s += self.a[i * m + j] * x[j];
            }
            *o = s;
        }
    }

    /// Solve A X = B by LU with partial pivoting; returns X.
    pub fn solve(&self, b: &SmallMatrix) -> SmallMatrix {
        let m = self.m;
        let mut lu = self.a.clone();
        let mut x = b.a.clone();
        let mut piv: Vec<usize> = (0..m).collect();
        for col in 0..m {
            let mut best = col;
            let mut best_abs = lu[piv[col] * m + col].abs();
            for r in col + 1..m {
                let v = lu[piv[r] * m + col].abs();
                if v > best_abs {
                    best = r;
                    best_abs = v;
                }
            }
            piv.swap(col, best);
            let p = piv[col];
            let diag = lu[p * m + col];
            for r in col + 1..m {
                let pr = piv[r];
                let f = lu[pr * m + col] / diag;
                lu[pr * m + col] = f;
                for c in col + 1..m {
                    lu[pr * m + c] -= f * lu[p * m + c];
                }
                for c in 0..m {
                    x[pr * m + c] -= f * x[p * m + c];
                }
            }
        }
        // back substitution
        let mut out = SmallMatrix::zeros(m);
        for c in 0..m {
            for row in (0..m).rev() {
                let p = piv[row];
                let mut s = x[p * m + c];
                for k in row + 1..m {
                    s -= lu[p * m + k] * out.get(k, c);
                }
                out.set(row, c, s / lu[p * m + row]);
            }
        }
        out
    }
}

/// Matrix exponential by scaling-and-squaring with the diagonal [6/6] Pade
/// approximant. Plenty for m <= 8 generator matrices.
pub fn expm(a: &SmallMatrix) -> SmallMatrix {
    let norm = a.inf_norm();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a.scaled(0.5f64.powi(s));

    // c_k = m!(2m-k)! / ((2m)! k! (m-k)!) for m = 6
    const C: [f64; 7] = [
        1.0,
        0.5,
        5.0 / 44.0,
        1.0 / 66.0,
        1.0 / 792.0,
        1.0 / 15840.0,
        1.0 / 665280.0,
    ];
    let m = a.m;
    let mut num = SmallMatrix::identity(m).scaled(C[0]);
    let mut den = SmallMatrix::identity(m).scaled(C[0]);
    let mut pow = SmallMatrix::identity(m);
    for (k, &c) in C.iter().enumerate().skip(1) {
        pow = pow.matmul(&scaled);
        num = num.add(&pow.scaled(c));
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        den = den.add(&pow.scaled(sign * c));
    }
    let mut e = den.solve(&num);
    for _ in 0..s {
        e = e.matmul(&e);
    }
    e
}

/// Closed-form exp(t(K - I)) for the symmetric 2-component pair; used as a
/// cross-check of the Pade route.
pub fn symmetric_pair_propagator(t: f64) -> SmallMatrix {
    let e = (-2.0 * t).exp();
    SmallMatrix {
        m: 2,
        a: vec![0.5 * (1.0 + e), 0.5 * (1.0 - e), 0.5 * (1.0 - e), 0.5 * (1.0 + e)],
    }
}
