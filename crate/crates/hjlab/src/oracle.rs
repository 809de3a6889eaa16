//! Brute-force reference values used to check the solvers. Everything here
//! is a direct minimization or enumeration with no shared code paths with
//! the schemes it validates.

use crate::grid::TorusGrid;

/// Value of the variational solution of `u_t + |Du|^2 = 0` at time t on the
/// grid: `u(x, t) = min_y [ f(y) + |x - y|^2 / (4t) ]`, minimized over grid
/// points in a few periodic images.
pub fn hopf_lax_quadratic(grid: &TorusGrid, f: &[f64], t: f64) -> Vec<f64> {
    assert!(t > 0.0);
    minimize_over_images(grid, f, |dist2| dist2 / (4.0 * t))
}

/// Variational solution of `u_t + |Du| = 0`: `u(x, t) = min_{|x-y| <= t} f(y)`.
pub fn hopf_lax_eikonal(grid: &TorusGrid, f: &[f64], t: f64) -> Vec<f64> {
    assert!(t > 0.0);
    let t2 = t * t;
    minimize_over_images(grid, f, |dist2| if dist2 <= t2 * (1.0 + 1e-12) { 0.0 } else { f64::INFINITY })
}

fn minimize_over_images(grid: &TorusGrid, f: &[f64], cost: impl Fn(f64) -> f64) -> Vec<f64> {
    let npts = grid.len();
    let mut out = vec![f64::INFINITY; npts];
    let shifts: &[f64] = &[-2.0, -1.0, 0.0, 1.0, 2.0];
    for (xi, o) in out.iter_mut().enumerate() {
        let x = grid.point(xi);
        for (yi, fy) in f.iter().enumerate() {
            let y = grid.point(yi);
            if grid.dim() == 1 {
                for &s in shifts {
                    let d = x[0] - y[0] - s;
                    let c = fy + cost(d * d);
                    if c < *o {
                        *o = c;
                    }
                }
            } else {
                for &sx in shifts {
                    for &sy in shifts {
                        let dx = x[0] - y[0] - sx;
                        let dy = x[1] - y[1] - sy;
                        let c = fy + cost(dx * dx + dy * dy);
                        if c < *o {
                            *o = c;
                        }
                    }
                }
            }
        }
    }
    out
}
