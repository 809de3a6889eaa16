//! Hamiltonian families, their Lagrangians, and the monotone numerical flux.

use crate::error::{HjError, Result};
use crate::grid::{TorusGrid, Vec2};
use crate::scalar_field::ScalarField;
use serde::{Deserialize, Serialize};

/// Sentinel standing for an infinite running cost; exceeds any finite cost
/// the solvers can produce.
pub const INFINITE_COST: f64 = 1e300;

/// A single closed-form Hamiltonian H(xi, p).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hamiltonian {
    /// Constant in p (pure-switching problems).
    Constant { value: f64 },
    /// `|p|^2 - V(xi)`
    QuadraticMinusPotential { potential: ScalarField },
    /// `a(xi) |p|` with a > 0
    ScaledNorm { coeff: ScalarField },
    /// `(|p|^2 - 1)^2`
    DoubleWell,
    /// pointwise max of two Hamiltonians
    MaxOf { a: Box<Hamiltonian>, b: Box<Hamiltonian> },
}

impl Hamiltonian {
    /// `|p|` (unit-coefficient norm).
    pub fn norm() -> Self {
        Hamiltonian::ScaledNorm { coeff: ScalarField::Const { value: 1.0 } }
    }

    /// `|p|^2` with no potential.
    pub fn quadratic() -> Self {
        Hamiltonian::QuadraticMinusPotential { potential: ScalarField::zero() }
    }

    pub fn eval(&self, xi: Vec2, p: Vec2) -> f64 {
        let p2 = p[0] * p[0] + p[1] * p[1];
        match self {
            Hamiltonian::Constant { value } => *value,
            Hamiltonian::QuadraticMinusPotential { potential } => p2 - potential.eval(xi),
            Hamiltonian::ScaledNorm { coeff } => coeff.eval(xi) * p2.sqrt(),
            Hamiltonian::DoubleWell => {
                let w = p2 - 1.0;
                w * w
            }
            Hamiltonian::MaxOf { a, b } => a.eval(xi, p).max(b.eval(xi, p)),
        }
    }

    pub fn convex_in_p(&self) -> bool {
        match self {
            Hamiltonian::Constant { .. }
            | Hamiltonian::QuadraticMinusPotential { .. }
            | Hamiltonian::ScaledNorm { .. } => true,
            Hamiltonian::DoubleWell => false,
            Hamiltonian::MaxOf { a, b } => a.convex_in_p() && b.convex_in_p(),
        }
    }

    pub fn even_in_p(&self) -> bool {
        match self {
            Hamiltonian::MaxOf { a, b } => a.even_in_p() && b.even_in_p(),
            _ => true,
        }
    }

    /// Positively 1-homogeneous in p.
    pub fn one_homogeneous(&self) -> bool {
        match self {
            Hamiltonian::ScaledNorm { .. } => true,
            Hamiltonian::MaxOf { a, b } => a.one_homogeneous() && b.one_homogeneous(),
            _ => false,
        }
    }

    /// Lipschitz constant in p over all of R^n, infinite for quadratic growth.
    pub fn lip_p(&self, dim: usize) -> f64 {
        match self {
            Hamiltonian::Constant { .. } => 0.0,
            Hamiltonian::QuadraticMinusPotential { .. } | Hamiltonian::DoubleWell => f64::INFINITY,
            Hamiltonian::ScaledNorm { coeff } => coeff.sampled_max(dim, 4096_usize.pow(1)).max(0.0),
            Hamiltonian::MaxOf { a, b } => a.lip_p(dim).max(b.lip_p(dim)),
        }
    }

    /// Upper bound of |dH/dp_k| over the box |p_j| <= r, used as the global
    /// Lax-Friedrichs dissipation constant.
    pub fn grad_bound(&self, r: f64, dim: usize) -> f64 {
        match self {
            Hamiltonian::Constant { .. } => 0.0,
            Hamiltonian::QuadraticMinusPotential { .. } => 2.0 * r,
            Hamiltonian::ScaledNorm { coeff } => coeff.sampled_max(dim, 4096),
            Hamiltonian::DoubleWell => {
                let p2max = dim as f64 * r * r;
                4.0 * r * (p2max - 1.0).abs().max(1.0)
            }
            Hamiltonian::MaxOf { a, b } => a.grad_bound(r, dim).max(b.grad_bound(r, dim)),
        }
    }

    /// Separable form `|p|^2 - V(xi)`: the potential, if this component has one.
    pub fn separable_potential(&self) -> Option<&ScalarField> {
        match self {
            Hamiltonian::QuadraticMinusPotential { potential } => Some(potential),
            _ => None,
        }
    }

    /// Closed-form Fenchel conjugate L(xi, q) = sup_p (p.q - H(xi, p)) for the
    /// convex families; `None` for nonconvex components.
    pub fn lagrangian(&self, xi: Vec2, q: Vec2) -> Option<f64> {
        let q2 = q[0] * q[0] + q[1] * q[1];
        match self {
            Hamiltonian::Constant { value } => {
                // indicator of {q = 0}, shifted by -H
                Some(if q2 == 0.0 { -value } else { INFINITE_COST })
            }
            Hamiltonian::QuadraticMinusPotential { potential } => {
                Some(q2 / 4.0 + potential.eval(xi))
            }
            Hamiltonian::ScaledNorm { coeff } => {
                let a = coeff.eval(xi);
                Some(if q2.sqrt() <= a { 0.0 } else { INFINITE_COST })
            }
            _ => None,
        }
    }

    /// Largest admissible control speed at xi for indicator-type
    /// Lagrangians; `None` when the Lagrangian is finite everywhere.
    pub fn max_speed(&self, xi: Vec2) -> Option<f64> {
        match self {
            Hamiltonian::Constant { .. } => Some(0.0),
            Hamiltonian::ScaledNorm { coeff } => Some(coeff.eval(xi)),
            _ => None,
        }
    }

    /// dH/dp, the optimal-control velocity map for feedback policies.
    /// `None` where it is unavailable (nonconvex families, kinks).
    pub fn velocity(&self, xi: Vec2, p: Vec2) -> Option<Vec2> {
        match self {
            Hamiltonian::Constant { .. } => Some([0.0, 0.0]),
            Hamiltonian::QuadraticMinusPotential { .. } => Some([2.0 * p[0], 2.0 * p[1]]),
            Hamiltonian::ScaledNorm { coeff } => {
                let n = (p[0] * p[0] + p[1] * p[1]).sqrt();
                if n < 1e-12 {
                    Some([0.0, 0.0])
                } else {
                    let a = coeff.eval(xi);
                    Some([a * p[0] / n, a * p[1] / n])
                }
            }
            _ => None,
        }
    }
}

/// The m-component Hamiltonian of a weakly coupled system.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    components: Vec<Hamiltonian>,
}

impl HamiltonianSpec {
    pub fn new(components: Vec<Hamiltonian>) -> Result<Self> {
        if components.is_empty() {
            return Err(HjError::Config("need at least one Hamiltonian component".into()));
        }
        Ok(Self { components })
    }

    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &Hamiltonian {
        &self.components[i]
    }

    pub fn components(&self) -> &[Hamiltonian] {
        &self.components
    }

    pub fn eval(&self, i: usize, xi: Vec2, p: Vec2) -> f64 {
        self.components[i].eval(xi, p)
    }

    pub fn all_convex(&self) -> bool {
        self.components.iter().all(|c| c.convex_in_p())
    }

    pub fn all_even(&self) -> bool {
        self.components.iter().all(|c| c.even_in_p())
    }

    pub fn all_one_homogeneous(&self) -> bool {
        self.components.iter().all(|c| c.one_homogeneous())
    }

    /// Global LF dissipation constant over the gradient range [-r, r]^n.
    pub fn theta(&self, r_grad: f64, dim: usize) -> f64 {
        self.components.iter().map(|c| c.grad_bound(r_grad, dim)).fold(0.0, f64::max)
    }

    /// max_i sup_{xi, |p| <= r} |H_i(xi, p)|, sampled on lattices; the
    /// barrier-slope constant.
    pub fn sup_abs_on_ball(&self, r: f64, dim: usize) -> f64 {
        let xi_samples = if dim == 1 { 2048 } else { 128 };
        let p_samples = 33usize;
        let mut c = 0.0f64;
        for comp in &self.components {
            let mut worst = 0.0f64;
            let mut xi_iter = |xi: Vec2| {
                for a in 0..p_samples {
                    let pa = -r + 2.0 * r * a as f64 / (p_samples - 1) as f64;
                    if dim == 1 {
                        worst = worst.max(comp.eval(xi, [pa, 0.0]).abs());
                    } else {
                        for b in 0..p_samples {
                            let pb = -r + 2.0 * r * b as f64 / (p_samples - 1) as f64;
                            if pa * pa + pb * pb <= r * r * (1.0 + 1e-12) {
                                worst = worst.max(comp.eval(xi, [pa, pb]).abs());
                            }
                        }
                    }
                }
            };
            if dim == 1 {
                for i in 0..xi_samples {
                    xi_iter([i as f64 / xi_samples as f64, 0.0]);
                }
            } else {
                for j in 0..xi_samples {
                    for i in 0..xi_samples {
                        xi_iter([i as f64 / xi_samples as f64, j as f64 / xi_samples as f64]);
                    }
                }
            }
            c = c.max(worst);
        }
        c
    }
}

/// Lax-Friedrichs monotone flux:
/// `H(xi, (p- + p+)/2) - (theta/2) sum_k (p+_k - p-_k)`.
///
/// Consistent (equals H when p- = p+) and monotone provided theta bounds
/// |dH/dp_k| over the gradient range in play.
pub fn numerical_hamiltonian(
    spec: &HamiltonianSpec,
    i: usize,
    xi: Vec2,
    p_minus: Vec2,
    p_plus: Vec2,
    theta: f64,
    dim: usize,
) -> f64 {
    let mid = [(p_minus[0] + p_plus[0]) * 0.5, (p_minus[1] + p_plus[1]) * 0.5];
    let mut diff = p_plus[0] - p_minus[0];
    if dim == 2 {
        diff += p_plus[1] - p_minus[1];
    }
    spec.eval(i, xi, mid) - 0.5 * theta * diff
}

/// Options for the lattice Fenchel-Legendre transform.
#[derive(Clone, Debug)]
pub struct LegendreOptions {
    /// coarse lattice cells per axis over [-p_radius, p_radius]
    pub steps: usize,
    /// refinement rounds around the coarse maximizer
    pub refine: usize,
    /// values above this are reported as the infinite-cost sentinel
    pub cap: f64,
}

impl Default for LegendreOptions {
    fn default() -> Self {
        Self { steps: 512, refine: 2, cap: 1e6 }
    }
}

/// Fenchel-Legendre transform of a convex component on a p-lattice:
/// `L_i(xi, q) = max_{|p_k| <= p_radius} (p.q - H_i(xi, p))` per sample q.
///
/// Values exceeding `opts.cap` come back as [`INFINITE_COST`]; a capped-value
/// maximizer sitting on the lattice boundary means `p_radius` was too small
/// and is an error.
pub fn legendre_transform(
    spec: &HamiltonianSpec,
    i: usize,
    xi: Vec2,
    q_samples: &[Vec2],
    p_radius: f64,
    dim: usize,
    opts: &LegendreOptions,
) -> Result<Vec<f64>> {
    if !spec.component(i).convex_in_p() {
        return Err(HjError::NonConvex(i));
    }
    if !(p_radius > 0.0) {
        return Err(HjError::Config("p_radius must be positive".into()));
    }
    let steps = opts.steps.max(8);
    let mut out = Vec::with_capacity(q_samples.len());
    for &q in q_samples {
        let value = |p: Vec2| p[0] * q[0] + p[1] * q[1] - spec.eval(i, xi, p);
        // coarse scan
        let mut best = f64::NEG_INFINITY;
        let mut best_p = [0.0; 2];
        let mut on_boundary = false;
        let coarse = |k: usize| -p_radius + 2.0 * p_radius * k as f64 / steps as f64;
        if dim == 1 {
            for a in 0..=steps {
                let p = [coarse(a), 0.0];
                let v = value(p);
                if v > best {
                    best = v;
                    best_p = p;
                    on_boundary = a == 0 || a == steps;
                }
            }
        } else {
            for b in 0..=steps {
                for a in 0..=steps {
                    let p = [coarse(a), coarse(b)];
                    let v = value(p);
                    if v > best {
                        best = v;
                        best_p = p;
                        on_boundary = a == 0 || a == steps || b == 0 || b == steps;
                    }
                }
            }
        }
        if best > opts.cap {
            out.push(INFINITE_COST);
            continue;
        }
        if on_boundary {
            return Err(HjError::BoundaryAttainment { q0: q[0], q1: q[1], p_radius });
        }
        // local refinement keeps the maximizer within lattice resolution
        let mut half = 2.0 * p_radius / steps as f64;
        for _ in 0..opts.refine {
            let fine = 32usize;
            let mut nb = best;
            let mut nbp = best_p;
            if dim == 1 {
                for a in 0..=fine {
                    let p = [best_p[0] - half + 2.0 * half * a as f64 / fine as f64, 0.0];
                    let v = value(p);
                    if v > nb {
                        nb = v;
                        nbp = p;
                    }
                }
            } else {
                for b in 0..=fine {
                    for a in 0..=fine {
                        let p = [
                            best_p[0] - half + 2.0 * half * a as f64 / fine as f64,
                            best_p[1] - half + 2.0 * half * b as f64 / fine as f64,
                        ];
                        let v = value(p);
                        if v > nb {
                            nb = v;
                            nbp = p;
                        }
                    }
                }
            }
            best = nb;
            best_p = nbp;
            half *= 2.0 / fine as f64;
        }
        out.push(best);
    }
    Ok(out)
}

/// One component of a system with its potential/coefficient pre-sampled at
/// the gridpoint images `xi = scale * x`, so inner solver loops stay free of
/// trigonometric calls.
#[derive(Clone, Debug)]
enum SampledKind {
    Constant(f64),
    Quadratic { v: Vec<f64> },
    ScaledNorm { a: Vec<f64> },
    DoubleWell,
    Max(Box<SampledKind>, Box<SampledKind>),
}

impl SampledKind {
    fn build(h: &Hamiltonian, grid: &TorusGrid, xi_scale: f64) -> Self {
        match h {
            Hamiltonian::Constant { value } => SampledKind::Constant(*value),
            Hamiltonian::QuadraticMinusPotential { potential } => SampledKind::Quadratic {
                v: grid.sample(|x| potential.eval([x[0] * xi_scale, x[1] * xi_scale])),
            },
            Hamiltonian::ScaledNorm { coeff } => SampledKind::ScaledNorm {
                a: grid.sample(|x| coeff.eval([x[0] * xi_scale, x[1] * xi_scale])),
            },
            Hamiltonian::DoubleWell => SampledKind::DoubleWell,
            Hamiltonian::MaxOf { a, b } => SampledKind::Max(
                Box::new(SampledKind::build(a, grid, xi_scale)),
                Box::new(SampledKind::build(b, grid, xi_scale)),
            ),
        }
    }

    #[inline]
    fn eval(&self, idx: usize, p: Vec2) -> f64 {
        let p2 = p[0] * p[0] + p[1] * p[1];
        match self {
            SampledKind::Constant(c) => *c,
            SampledKind::Quadratic { v } => p2 - v[idx],
            SampledKind::ScaledNorm { a } => a[idx] * p2.sqrt(),
            SampledKind::DoubleWell => {
                let w = p2 - 1.0;
                w * w
            }
            SampledKind::Max(a, b) => a.eval(idx, p).max(b.eval(idx, p)),
        }
    }
}

/// All components of a system sampled on a grid, plus the global LF constant.
#[derive(Clone, Debug)]
pub struct SampledSystem {
    comps: Vec<SampledKind>,
    pub theta: f64,
    pub dim: usize,
}

impl SampledSystem {
    /// `xi_scale` maps gridpoints to the fast variable (1/epsilon for the
    /// oscillatory problems, 1 for cell problems).
    pub fn new(spec: &HamiltonianSpec, grid: &TorusGrid, xi_scale: f64, r_grad: f64) -> Self {
        let comps =
            spec.components().iter().map(|c| SampledKind::build(c, grid, xi_scale)).collect();
        SampledSystem { comps, theta: spec.theta(r_grad, grid.dim()), dim: grid.dim() }
    }

    #[inline]
    pub fn eval(&self, i: usize, idx: usize, p: Vec2) -> f64 {
        self.comps[i].eval(idx, p)
    }

    /// LF flux at a pre-sampled gridpoint.
    #[inline]
    pub fn flux(&self, i: usize, idx: usize, p_minus: Vec2, p_plus: Vec2) -> f64 {
        let mid = [(p_minus[0] + p_plus[0]) * 0.5, (p_minus[1] + p_plus[1]) * 0.5];
        let mut diff = p_plus[0] - p_minus[0];
        if self.dim == 2 {
            diff += p_plus[1] - p_minus[1];
        }
        self.comps[i].eval(idx, mid) - 0.5 * self.theta * diff
    }

    pub fn m(&self) -> usize {
        self.comps.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn quad_spec() -> HamiltonianSpec {
        HamiltonianSpec::new(vec![Hamiltonian::quadratic()]).unwrap()
    }

    #[test]
    fn flux_is_consistent() {
        let spec = quad_spec();
        let p = [0.7, 0.0];
        let v = numerical_hamiltonian(&spec, 0, [0.3, 0.0], p, p, 5.0, 1);
        assert!((v - spec.eval(0, [0.3, 0.0], p)).abs() < 1e-14);
    }

    #[test]
    fn flux_matches_hand_value() {
        // H(p) = p^2, p- = 0, p+ = 2, theta = 4 -> H(1) - 4 = -3
        let spec = quad_spec();
        let v = numerical_hamiltonian(&spec, 0, [0.0, 0.0], [0.0, 0.0], [2.0, 0.0], 4.0, 1);
        assert!((v + 3.0).abs() < 1e-14);
    }

    #[test]
    fn flux_monotone_on_lattice_scan() {
        // increasing p+ never increases the flux; increasing p- never
        // decreases it, when theta dominates the gradient bound
        let spec = quad_spec();
        let theta = spec.theta(3.0, 1);
        for a in -10..10 {
            for b in -10..10 {
                let pm = [a as f64 * 0.3, 0.0];
                let pp = [b as f64 * 0.3, 0.0];
                if pm[0].abs() > 3.0 || pp[0].abs() > 2.9 {
                    continue;
                }
                let v0 = numerical_hamiltonian(&spec, 0, [0.0; 2], pm, pp, theta, 1);
                let v1 = numerical_hamiltonian(
                    &spec,
                    0,
                    [0.0; 2],
                    pm,
                    [pp[0] + 0.1, 0.0],
                    theta,
                    1,
                );
                assert!(v1 <= v0 + 1e-12);
                let v2 = numerical_hamiltonian(
                    &spec,
                    0,
                    [0.0; 2],
                    [pm[0] + 0.1, 0.0],
                    pp,
                    theta,
                    1,
                );
                assert!(v2 >= v0 - 1e-12);
            }
        }
    }

    #[test]
    fn flux_monotone_random_triples_2d() {
        let spec = HamiltonianSpec::new(vec![Hamiltonian::QuadraticMinusPotential {
            potential: ScalarField::TrigPoly { axis: 0, mean: 1.0, cos: vec![-1.0], sin: vec![] },
        }])
        .unwrap();
        let r = 2.0;
        let theta = spec.theta(r, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let pm = [rng.gen_range(-r..r - 0.2), rng.gen_range(-r..r - 0.2)];
            let pp = [rng.gen_range(-r..r - 0.2), rng.gen_range(-r..r - 0.2)];
            let xi = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let axis = rng.gen_range(0..2);
            let v0 = numerical_hamiltonian(&spec, 0, xi, pm, pp, theta, 2);
            let mut pp2 = pp;
            pp2[axis] += 0.1;
            let v1 = numerical_hamiltonian(&spec, 0, xi, pm, pp2, theta, 2);
            assert!(v1 <= v0 + 1e-12);
            let mut pm2 = pm;
            pm2[axis] += 0.1;
            let v2 = numerical_hamiltonian(&spec, 0, xi, pm2, pp, theta, 2);
            assert!(v2 >= v0 - 1e-12);
        }
    }

    #[test]
    fn legendre_quadratic_is_analytic_conjugate() {
        // H(p) = p^2 -> L(q) = q^2/4; at q = 2 the maximizer is p* = 1
        let spec = quad_spec();
        let l = legendre_transform(
            &spec,
            0,
            [0.0; 2],
            &[[2.0, 0.0]],
            4.0,
            1,
            &LegendreOptions::default(),
        )
        .unwrap();
        assert!((l[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn legendre_norm_is_ball_indicator() {
        let spec = HamiltonianSpec::new(vec![Hamiltonian::norm()]).unwrap();
        let opts = LegendreOptions { cap: 50.0, ..Default::default() };
        let l = legendre_transform(
            &spec,
            0,
            [0.0; 2],
            &[[0.5, 0.0], [1.5, 0.0]],
            200.0,
            1,
            &opts,
        )
        .unwrap();
        assert!(l[0].abs() < 1e-9);
        assert_eq!(l[1], INFINITE_COST);
    }

    #[test]
    fn legendre_with_potential_shifts_by_v() {
        // H(p) = p^2 - V with V = 1: L(0) = 1
        let spec = HamiltonianSpec::new(vec![Hamiltonian::QuadraticMinusPotential {
            potential: ScalarField::Const { value: 1.0 },
        }])
        .unwrap();
        let l = legendre_transform(
            &spec,
            0,
            [0.0; 2],
            &[[0.0, 0.0]],
            4.0,
            1,
            &LegendreOptions::default(),
        )
        .unwrap();
        assert!((l[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn legendre_rejects_nonconvex() {
        let spec = HamiltonianSpec::new(vec![Hamiltonian::DoubleWell]).unwrap();
        let e = legendre_transform(
            &spec,
            0,
            [0.0; 2],
            &[[0.0, 0.0]],
            2.0,
            1,
            &LegendreOptions::default(),
        );
        assert!(matches!(e, Err(HjError::NonConvex(0))));
    }

    #[test]
    fn legendre_flags_small_radius() {
        // H(p) = p^2, q = 8: maximizer p* = 4 lies outside radius 2
        let spec = quad_spec();
        let e = legendre_transform(
            &spec,
            0,
            [0.0; 2],
            &[[8.0, 0.0]],
            2.0,
            1,
            &LegendreOptions { cap: 1e9, ..Default::default() },
        );
        assert!(matches!(e, Err(HjError::BoundaryAttainment { .. })));
    }

    #[test]
    fn duality_inequality_on_samples() {
        // H(xi, p) >= p q - L(xi, q) with equality at the conjugate pair
        let spec = HamiltonianSpec::new(vec![Hamiltonian::QuadraticMinusPotential {
            potential: ScalarField::TrigPoly { axis: 0, mean: 0.5, cos: vec![0.5], sin: vec![] },
        }])
        .unwrap();
        let xi = [0.37, 0.0];
        let qs: Vec<Vec2> = (-5..=5).map(|k| [k as f64 * 0.4, 0.0]).collect();
        let ls =
            legendre_transform(&spec, 0, xi, &qs, 6.0, 1, &LegendreOptions::default()).unwrap();
        for (q, l) in qs.iter().zip(&ls) {
            for k in -8..=8 {
                let p = [k as f64 * 0.25, 0.0];
                assert!(spec.eval(0, xi, p) >= p[0] * q[0] - l - 1e-8);
            }
            // equality at p* = q/2 within lattice resolution
            let p_star = [q[0] / 2.0, 0.0];
            let gap = spec.eval(0, xi, p_star) - (p_star[0] * q[0] - l);
            assert!(gap.abs() < 1e-6);
        }
    }

    #[test]
    fn spec_periodicity_sample() {
        let spec = HamiltonianSpec::new(vec![
            Hamiltonian::ScaledNorm {
                coeff: ScalarField::TrigPoly { axis: 0, mean: 1.5, cos: vec![0.3], sin: vec![0.2] },
            },
            Hamiltonian::QuadraticMinusPotential {
                potential: ScalarField::TrigPoly {
                    axis: 0,
                    mean: 0.0,
                    cos: vec![1.0],
                    sin: vec![-2.0],
                },
            },
        ])
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let xi = [rng.gen_range(0.0..1.0), 0.0];
            let p = [rng.gen_range(-3.0..3.0), 0.0];
            for i in 0..2 {
                let a = spec.eval(i, xi, p);
                let b = spec.eval(i, [xi[0] + 1.0, xi[1]], p);
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn coercivity_probe() {
        let spec = HamiltonianSpec::new(vec![
            Hamiltonian::quadratic(),
            Hamiltonian::norm(),
            Hamiltonian::DoubleWell,
        ])
        .unwrap();
        let r = 8.0;
        for i in 0..3 {
            for k in 0..16 {
                let xi = [k as f64 / 16.0, 0.0];
                assert!(spec.eval(i, xi, [r, 0.0]) > spec.eval(i, xi, [0.0, 0.0]));
            }
        }
    }

    #[test]
    fn sampled_system_matches_direct_eval() {
        let grid = TorusGrid::new(1, 64).unwrap();
        let spec = HamiltonianSpec::new(vec![Hamiltonian::ScaledNorm {
            coeff: ScalarField::TrigPoly { axis: 0, mean: 2.0, cos: vec![0.7], sin: vec![] },
        }])
        .unwrap();
        let sys = SampledSystem::new(&spec, &grid, 10.0, 3.0);
        for idx in 0..grid.len() {
            let x = grid.point(idx);
            let p = [0.9, 0.0];
            let direct = spec.eval(0, [x[0] * 10.0, 0.0], p);
            assert!((sys.eval(0, idx, p) - direct).abs() < 1e-12);
        }
    }
}
