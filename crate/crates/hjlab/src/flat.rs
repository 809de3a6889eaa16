//! Flat-part and non-flat-part experiments for the effective Hamiltonian of
//! separable pairs `H_i = |p|^2 - V_i`, plus the elementary-property checks
//! run against computed tables. Potentials are built from smoothstep plateau
//! primitives so the level sets the hypotheses refer to are exact.

use crate::cell::{
    effective_at, effective_at_tied, lower_bound, upper_certificate, CellConfig, EffectiveTable,
};
use crate::coupling::CouplingMatrix;
use crate::error::{HjError, Result};
use crate::grid::{TorusGrid, Vec2};
use crate::hamiltonian::{Hamiltonian, HamiltonianSpec};
use crate::scalar_field::ScalarField;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum FlatPrediction {
    /// H_bar vanishes on a P-ball around the origin
    FlatZero,
    /// H_bar((P1, P2)) = P1^2 near the stripe direction, >= P1^2 everywhere
    StripeQuadratic,
}

/// Hypothesis data audited numerically before any solve.
#[derive(Clone, Debug, Serialize)]
pub enum Hypothesis {
    /// both potentials >= 0 and vanish exactly on the same interval, which
    /// sits strictly inside the nested windows w1 in w2
    SharedWells { zero: (f64, f64), w1: (f64, f64), w2: (f64, f64), floor: f64 },
    /// both potentials >= 0 and vanish exactly on the line {xi_axis = 1/2}
    Stripe { axis: usize },
    /// V1 in [-eps0, 0] with an exact zero plateau, V2 in [0, hi] with a
    /// narrower zero plateau inside it
    PlateauPair {
        eps0: f64,
        v1_zero: (f64, f64),
        v1_outer: (f64, f64),
        v2_zero: (f64, f64),
        v2_outer: (f64, f64),
        v2_hi: f64,
    },
    /// V1 == 0 everywhere; V2 >= 0 with its zero set inside the window
    FreeZeroInside { window: (f64, f64) },
    /// both potentials >= 0; the second zero set lies inside the window and
    /// meets the first zero set
    ZeroSetContained { window: (f64, f64) },
    /// V1 depends only on xi_1, V2 only on xi_2, each with a single zero
    ProductWells,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatExperiment {
    pub name: String,
    pub potentials: Vec<ScalarField>,
    pub prediction: FlatPrediction,
    pub hypothesis: Hypothesis,
    pub p_samples: Vec<Vec2>,
    pub tol: f64,
}

impl FlatExperiment {
    pub fn spec(&self) -> HamiltonianSpec {
        HamiltonianSpec::new(
            self.potentials
                .iter()
                .map(|v| Hamiltonian::QuadraticMinusPotential { potential: v.clone() })
                .collect(),
        )
        .expect("two potentials")
    }

    pub fn dim(&self) -> usize {
        match self.hypothesis {
            Hypothesis::Stripe { .. } | Hypothesis::ProductWells => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatRow {
    pub p: [f64; 2],
    pub h_bar: f64,
    pub err_bar: f64,
    pub lower_cert: f64,
    pub upper_cert: f64,
    pub target: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatVerdict {
    pub name: String,
    pub hypothesis_notes: Vec<String>,
    pub rows: Vec<FlatRow>,
    /// largest sampled |P| radius with every inner sample passing
    pub gamma_scan: f64,
    pub pass: bool,
}

const AUDIT_SAMPLES: usize = 4096;

fn audit(exp: &FlatExperiment) -> Result<Vec<String>> {
    let mut notes = Vec::new();
    let dim = exp.dim();
    if exp.potentials.len() != 2 {
        return Err(HjError::Config("flat experiments take exactly two potentials".into()));
    }
    for v in &exp.potentials {
        v.validate(dim)?;
    }
    let v1 = &exp.potentials[0];
    let v2 = &exp.potentials[1];
    let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo - 1e-12 && x <= hi + 1e-12;
    match &exp.hypothesis {
        Hypothesis::SharedWells { zero, w1, w2, floor } => {
            if !(w2.0 < w1.0 && w1.0 < zero.0 && zero.1 < w1.1 && w1.1 < w2.1) {
                return Err(HjError::Config("shared-well windows are not nested".into()));
            }
            for k in 0..AUDIT_SAMPLES {
                let x = k as f64 / AUDIT_SAMPLES as f64;
                for (i, v) in [v1, v2].iter().enumerate() {
                    let val = v.eval([x, 0.0]);
                    if val < -1e-12 {
                        return Err(HjError::Config(format!("V{} negative at {x}", i + 1)));
                    }
                    if inside(x, *zero) && val.abs() > 1e-12 {
                        return Err(HjError::Config(format!("V{} nonzero on the well", i + 1)));
                    }
                    if !inside(x, *w1) && val < floor - 1e-12 {
                        return Err(HjError::Config(format!(
                            "V{} below the floor outside w1",
                            i + 1
                        )));
                    }
                    if !inside(x, *zero) && !inside(x, *w1) && val <= 0.0 {
                        return Err(HjError::Config(format!("V{} vanishes outside w1", i + 1)));
                    }
                }
            }
            let d = (w1.0 - w2.0).min(zero.0 - w1.0).min(w2.1 - w1.1).min(w1.1 - zero.1);
            notes.push(format!("nested windows with margin d = {d:.4}, floor = {floor}"));
        }
        Hypothesis::Stripe { axis } => {
            let other = 1 - axis;
            for a in 0..64 {
                for b in 0..AUDIT_SAMPLES / 16 {
                    let mut xi = [0.0; 2];
                    xi[*axis] = b as f64 / (AUDIT_SAMPLES / 16) as f64;
                    xi[other] = a as f64 / 64.0;
                    for (i, v) in [v1, v2].iter().enumerate() {
                        let val = v.eval(xi);
                        if val < -1e-12 {
                            return Err(HjError::Config(format!("V{} negative", i + 1)));
                        }
                        let on_stripe = (xi[*axis] - 0.5).abs() < 1e-12;
                        if on_stripe && val.abs() > 1e-12 {
                            return Err(HjError::Config(format!(
                                "V{} nonzero on the stripe",
                                i + 1
                            )));
                        }
                        if !on_stripe && val <= 0.0 {
                            return Err(HjError::Config(format!(
                                "V{} vanishes off the stripe",
                                i + 1
                            )));
                        }
                    }
                }
            }
            notes.push(format!("stripe axis {axis}: zero sets match exactly"));
        }
        Hypothesis::PlateauPair { eps0, v1_zero, v1_outer, v2_zero, v2_outer, v2_hi } => {
            for k in 0..AUDIT_SAMPLES {
                let x = k as f64 / AUDIT_SAMPLES as f64;
                let a = v1.eval([x, 0.0]);
                let b = v2.eval([x, 0.0]);
                if !(-eps0 - 1e-12..=1e-12).contains(&a) {
                    return Err(HjError::Config(format!("V1 out of [-eps0, 0] at {x}")));
                }
                if !(-1e-12..=v2_hi + 1e-12).contains(&b) {
                    return Err(HjError::Config(format!("V2 out of [0, {v2_hi}] at {x}")));
                }
                if inside(x, *v1_zero) && a.abs() > 1e-12 {
                    return Err(HjError::Config("V1 nonzero on its plateau".into()));
                }
                if !inside(x, *v1_outer) && (a + eps0).abs() > 1e-12 {
                    return Err(HjError::Config("V1 above its outer level".into()));
                }
                if inside(x, *v2_zero) && b.abs() > 1e-12 {
                    return Err(HjError::Config("V2 nonzero on its plateau".into()));
                }
                if !inside(x, *v2_outer) && (b - v2_hi).abs() > 1e-12 {
                    return Err(HjError::Config("V2 off its outer level".into()));
                }
                if a + b < -1e-12 {
                    return Err(HjError::Config("V1 + V2 dips below zero".into()));
                }
            }
            notes.push(format!("plateau pair with eps0 = {eps0}: level sets exact"));
        }
        Hypothesis::FreeZeroInside { window } => {
            let mut zero_seen = false;
            for k in 0..AUDIT_SAMPLES {
                let x = k as f64 / AUDIT_SAMPLES as f64;
                if v1.eval([x, 0.0]).abs() > 1e-12 {
                    return Err(HjError::Config("first potential must vanish identically".into()));
                }
                let b = v2.eval([x, 0.0]);
                if b < -1e-12 {
                    return Err(HjError::Config("V2 negative".into()));
                }
                if b.abs() < 1e-12 {
                    zero_seen = true;
                    if !inside(x, *window) {
                        return Err(HjError::Config(format!("V2 zero at {x} outside the window")));
                    }
                }
            }
            if !zero_seen {
                return Err(HjError::Config("V2 has no zero".into()));
            }
            notes.push(format!("V2 zero set inside ({}, {})", window.0, window.1));
        }
        Hypothesis::ZeroSetContained { window } => {
            let mut met = false;
            let mut zero_seen = false;
            for k in 0..AUDIT_SAMPLES {
                let x = k as f64 / AUDIT_SAMPLES as f64;
                let a = v1.eval([x, 0.0]);
                let b = v2.eval([x, 0.0]);
                if a < -1e-12 || b < -1e-12 {
                    return Err(HjError::Config("potentials must be nonnegative".into()));
                }
                if b.abs() < 1e-12 {
                    zero_seen = true;
                    if !inside(x, *window) {
                        return Err(HjError::Config(format!("V2 zero at {x} outside the window")));
                    }
                    if a.abs() < 1e-12 {
                        met = true;
                    }
                }
            }
            if !zero_seen {
                return Err(HjError::Config("V2 has no zero".into()));
            }
            if !met {
                return Err(HjError::Config("zero sets do not intersect".into()));
            }
            notes.push(format!(
                "V2 zero set inside ({}, {}) and meets the V1 zero set",
                window.0, window.1
            ));
        }
        Hypothesis::ProductWells => {
            // V1 constant in xi_2, V2 constant in xi_1, one zero each
            let samples = 512;
            let mut zeros1 = 0usize;
            let mut zeros2 = 0usize;
            for k in 0..samples {
                let x = k as f64 / samples as f64;
                let a = v1.eval([x, 0.37]);
                if (a - v1.eval([x, 0.81])).abs() > 1e-12 {
                    return Err(HjError::Config("V1 depends on the second axis".into()));
                }
                let b = v2.eval([0.37, x]);
                if (b - v2.eval([0.81, x])).abs() > 1e-12 {
                    return Err(HjError::Config("V2 depends on the first axis".into()));
                }
                if a < -1e-12 || b < -1e-12 {
                    return Err(HjError::Config("product potentials must be nonnegative".into()));
                }
                if a.abs() < 1e-9 {
                    zeros1 += 1;
                }
                if b.abs() < 1e-9 {
                    zeros2 += 1;
                }
            }
            if zeros1 != 1 || zeros2 != 1 {
                return Err(HjError::Config(format!(
                    "expected single zeros, saw {zeros1} and {zeros2} grid zeros"
                )));
            }
            notes.push("axis profiles with single zeros".into());
        }
    }
    Ok(notes)
}

/// Run a flat/non-flat prediction: audit the hypotheses, compute H_bar with
/// certificates at every sampled P, apply the predicted verdict, and scan
/// outward for the passing radius.
pub fn run_flat_experiment(
    exp: &FlatExperiment,
    coupling: &CouplingMatrix,
    delta_seq: &[f64],
    cfg: &CellConfig,
    h_over_delta: Option<f64>,
) -> Result<FlatVerdict> {
    let hypothesis_notes = audit(exp)?;
    let spec = exp.spec();
    let dim = exp.dim();
    if cfg.grid.dim() != dim {
        return Err(HjError::Config("experiment and grid dimensions differ".into()));
    }
    use rayon::prelude::*;
    let rows: Vec<Result<FlatRow>> = exp
        .p_samples
        .par_iter()
        .map(|&p| {
            let (pt, _) = match h_over_delta {
                Some(r) => effective_at_tied(&spec, coupling, p, delta_seq, cfg, r)?,
                None => effective_at(&spec, coupling, p, delta_seq, cfg)?,
            };
            let lower = lower_bound(&spec, p, dim);
            let zero_pair = vec![vec![0.0; cfg.grid.len()]; 2];
            let upper = upper_certificate(&spec, coupling, p, &zero_pair, &cfg.grid)?;
            let (target, pass) = match exp.prediction {
                FlatPrediction::FlatZero => (0.0, pt.h_bar.abs() <= exp.tol),
                FlatPrediction::StripeQuadratic => {
                    let t = p[0] * p[0];
                    let ok = if p[1] == 0.0 {
                        (pt.h_bar - t).abs() <= exp.tol
                    } else {
                        pt.h_bar >= t - exp.tol
                    };
                    (t, ok)
                }
            };
            Ok(FlatRow {
                p,
                h_bar: pt.h_bar,
                err_bar: pt.error_bar,
                lower_cert: lower,
                upper_cert: upper,
                target,
                pass,
            })
        })
        .collect();
    let mut out_rows = Vec::with_capacity(rows.len());
    for r in rows {
        out_rows.push(r?);
    }
    // gamma scan: the largest radius such that all samples inside it pass
    let mut radii: Vec<(f64, bool)> = out_rows
        .iter()
        .map(|r| ((r.p[0] * r.p[0] + r.p[1] * r.p[1]).sqrt(), r.pass))
        .collect();
    radii.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut gamma_scan = 0.0;
    for (r, ok) in radii {
        if ok {
            gamma_scan = r;
        } else {
            break;
        }
    }
    let pass = out_rows.iter().all(|r| r.pass);
    Ok(FlatVerdict { name: exp.name.clone(), hypothesis_notes, rows: out_rows, gamma_scan, pass })
}

/// Smooth cutoff pair `phi = -P.(xi - anchor) * chi(xi)`, chi = 1 on w1 and
/// 0 outside w2, used as a certified subsolution at small |P| (1D).
pub fn cutoff_subsolution_pair(
    grid: &TorusGrid,
    p: f64,
    w1: (f64, f64),
    w2: (f64, f64),
) -> Vec<Vec<f64>> {
    let anchor = 0.5 * (w1.0 + w1.1);
    let chi = move |x: f64| -> f64 {
        if x >= w1.0 && x <= w1.1 {
            1.0
        } else if x <= w2.0 || x >= w2.1 {
            0.0
        } else if x < w1.0 {
            let t = (x - w2.0) / (w1.0 - w2.0);
            t * t * (3.0 - 2.0 * t)
        } else {
            let t = (x - w1.1) / (w2.1 - w1.1);
            1.0 - t * t * (3.0 - 2.0 * t)
        }
    };
    let phi = grid.sample(|x| -p * (x[0] - anchor) * chi(x[0]));
    vec![phi.clone(), phi]
}

// --- named experiment constructors -------------------------------------

/// Plateau trap pair: the first potential has a wide zero plateau dipping to
/// -eps0 outside, the second a narrow zero plateau climbing to 2 outside;
/// their minimum sets are disjoint yet H_bar stays flat at 0 near P = 0.
pub fn plateau_trap_pair(eps0: f64) -> [ScalarField; 2] {
    [
        ScalarField::Plateau {
            axis: 0,
            inner: 0.0,
            outer: -eps0,
            inner_lo: 4.0 / 16.0,
            inner_hi: 12.0 / 16.0,
            outer_lo: 3.0 / 16.0,
            outer_hi: 13.0 / 16.0,
        },
        ScalarField::Plateau {
            axis: 0,
            inner: 0.0,
            outer: 2.0,
            inner_lo: 7.0 / 16.0,
            inner_hi: 9.0 / 16.0,
            outer_lo: 6.0 / 16.0,
            outer_hi: 10.0 / 16.0,
        },
    ]
}

pub fn plateau_trap_experiment(eps0: f64, p_samples: Vec<Vec2>, tol: f64) -> FlatExperiment {
    let [v1, v2] = plateau_trap_pair(eps0);
    FlatExperiment {
        name: format!("plateau-trap eps0 = {eps0}"),
        potentials: vec![v1, v2],
        prediction: FlatPrediction::FlatZero,
        hypothesis: Hypothesis::PlateauPair {
            eps0,
            v1_zero: (4.0 / 16.0, 12.0 / 16.0),
            v1_outer: (3.0 / 16.0, 13.0 / 16.0),
            v2_zero: (7.0 / 16.0, 9.0 / 16.0),
            v2_outer: (6.0 / 16.0, 10.0 / 16.0),
            v2_hi: 2.0,
        },
        p_samples,
        tol,
    }
}

/// Both wells vanish on the same interval inside nested windows; the floor
/// level off the inner window feeds the flat-radius estimate.
pub fn shared_well_experiment(floor: f64, p_samples: Vec<Vec2>, tol: f64) -> FlatExperiment {
    let zero = (7.0 / 16.0, 9.0 / 16.0);
    let w1 = (6.0 / 16.0, 10.0 / 16.0);
    let w2 = (5.0 / 16.0, 11.0 / 16.0);
    let mk = |hi: f64| ScalarField::Plateau {
        axis: 0,
        inner: 0.0,
        outer: hi,
        inner_lo: zero.0,
        inner_hi: zero.1,
        outer_lo: w1.0,
        outer_hi: w1.1,
    };
    FlatExperiment {
        name: format!("shared-wells floor = {floor}"),
        potentials: vec![mk(floor), mk(1.5 * floor)],
        prediction: FlatPrediction::FlatZero,
        hypothesis: Hypothesis::SharedWells { zero, w1, w2, floor },
        p_samples,
        tol,
    }
}

/// 2D stripe pair: both potentials vanish exactly on {xi_2 = 1/2}.
pub fn stripe_pair() -> [ScalarField; 2] {
    let base = ScalarField::TrigPoly { axis: 1, mean: 1.0, cos: vec![1.0], sin: vec![] };
    [base.clone(), ScalarField::Scale { factor: 2.0, field: Box::new(base) }]
}

pub fn stripe_experiment(p_samples: Vec<Vec2>, tol: f64) -> FlatExperiment {
    let [v1, v2] = stripe_pair();
    FlatExperiment {
        name: "stripe".into(),
        potentials: vec![v1, v2],
        prediction: FlatPrediction::StripeQuadratic,
        hypothesis: Hypothesis::Stripe { axis: 1 },
        p_samples,
        tol,
    }
}

/// V1 identically zero, V2 a single cosine well at 1/2.
pub fn free_plus_single_well_experiment(p_samples: Vec<Vec2>, tol: f64) -> FlatExperiment {
    FlatExperiment {
        name: "free-plus-well".into(),
        potentials: vec![
            ScalarField::zero(),
            ScalarField::TrigPoly { axis: 0, mean: 1.0, cos: vec![1.0], sin: vec![] },
        ],
        prediction: FlatPrediction::FlatZero,
        hypothesis: Hypothesis::FreeZeroInside { window: (3.0 / 8.0, 5.0 / 8.0) },
        p_samples,
        tol,
    }
}

/// V1 with a wide zero plateau containing V2's single zero; only V2's zero
/// set needs to sit inside a shiftable window.
pub fn window_well_experiment(p_samples: Vec<Vec2>, tol: f64) -> FlatExperiment {
    FlatExperiment {
        name: "window-well".into(),
        potentials: vec![
            ScalarField::Plateau {
                axis: 0,
                inner: 0.0,
                outer: 1.0,
                inner_lo: 6.0 / 16.0,
                inner_hi: 10.0 / 16.0,
                outer_lo: 5.0 / 16.0,
                outer_hi: 11.0 / 16.0,
            },
            ScalarField::TrigPoly { axis: 0, mean: 1.0, cos: vec![1.0], sin: vec![] },
        ],
        prediction: FlatPrediction::FlatZero,
        hypothesis: Hypothesis::ZeroSetContained { window: (7.0 / 16.0, 9.0 / 16.0) },
        p_samples,
        tol,
    }
}

/// Separated-axis wells: V1(xi) = 1 - cos(2 pi xi_1), V2(xi) = 1 - cos(2 pi xi_2).
pub fn product_well_experiment(p_samples: Vec<Vec2>, tol: f64) -> FlatExperiment {
    FlatExperiment {
        name: "product-wells".into(),
        potentials: vec![
            ScalarField::TrigPoly { axis: 0, mean: 1.0, cos: vec![-1.0], sin: vec![] },
            ScalarField::TrigPoly { axis: 1, mean: 1.0, cos: vec![-1.0], sin: vec![] },
        ],
        prediction: FlatPrediction::FlatZero,
        hypothesis: Hypothesis::ProductWells,
        p_samples,
        tol,
    }
}

// --- elementary checks ---------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ElementaryMeta {
    pub convex: bool,
    pub one_homogeneous: bool,
}

#[derive(Clone, Debug, Serialize, Default)]
pub struct ElementaryReport {
    pub coercivity_ok: bool,
    /// None when gated off by metadata
    pub convexity_ok: Option<bool>,
    pub convexity_violations: usize,
    pub homogeneity_ok: Option<bool>,
    pub equality_ok: Option<bool>,
    pub max_comparison_ok: Option<bool>,
    pub notes: Vec<String>,
}

impl ElementaryReport {
    pub fn all_pass(&self) -> bool {
        self.coercivity_ok
            && self.convexity_ok.unwrap_or(true)
            && self.homogeneity_ok.unwrap_or(true)
            && self.equality_ok.unwrap_or(true)
            && self.max_comparison_ok.unwrap_or(true)
    }
}

/// Assert the elementary structure of a computed table, as applicable per
/// metadata: growth along rays, midpoint convexity, degree-1 scaling,
/// equality with a single-equation table, and domination by the
/// max-Hamiltonian table.
pub fn run_elementary_checks(
    table: &EffectiveTable,
    meta: ElementaryMeta,
    equal_to: Option<&EffectiveTable>,
    upper_bounded_by: Option<&EffectiveTable>,
    scale_tol: f64,
) -> ElementaryReport {
    let mut rep = ElementaryReport::default();
    let err_max = table.rows.iter().map(|r| r.err_bar).fold(0.0, f64::max);

    // coercivity probe: values at the lattice extremes exceed the central value
    let center = table
        .rows
        .iter()
        .min_by(|a, b| {
            let ra = a.p[0] * a.p[0] + a.p[1] * a.p[1];
            let rb = b.p[0] * b.p[0] + b.p[1] * b.p[1];
            ra.partial_cmp(&rb).unwrap()
        })
        .unwrap();
    let mut coercive = true;
    let nx = table.axes[0].len();
    let extremes: Vec<&crate::cell::EffectiveRow> = if table.dim() == 1 {
        vec![&table.rows[0], &table.rows[nx - 1]]
    } else {
        let ny = table.axes[1].len();
        vec![
            table.row_at(0, 0),
            table.row_at(nx - 1, 0),
            table.row_at(0, ny - 1),
            table.row_at(nx - 1, ny - 1),
        ]
    };
    for e in extremes {
        if e.h_bar <= center.h_bar {
            coercive = false;
        }
    }
    rep.coercivity_ok = coercive;

    if meta.convex {
        let tol = 2.0 * err_max;
        let mut violations = 0usize;
        let mut check_triple = |a: f64, b: f64, c: f64| {
            if b > 0.5 * (a + c) + tol {
                violations += 1;
            }
        };
        if table.dim() == 1 {
            for k in 1..nx - 1 {
                check_triple(
                    table.rows[k - 1].h_bar,
                    table.rows[k].h_bar,
                    table.rows[k + 1].h_bar,
                );
            }
        } else {
            let ny = table.axes[1].len();
            for j in 0..ny {
                for k in 1..nx - 1 {
                    check_triple(
                        table.row_at(k - 1, j).h_bar,
                        table.row_at(k, j).h_bar,
                        table.row_at(k + 1, j).h_bar,
                    );
                }
            }
            for j in 1..ny - 1 {
                for k in 0..nx {
                    check_triple(
                        table.row_at(k, j - 1).h_bar,
                        table.row_at(k, j).h_bar,
                        table.row_at(k, j + 1).h_bar,
                    );
                }
            }
            for j in 1..ny - 1 {
                for k in 1..nx - 1 {
                    check_triple(
                        table.row_at(k - 1, j - 1).h_bar,
                        table.row_at(k, j).h_bar,
                        table.row_at(k + 1, j + 1).h_bar,
                    );
                    check_triple(
                        table.row_at(k - 1, j + 1).h_bar,
                        table.row_at(k, j).h_bar,
                        table.row_at(k + 1, j - 1).h_bar,
                    );
                }
            }
        }
        rep.convexity_violations = violations;
        rep.convexity_ok = Some(violations == 0);
    } else {
        rep.notes.push("convexity check skipped: nonconvex components".into());
    }

    if meta.one_homogeneous {
        let mut ok = true;
        let mut tested = 0usize;
        for row in &table.rows {
            for r in [2.0, 3.0] {
                let q = [row.p[0] * r, row.p[1] * r];
                if let Some(other) = table.rows.iter().find(|o| {
                    (o.p[0] - q[0]).abs() < 1e-12 && (o.p[1] - q[1]).abs() < 1e-12
                }) {
                    tested += 1;
                    if (other.h_bar - r * row.h_bar).abs() > scale_tol {
                        ok = false;
                    }
                }
            }
        }
        if tested == 0 {
            rep.notes.push("no scalable ray pairs on the lattice".into());
        }
        rep.homogeneity_ok = Some(ok);
    }

    if let Some(other) = equal_to {
        let mut ok = other.rows.len() == table.rows.len();
        if ok {
            for (a, b) in table.rows.iter().zip(&other.rows) {
                if (a.h_bar - b.h_bar).abs() > 2.0 * (a.err_bar + b.err_bar) + 1e-9 {
                    ok = false;
                }
            }
        }
        rep.equality_ok = Some(ok);
    }

    if let Some(upper) = upper_bounded_by {
        let mut ok = upper.rows.len() == table.rows.len();
        if ok {
            for (a, b) in table.rows.iter().zip(&upper.rows) {
                if a.h_bar > b.h_bar + scale_tol {
                    ok = false;
                }
            }
        }
        rep.max_comparison_ok = Some(ok);
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_trap_hypotheses_hold() {
        let exp = plateau_trap_experiment(0.05, vec![[0.0, 0.0]], 0.03);
        assert!(audit(&exp).is_ok());
    }

    #[test]
    fn broken_hypothesis_is_rejected() {
        let mut exp = plateau_trap_experiment(0.05, vec![[0.0, 0.0]], 0.03);
        // shift V2's plateau so it leaks outside its declared zero window
        exp.potentials[1] = ScalarField::Plateau {
            axis: 0,
            inner: 0.0,
            outer: 2.0,
            inner_lo: 5.0 / 16.0,
            inner_hi: 9.0 / 16.0,
            outer_lo: 4.0 / 16.0,
            outer_hi: 10.0 / 16.0,
        };
        assert!(audit(&exp).is_err());
    }

    #[test]
    fn stripe_audit_checks_zero_set() {
        let exp = stripe_experiment(vec![[0.0, 0.0]], 0.05);
        assert!(audit(&exp).is_ok());
        let mut bad = exp.clone();
        // a potential with extra zeros off the stripe
        bad.potentials[0] =
            ScalarField::TrigPoly { axis: 1, mean: 1.0, cos: vec![0.0, 1.0], sin: vec![] };
        assert!(audit(&bad).is_err());
    }

    #[test]
    fn product_wells_audit() {
        let exp = product_well_experiment(vec![[0.0, 0.0]], 0.05);
        assert!(audit(&exp).is_ok());
    }

    #[test]
    fn cutoff_pair_has_expected_profile() {
        let grid = TorusGrid::new(1, 256).unwrap();
        let w1 = (6.0 / 16.0, 10.0 / 16.0);
        let w2 = (5.0 / 16.0, 11.0 / 16.0);
        let p = -0.02;
        let pair = cutoff_subsolution_pair(&grid, p, w1, w2);
        // flat -P.(x - anchor) inside w1, zero outside w2
        let anchor = 0.5;
        for idx in 0..grid.len() {
            let x = grid.point(idx)[0];
            if x >= w1.0 && x <= w1.1 {
                assert!((pair[0][idx] + p * (x - anchor)).abs() < 1e-12);
            }
            if x <= w2.0 || x >= w2.1 {
                assert_eq!(pair[0][idx], 0.0);
            }
        }
    }

    #[test]
    fn elementary_checks_on_synthetic_tables() {
        use crate::cell::{EffectiveRow, EffectiveTable};
        let axis: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.5).collect();
        let mk = |f: &dyn Fn(f64) -> f64| EffectiveTable {
            axes: vec![axis.clone()],
            rows: axis
                .iter()
                .map(|&p| EffectiveRow {
                    p: [p, 0.0],
                    h_bar: f(p),
                    err_bar: 1e-9,
                    lower_cert: f64::NEG_INFINITY,
                    upper_cert: f64::INFINITY,
                    ok: true,
                    note: String::new(),
                })
                .collect(),
            delta_min: 0.02,
            grid_n: 64,
        };
        let quad = mk(&|p| p * p);
        let absv = mk(&|p| p.abs());
        let rep = run_elementary_checks(
            &quad,
            ElementaryMeta { convex: true, one_homogeneous: false },
            None,
            Some(&mk(&|p| p * p + 0.5)),
            0.05,
        );
        assert!(rep.coercivity_ok);
        assert_eq!(rep.convexity_ok, Some(true));
        assert_eq!(rep.max_comparison_ok, Some(true));
        let rep2 = run_elementary_checks(
            &absv,
            ElementaryMeta { convex: true, one_homogeneous: true },
            Some(&absv),
            None,
            0.05,
        );
        assert_eq!(rep2.homogeneity_ok, Some(true));
        assert_eq!(rep2.equality_ok, Some(true));
        // a concave bump must fail convexity
        let bump = mk(&|p| -(p * p));
        let rep3 = run_elementary_checks(
            &bump,
            ElementaryMeta { convex: true, one_homogeneous: false },
            None,
            None,
            0.05,
        );
        assert_eq!(rep3.convexity_ok, Some(false));
        assert!(!rep3.coercivity_ok);
    }
}
