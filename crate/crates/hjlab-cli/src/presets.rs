//! Built-in experiment presets. Every preset ships in-repo so the headline
//! experiments run with zero authoring; names are stable identifiers.

use crate::config::*;
use hjlab::{Hamiltonian, ScalarField};
use std::f64::consts::PI;

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub config: ExperimentConfig,
}

fn swap_pair() -> Vec<Vec<f64>> {
    vec![vec![0.0, 1.0], vec![1.0, 0.0]]
}

/// |p| and a(x)|p| with the rational trigonometric coefficient whose
/// effective Hamiltonian is exactly |P|.
pub fn norm_coeff_pair() -> Vec<Hamiltonian> {
    vec![
        Hamiltonian::norm(),
        Hamiltonian::ScaledNorm {
            coeff: ScalarField::RationalTrig {
                axis: 0,
                cos_num: 1.0 / (8.0 * PI * PI),
                sin_num: 1.0 / (4.0 * PI),
                cos_den: 0.5 + 1.0 / (8.0 * PI * PI),
            },
        },
    ]
}

/// The closed-form corrector pair of the norm-coefficient example at P = 1.
pub fn norm_coeff_correctors() -> Vec<ScalarField> {
    vec![
        ScalarField::TrigPoly {
            axis: 0,
            mean: 0.0,
            cos: vec![-1.0 / (8.0 * PI * PI)],
            sin: vec![1.0 / (16.0 * PI * PI * PI)],
        },
        ScalarField::TrigPoly {
            axis: 0,
            mean: 0.0,
            cos: vec![0.0],
            sin: vec![1.0 / (4.0 * PI) + 1.0 / (16.0 * PI * PI * PI)],
        },
    ]
}

/// Quadratic pair whose cell problem is solved exactly by (cos, sin): the
/// effective value at zero sits strictly above the potential-sum bound.
pub fn exact_trig_pair() -> Vec<Hamiltonian> {
    let tps = 2.0 * PI * PI;
    vec![
        Hamiltonian::QuadraticMinusPotential {
            potential: ScalarField::TrigPoly {
                axis: 0,
                mean: tps,
                cos: vec![1.0, -tps],
                sin: vec![-1.0, 0.0],
            },
        },
        Hamiltonian::QuadraticMinusPotential {
            potential: ScalarField::TrigPoly {
                axis: 0,
                mean: tps,
                cos: vec![-1.0, tps],
                sin: vec![1.0, 0.0],
            },
        },
    ]
}

fn line(points: &[f64]) -> Vec<Vec<f64>> {
    points.iter().map(|&p| vec![p]).collect()
}

pub fn catalog() -> Vec<Preset> {
    let mut out = Vec::new();

    out.push(Preset {
        name: "example-4.1",
        summary: "norm pair with rational coefficient: effective Hamiltonian |P| and closed-form correctors",
        config: ExperimentConfig::Cell(CellExperiment {
            hamiltonians: norm_coeff_pair(),
            coupling: swap_pair(),
            grid_dim: 1,
            grid_n: 512,
            delta_seq: vec![0.08, 0.04, 0.02],
            tol: 1e-6,
            r_grad: 4.0,
            h_factor: 1.0,
            max_iters: 4_000_000,
            h_over_delta: None,
            p_points: line(&[-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]),
            expected: [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]
                .iter()
                .map(|&p: &f64| ExpectedValue { p: vec![p], value: p.abs(), tol: 0.05 })
                .collect(),
            expected_lower: vec![],
            min_gap_above_lower: None,
            corrector_reference: Some(CorrectorReference {
                p: vec![1.0],
                fields: norm_coeff_correctors(),
                tol: 0.05,
            }),
        }),
    });

    out.push(Preset {
        name: "nonconvex-H0",
        summary: "double-well pair: cell value 1 at P = 0, above the naive min-max",
        config: ExperimentConfig::Cell(CellExperiment {
            hamiltonians: vec![Hamiltonian::DoubleWell, Hamiltonian::DoubleWell],
            coupling: swap_pair(),
            grid_dim: 1,
            grid_n: 128,
            delta_seq: vec![0.08, 0.04, 0.02],
            tol: 1e-7,
            r_grad: 3.0,
            h_factor: 1.0,
            max_iters: 4_000_000,
            h_over_delta: None,
            p_points: line(&[0.0]),
            expected: vec![ExpectedValue { p: vec![0.0], value: 1.0, tol: 0.05 }],
            expected_lower: vec![],
            min_gap_above_lower: None,
            corrector_reference: None,
        }),
    });

    out.push(Preset {
        name: "remark-4.13",
        summary: "trig pair with exact correctors: effective value 0 strictly above the -2 pi^2 sum bound",
        config: ExperimentConfig::Cell(CellExperiment {
            hamiltonians: exact_trig_pair(),
            coupling: swap_pair(),
            grid_dim: 1,
            grid_n: 256,
            delta_seq: vec![0.08, 0.04, 0.02],
            tol: 1e-6,
            r_grad: 8.0,
            h_factor: 1.0,
            max_iters: 4_000_000,
            h_over_delta: Some(1.0 / 20.0),
            p_points: line(&[0.0]),
            expected: vec![ExpectedValue { p: vec![0.0], value: 0.0, tol: 0.05 }],
            expected_lower: vec![ExpectedValue {
                p: vec![0.0],
                value: -2.0 * PI * PI,
                tol: 1e-9,
            }],
            min_gap_above_lower: Some(2.0 * PI * PI - 0.1),
            corrector_reference: None,
        }),
    });

    out.push(Preset {
        name: "thm-4.8",
        summary: "shared wells in nested windows: flat zero near the origin with a cutoff subsolution certificate",
        config: ExperimentConfig::Flat(FlatExperimentCfg {
            experiment: FlatKind::SharedWells,
            eps0: Some(0.5),
            p_samples: line(&[-0.02, -0.01, 0.0, 0.01, 0.02]),
            tol: 0.03,
            grid_n: 512,
            delta_seq: vec![0.08, 0.04, 0.02],
            cell_tol: 1e-6,
            r_grad: 4.0,
            max_iters: 4_000_000,
            h_over_delta: None,
            sensitivity_eps0: vec![],
            subsolution_check: true,
            expect_lower_zero: true,
        }),
    });

    out.push(Preset {
        name: "thm-4.9",
        summary: "2D stripe potentials: effective Hamiltonian equals P1^2 along the stripe and dominates it everywhere",
        config: ExperimentConfig::Flat(FlatExperimentCfg {
            experiment: FlatKind::Stripe,
            eps0: None,
            p_samples: vec![
                vec![0.0, 0.0],
                vec![0.25, 0.0],
                vec![0.5, 0.0],
                vec![0.0, 0.1],
                vec![0.25, 0.1],
                vec![0.5, 0.1],
                vec![0.0, 0.2],
                vec![0.25, 0.2],
                vec![0.5, 0.2],
            ],
            tol: 0.05,
            grid_n: 128,
            delta_seq: vec![0.08, 0.04, 0.02],
            cell_tol: 1e-6,
            r_grad: 3.0,
            max_iters: 4_000_000,
            h_over_delta: Some(1.0 / (0.02 * 128.0)),
            sensitivity_eps0: vec![],
            subsolution_check: false,
            expect_lower_zero: false,
        }),
    });

    out.push(Preset {
        name: "thm-4.10",
        summary: "plateau trap with disjoint minima: flat zero certified two-sided by the potential-sum bound",
        config: ExperimentConfig::Flat(FlatExperimentCfg {
            experiment: FlatKind::PlateauTrap,
            eps0: Some(0.05),
            p_samples: line(&[-0.05, -0.02, 0.0, 0.02, 0.05]),
            tol: 0.03,
            grid_n: 512,
            delta_seq: vec![0.08, 0.04, 0.02],
            cell_tol: 1e-6,
            r_grad: 4.0,
            max_iters: 4_000_000,
            h_over_delta: None,
            sensitivity_eps0: vec![0.1, 0.02],
            subsolution_check: false,
            expect_lower_zero: true,
        }),
    });

    out.push(Preset {
        name: "thm-4.12",
        summary: "free component plus a single well: flat zero although one potential vanishes identically",
        config: ExperimentConfig::Flat(FlatExperimentCfg {
            experiment: FlatKind::FreeWell,
            eps0: None,
            p_samples: line(&[-0.05, -0.02, 0.0, 0.02, 0.05]),
            tol: 0.03,
            grid_n: 256,
            delta_seq: vec![0.08, 0.04, 0.02],
            cell_tol: 1e-6,
            r_grad: 4.0,
            max_iters: 4_000_000,
            h_over_delta: Some(1.0 / 20.0),
            sensitivity_eps0: vec![],
            subsolution_check: false,
            expect_lower_zero: false,
        }),
    });

    out.push(Preset {
        name: "thm-4.13",
        summary: "windowed well: only the second zero set needs containment for the flat part",
        config: ExperimentConfig::Flat(FlatExperimentCfg {
            experiment: FlatKind::WindowWell,
            eps0: None,
            p_samples: line(&[-0.05, -0.02, 0.0, 0.02, 0.05]),
            tol: 0.03,
            grid_n: 256,
            delta_seq: vec![0.08, 0.04, 0.02],
            cell_tol: 1e-6,
            r_grad: 4.0,
            max_iters: 4_000_000,
            h_over_delta: Some(1.0 / 20.0),
            sensitivity_eps0: vec![],
            subsolution_check: false,
            expect_lower_zero: false,
        }),
    });

    out.push(Preset {
        name: "thm-4.14",
        summary: "separated-axis wells in 2D: flat zero from product-structure trapping",
        config: ExperimentConfig::Flat(FlatExperimentCfg {
            experiment: FlatKind::ProductWells,
            eps0: None,
            p_samples: vec![
                vec![0.0, 0.0],
                vec![0.02, 0.0],
                vec![-0.02, 0.0],
                vec![0.0, 0.02],
                vec![0.0, -0.02],
            ],
            tol: 0.03,
            grid_n: 128,
            delta_seq: vec![0.08, 0.04, 0.02],
            cell_tol: 1e-6,
            r_grad: 2.5,
            max_iters: 4_000_000,
            h_over_delta: Some(1.0 / (0.02 * 128.0)),
            sensitivity_eps0: vec![],
            subsolution_check: false,
            expect_lower_zero: false,
        }),
    });

    let rate_cfg = RateExperiment {
        hamiltonians: norm_coeff_pair(),
        coupling: swap_pair(),
        initial: vec![
            ScalarField::TrigPoly { axis: 0, mean: 0.0, cos: vec![], sin: vec![1.0] },
            ScalarField::Const { value: 0.0 },
        ],
        eps_list: vec![0.2, 0.1, 0.05],
        horizon: 0.5,
        eps_cells: 32,
        table_p: (-18..=18).map(|k| k as f64 * 0.25).collect(),
        table_grid_n: 128,
        delta_seq: vec![0.08, 0.04, 0.02],
        tol: 1e-6,
        r_grad: 8.0,
        time_samples: 40,
        min_slope: Some(0.28),
        layer_constant_rel: Some(0.5),
        sandwich: Some(SandwichCheck { epsilon: 0.1, slack_h: 5.0 }),
        datum_check: Some(DatumCheck { t: 0.1, agree_tol: 3e-2 }),
    };

    out.push(Preset {
        name: "rate-thm1.2",
        summary: "matched-solution convergence rate sweep with fitted log-log slope",
        config: ExperimentConfig::Rate(rate_cfg.clone()),
    });

    out.push(Preset {
        name: "layer-prop3.1",
        summary: "initial-layer window error against the eps |log eps| envelope",
        config: ExperimentConfig::Rate(RateExperiment {
            min_slope: None,
            sandwich: None,
            datum_check: None,
            ..rate_cfg
        }),
    });

    out.push(Preset {
        name: "dirichlet-thm6.1",
        summary: "exit-time problem: the effective boundary datum is the minimum of the component data",
        config: ExperimentConfig::Dirichlet(DirichletExperiment {
            hamiltonians: vec![Hamiltonian::norm(), Hamiltonian::norm()],
            coupling: swap_pair(),
            domain_a: 0.0,
            domain_b: 1.0,
            grid_n: 321,
            eps_list: vec![0.2, 0.1, 0.05],
            g_left: vec![1.0, 0.0],
            g_right: vec![1.0, 0.0],
            tol: 1e-8,
            r_grad: 4.0,
            max_iters: 4_000_000,
            table_p: (-8..=8).map(|k| k as f64 * 0.25).collect(),
            table_grid_n: 64,
            delta_seq: vec![0.08, 0.04],
            boundary_gap_tol: Some(0.05),
        }),
    });

    out.push(Preset {
        name: "msys-thm5.1",
        summary: "3-component doubly stochastic system: common limit with the averaged datum and exact coupling decay",
        config: ExperimentConfig::Evolve(EvolveExperiment {
            hamiltonians: vec![
                Hamiltonian::QuadraticMinusPotential {
                    potential: ScalarField::TrigPoly {
                        axis: 0,
                        mean: 0.5,
                        cos: vec![-0.5],
                        sin: vec![],
                    },
                },
                Hamiltonian::quadratic(),
                Hamiltonian::QuadraticMinusPotential {
                    potential: ScalarField::TrigPoly {
                        axis: 0,
                        mean: 0.5,
                        cos: vec![],
                        sin: vec![0.5],
                    },
                },
            ],
            coupling: vec![
                vec![0.5, 0.25, 0.25],
                vec![0.25, 0.5, 0.25],
                vec![0.25, 0.25, 0.5],
            ],
            grid_dim: 1,
            grid_n: 320,
            epsilon: 0.1,
            horizon: 0.2,
            initial: vec![
                ScalarField::TrigPoly { axis: 0, mean: 0.0, cos: vec![], sin: vec![0.3] },
                ScalarField::Const { value: 0.0 },
                ScalarField::TrigPoly { axis: 0, mean: 0.0, cos: vec![0.3], sin: vec![] },
            ],
            sample_times: vec![0.05, 0.1, 0.2],
            r_grad: 8.0,
            sandwich_slack_h: Some(5.0),
            msystem: Some(MSystemChecks {
                eps_list: vec![0.2, 0.1, 0.05],
                t_check: 0.1,
                f_bar_tol: 2e-2,
                contraction_tol: 1e-10,
            }),
        }),
    });

    out.push(Preset {
        name: "dpp-prop7.2",
        summary: "stochastic representation checks: pure-coupling closed form, dynamic programming split, jump law",
        config: ExperimentConfig::Dpp(DppExperiment {
            hamiltonians: vec![Hamiltonian::quadratic(), Hamiltonian::quadratic()],
            rates: vec![1.0, 1.0],
            epsilon: 0.25,
            paths: 100_000,
            seed: 20240817,
            t: 0.4,
            x: vec![0.3],
            start_state: 0,
            initial: vec![
                ScalarField::TrigPoly { axis: 0, mean: 0.0, cos: vec![], sin: vec![0.2] },
                ScalarField::Const { value: 0.1 },
            ],
            grid_n: 128,
            r_grad: 8.0,
            h_split_frac: 0.5,
            with_jump_law: true,
            with_pure_coupling: true,
        }),
    });

    out
}

pub fn find(name: &str) -> Option<Preset> {
    catalog().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_at_least_twelve_presets() {
        assert!(catalog().len() >= 12);
    }

    #[test]
    fn preset_names_are_unique_and_stable() {
        let names: Vec<&str> = catalog().iter().map(|p| p.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        for want in [
            "example-4.1",
            "nonconvex-H0",
            "remark-4.13",
            "thm-4.8",
            "thm-4.9",
            "thm-4.10",
            "thm-4.12",
            "thm-4.13",
            "thm-4.14",
            "rate-thm1.2",
            "layer-prop3.1",
            "dirichlet-thm6.1",
            "msys-thm5.1",
            "dpp-prop7.2",
        ] {
            assert!(names.contains(&want), "missing preset {want}");
        }
    }

    #[test]
    fn presets_round_trip_through_config_validation() {
        for p in catalog() {
            let text = crate::config::to_json(&p.config);
            let back = crate::config::from_json(&text).expect(p.name);
            assert_eq!(crate::config::to_json(&back), text, "{}", p.name);
        }
    }
}
