//! Declarative experiment configurations. The JSON (de)serialization of
//! [`ExperimentConfig`] is the on-disk format; unknown keys are rejected
//! everywhere.

use hjlab::{Hamiltonian, ScalarField};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentConfig {
    Cell(CellExperiment),
    Table(TableExperiment),
    Evolve(EvolveExperiment),
    Rate(RateExperiment),
    Flat(FlatExperimentCfg),
    Dirichlet(DirichletExperiment),
    Mc(McExperiment),
    Dpp(DppExperiment),
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Cell(_) => "cell",
            ExperimentConfig::Table(_) => "table",
            ExperimentConfig::Evolve(_) => "evolve",
            ExperimentConfig::Rate(_) => "rate",
            ExperimentConfig::Flat(_) => "flat",
            ExperimentConfig::Dirichlet(_) => "dirichlet",
            ExperimentConfig::Mc(_) => "mc",
            ExperimentConfig::Dpp(_) => "dpp",
        }
    }

    pub fn override_seed(&mut self, seed: u64) {
        match self {
            ExperimentConfig::Mc(c) => c.seed = seed,
            ExperimentConfig::Dpp(c) => c.seed = seed,
            _ => {}
        }
    }
}

fn d_tol() -> f64 {
    1e-6
}
fn d_r_grad() -> f64 {
    8.0
}
fn d_h_factor() -> f64 {
    1.0
}
fn d_max_iters() -> usize {
    4_000_000
}
fn d_eps_cells() -> usize {
    32
}
fn d_time_samples() -> usize {
    40
}
fn d_paths() -> usize {
    100_000
}

/// A pointwise numeric assertion against a computed quantity.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedValue {
    pub p: Vec<f64>,
    pub value: f64,
    pub tol: f64,
}

/// Reference correctors in closed form, compared in sup norm after joint
/// mean normalization.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorReference {
    pub p: Vec<f64>,
    pub fields: Vec<ScalarField>,
    pub tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellExperiment {
    pub hamiltonians: Vec<Hamiltonian>,
    pub coupling: Vec<Vec<f64>>,
    pub grid_dim: usize,
    pub grid_n: usize,
    pub delta_seq: Vec<f64>,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_r_grad")]
    pub r_grad: f64,
    #[serde(default = "d_h_factor")]
    pub h_factor: f64,
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
    /// when set, each delta solves on its own grid with h ~ h_over_delta * delta
    #[serde(default)]
    pub h_over_delta: Option<f64>,
    pub p_points: Vec<Vec<f64>>,
    #[serde(default)]
    pub expected: Vec<ExpectedValue>,
    #[serde(default)]
    pub expected_lower: Vec<ExpectedValue>,
    /// assert h_bar - lower_cert >= this at every point
    #[serde(default)]
    pub min_gap_above_lower: Option<f64>,
    #[serde(default)]
    pub corrector_reference: Option<CorrectorReference>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementaryChecksCfg {
    pub scale_tol: f64,
    /// also build the max-Hamiltonian table and assert domination
    #[serde(default)]
    pub with_max_comparison: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableExperiment {
    pub hamiltonians: Vec<Hamiltonian>,
    pub coupling: Vec<Vec<f64>>,
    pub grid_dim: usize,
    pub grid_n: usize,
    pub delta_seq: Vec<f64>,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_r_grad")]
    pub r_grad: f64,
    #[serde(default = "d_h_factor")]
    pub h_factor: f64,
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub h_over_delta: Option<f64>,
    pub p_axes: Vec<Vec<f64>>,
    #[serde(default)]
    pub expected: Vec<ExpectedValue>,
    #[serde(default)]
    pub elementary: Option<ElementaryChecksCfg>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MSystemChecks {
    /// epsilon sweep; gaps at `t_check` must decrease along it
    pub eps_list: Vec<f64>,
    pub t_check: f64,
    /// tolerance for the t -> 0 extrapolation against the averaged datum
    pub f_bar_tol: f64,
    /// exact contraction check of the coupling propagator on mean-zero
    /// eigenvector data
    pub contraction_tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveExperiment {
    pub hamiltonians: Vec<Hamiltonian>,
    pub coupling: Vec<Vec<f64>>,
    pub grid_dim: usize,
    pub grid_n: usize,
    pub epsilon: f64,
    pub horizon: f64,
    pub initial: Vec<ScalarField>,
    pub sample_times: Vec<f64>,
    #[serde(default = "d_r_grad")]
    pub r_grad: f64,
    /// build barriers and assert a clean sandwich at slack = k * h
    #[serde(default)]
    pub sandwich_slack_h: Option<f64>,
    #[serde(default)]
    pub msystem: Option<MSystemChecks>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumCheck {
    /// comparison time for the effective-datum trend
    pub t: f64,
    /// component agreement tolerance at the smallest epsilon
    pub agree_tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateExperiment {
    pub hamiltonians: Vec<Hamiltonian>,
    pub coupling: Vec<Vec<f64>>,
    pub initial: Vec<ScalarField>,
    pub eps_list: Vec<f64>,
    pub horizon: f64,
    #[serde(default = "d_eps_cells")]
    pub eps_cells: usize,
    /// P-lattice for the effective table feeding the harness
    pub table_p: Vec<f64>,
    pub table_grid_n: usize,
    pub delta_seq: Vec<f64>,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_r_grad")]
    pub r_grad: f64,
    #[serde(default = "d_time_samples")]
    pub time_samples: usize,
    #[serde(default)]
    pub min_slope: Option<f64>,
    /// layer constants must sit within this relative band of their median
    #[serde(default)]
    pub layer_constant_rel: Option<f64>,
    /// barrier sandwich on the run at the given epsilon, slack = k * h
    #[serde(default)]
    pub sandwich: Option<SandwichCheck>,
    #[serde(default)]
    pub datum_check: Option<DatumCheck>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandwichCheck {
    pub epsilon: f64,
    pub slack_h: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FlatKind {
    PlateauTrap,
    SharedWells,
    Stripe,
    FreeWell,
    WindowWell,
    ProductWells,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatExperimentCfg {
    pub experiment: FlatKind,
    /// plateau floor / well depth parameter where the family takes one
    #[serde(default)]
    pub eps0: Option<f64>,
    pub p_samples: Vec<Vec<f64>>,
    pub tol: f64,
    pub grid_n: usize,
    pub delta_seq: Vec<f64>,
    #[serde(default = "d_tol")]
    pub cell_tol: f64,
    #[serde(default = "d_r_grad")]
    pub r_grad: f64,
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub h_over_delta: Option<f64>,
    /// extra parameter values rerun and reported without assertion
    #[serde(default)]
    pub sensitivity_eps0: Vec<f64>,
    /// evaluate the cutoff subsolution certificate below the derived radius
    #[serde(default)]
    pub subsolution_check: bool,
    /// assert the potential-sum lower certificate is exactly zero
    #[serde(default)]
    pub expect_lower_zero: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletExperiment {
    pub hamiltonians: Vec<Hamiltonian>,
    pub coupling: Vec<Vec<f64>>,
    pub domain_a: f64,
    pub domain_b: f64,
    pub grid_n: usize,
    pub eps_list: Vec<f64>,
    /// boundary data per component at the left and right endpoints
    pub g_left: Vec<f64>,
    pub g_right: Vec<f64>,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_r_grad")]
    pub r_grad: f64,
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
    /// effective-solution comparison table
    pub table_p: Vec<f64>,
    pub table_grid_n: usize,
    pub delta_seq: Vec<f64>,
    /// assert |u_i^eps - u_eff| <= tol next to the boundary at the smallest eps
    #[serde(default)]
    pub boundary_gap_tol: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum McPolicyCfg {
    Stay,
    OpenLoop { radius: f64, steps: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McExperiment {
    pub hamiltonians: Vec<Hamiltonian>,
    pub rates: Vec<f64>,
    pub epsilon: f64,
    #[serde(default = "d_paths")]
    pub paths: usize,
    pub seed: u64,
    pub t: f64,
    pub x: Vec<f64>,
    pub start_state: usize,
    pub terminal: Vec<ScalarField>,
    pub policy: McPolicyCfg,
    /// compare against the exact pure-coupling average (requires constant
    /// Hamiltonians); tolerance in standard errors
    #[serde(default)]
    pub closed_form_sigmas: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DppExperiment {
    /// convex pair for the feedback-policy consistency check
    pub hamiltonians: Vec<Hamiltonian>,
    pub rates: Vec<f64>,
    pub epsilon: f64,
    #[serde(default = "d_paths")]
    pub paths: usize,
    pub seed: u64,
    pub t: f64,
    pub x: Vec<f64>,
    pub start_state: usize,
    pub initial: Vec<ScalarField>,
    pub grid_n: usize,
    #[serde(default = "d_r_grad")]
    pub r_grad: f64,
    pub h_split_frac: f64,
    /// also run the pure-coupling closed-form and jump-law checks
    #[serde(default)]
    pub with_jump_law: bool,
    #[serde(default)]
    pub with_pure_coupling: bool,
}

pub fn from_json(text: &str) -> Result<ExperimentConfig, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

pub fn to_json(cfg: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"cell": {"hamiltonians": [], "coupling": [], "grid_dim": 1,
            "grid_n": 64, "delta_seq": [0.1, 0.05], "p_points": [], "bogus": 1}}"#;
        assert!(from_json(text).is_err());
    }

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig::Cell(CellExperiment {
            hamiltonians: vec![Hamiltonian::quadratic(), Hamiltonian::DoubleWell],
            coupling: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            grid_dim: 1,
            grid_n: 128,
            delta_seq: vec![0.08, 0.04],
            tol: 1e-6,
            r_grad: 4.0,
            h_factor: 1.0,
            max_iters: 100_000,
            h_over_delta: None,
            p_points: vec![vec![0.0]],
            expected: vec![ExpectedValue { p: vec![0.0], value: 1.0, tol: 0.05 }],
            expected_lower: vec![],
            min_gap_above_lower: None,
            corrector_reference: None,
        });
        let text = to_json(&cfg);
        let back = from_json(&text).unwrap();
        assert_eq!(to_json(&back), text);
    }
}
