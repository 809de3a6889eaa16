use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use hjlab_cli::config::ExperimentConfig;
use hjlab_cli::{execute, presets};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hjlab",
    about = "Numerical laboratory for weakly coupled Hamilton-Jacobi systems with fast switching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// declarative experiment config (JSON)
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// built-in preset name (see `hjlab presets`)
    #[arg(long)]
    preset: Option<String>,
    /// output directory for artifacts
    #[arg(long)]
    out: Option<PathBuf>,
    /// cap on worker threads
    #[arg(long)]
    jobs: Option<usize>,
    /// override the experiment seed where one applies
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Effective Hamiltonian at chosen slopes, with correctors
    Cell(RunArgs),
    /// Effective Hamiltonian sampled on a P-lattice
    Table(RunArgs),
    /// Time-dependent oscillatory system run
    Evolve(RunArgs),
    /// Rate-of-convergence harness against matched solutions
    Rate(RunArgs),
    /// Flat/non-flat part experiments
    Flat(RunArgs),
    /// Steady Dirichlet problems and their effective limit
    Dirichlet(RunArgs),
    /// Monte Carlo control value estimation
    Mc(RunArgs),
    /// Stochastic representation checks (closed form, DPP, jump law)
    Dpp(RunArgs),
    /// List the built-in presets
    Presets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Presets => {
            for p in presets::catalog() {
                println!("{:<18} [{}] {}", p.name, p.config.kind(), p.summary);
            }
            return ExitCode::SUCCESS;
        }
        Command::Cell(a) => ("cell", a),
        Command::Table(a) => ("table", a),
        Command::Evolve(a) => ("evolve", a),
        Command::Rate(a) => ("rate", a),
        Command::Flat(a) => ("flat", a),
        Command::Dirichlet(a) => ("dirichlet", a),
        Command::Mc(a) => ("mc", a),
        Command::Dpp(a) => ("dpp", a),
    };
    match run(kind, args) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            // config errors exit 2; numerical nonconvergence exits 3
            let code = match e.downcast_ref::<hjlab::HjError>() {
                Some(hjlab::HjError::NonConvergence { .. }) => 3,
                Some(hjlab::HjError::NonFinite(_)) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run(kind: &str, args: &RunArgs) -> anyhow::Result<u8> {
    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("rayon pool")?;
    }
    let (name, mut config): (String, ExperimentConfig) = match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let cfg = hjlab_cli::config::from_json(&text)
                .map_err(|e| anyhow::anyhow!("invalid config: {e}"))?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "experiment".into());
            (stem, cfg)
        }
        (None, Some(name)) => {
            let preset = presets::find(name)
                .with_context(|| format!("unknown preset {name:?}; run `hjlab presets`"))?;
            (preset.name.to_string(), preset.config)
        }
        _ => bail!("exactly one of --config or --preset is required"),
    };
    if config.kind() != kind {
        bail!("config kind {:?} does not match the {kind:?} subcommand", config.kind());
    }
    if let Some(seed) = args.seed {
        config.override_seed(seed);
    }
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("out-{name}")));
    let (outcome, manifest) = execute(&name, &config, &out_dir)?;
    for v in &outcome.verdicts {
        match v.pass {
            Some(true) => println!("PASS {} - {}", v.name, v.detail),
            Some(false) => println!("FAIL {} - {}", v.name, v.detail),
            None => println!("INFO {} - {}", v.name, v.detail),
        }
    }
    println!(
        "wrote {} artifacts to {} in {:.1}s",
        manifest.artifacts.len(),
        out_dir.display(),
        manifest.runtime_seconds
    );
    if outcome.nonconverged > 0 {
        // partial artifacts were kept
        Ok(3)
    } else if outcome.all_passed() {
        Ok(0)
    } else {
        Ok(1)
    }
}
