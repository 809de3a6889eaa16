//! Experiment orchestration: declarative configs, a preset catalog keyed to
//! the headline experiments, and runners emitting CSV/JSON artifacts with a
//! digest manifest.

pub mod config;
pub mod presets;
pub mod runner;

use serde::Serialize;
use std::path::Path;
use std::time::Instant;

#[derive(Serialize)]
pub struct ManifestArtifact {
    pub file: String,
    pub digest: String,
}

#[derive(Serialize)]
pub struct Manifest {
    pub name: String,
    pub kind: String,
    pub version: String,
    pub runtime_seconds: f64,
    pub all_passed: bool,
    pub artifacts: Vec<ManifestArtifact>,
    pub config: config::ExperimentConfig,
}

/// Run one experiment end to end and write its artifacts plus
/// `manifest.json` and `verdicts.json` under `out_dir`.
pub fn execute(
    name: &str,
    cfg: &config::ExperimentConfig,
    out_dir: &Path,
) -> hjlab::Result<(runner::Outcome, Manifest)> {
    let start = Instant::now();
    let outcome = runner::run(cfg)?;
    let runtime = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(out_dir)
        .map_err(|e| hjlab::HjError::Config(format!("cannot create {out_dir:?}: {e}")))?;
    let mut artifacts = Vec::new();
    for (file, body) in &outcome.artifacts {
        std::fs::write(out_dir.join(file), body)
            .map_err(|e| hjlab::HjError::Config(format!("cannot write {file}: {e}")))?;
        artifacts.push(ManifestArtifact {
            file: file.clone(),
            digest: hjlab::report::digest(body.as_bytes()),
        });
    }
    let verdicts_body = serde_json::to_string_pretty(&outcome.verdicts).unwrap();
    std::fs::write(out_dir.join("verdicts.json"), &verdicts_body)
        .map_err(|e| hjlab::HjError::Config(format!("cannot write verdicts: {e}")))?;
    artifacts.push(ManifestArtifact {
        file: "verdicts.json".into(),
        digest: hjlab::report::digest(verdicts_body.as_bytes()),
    });
    let manifest = Manifest {
        name: name.to_string(),
        kind: cfg.kind().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        runtime_seconds: runtime,
        all_passed: outcome.all_passed(),
        artifacts,
        config: cfg.clone(),
    };
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).unwrap(),
    )
    .map_err(|e| hjlab::HjError::Config(format!("cannot write manifest: {e}")))?;
    Ok((outcome, manifest))
}
