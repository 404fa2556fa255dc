//! Scenario runner for the everett engine: TOML configs in, CSV and JSON
//! artifacts plus a checksummed manifest out.

pub mod artifacts;
pub mod config;
pub mod error;
mod scenarios;

use std::path::Path;

pub use artifacts::{Assertion, Manifest, MANIFEST};
pub use config::{Overrides, Scenario, ScenarioConfig, ENV_PREFIX};
pub use error::{exit, CliError};

use artifacts::{sha256_hex, ArtifactWriter};

/// Load and fully validate the config at `path`.
pub fn validate(path: &Path, overrides: &Overrides) -> Result<ScenarioConfig, CliError> {
    ScenarioConfig::load(path, overrides)
}

/// Run the scenario at `path`, writing its artifacts and manifest. Failed
/// assertions are reported in the manifest, not as errors.
pub fn run(path: &Path, overrides: &Overrides) -> Result<Manifest, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Config(vec!["config is not valid UTF-8".into()]))?;
    let cfg = ScenarioConfig::parse(&text, overrides)?;
    let mut out = ArtifactWriter::create(&cfg.output_dir)?;
    let assertions = scenarios::run(&cfg, &mut out)?;
    let passed = assertions.iter().all(|a| a.passed);
    out.finish(Manifest {
        tool: "everett",
        version: env!("CARGO_PKG_VERSION"),
        scenario: cfg.scenario,
        seed: cfg.seed,
        config_sha256: sha256_hex(&bytes),
        tolerances: cfg.tolerances,
        artifacts: Vec::new(),
        assertions,
        passed,
    })
}
