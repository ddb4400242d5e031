//! Run configuration: a TOML file with a mandatory seed and an optional
//! scenario block mirroring the library types. Unknown keys are hard
//! errors; a silent typo in a process parameter would invalidate a run.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use jjfab_core::variability::ProcessScenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Parsed run configuration.
///
/// The top-level `seed` is mandatory and overrides `scenario.rng_seed`:
/// every simulation run states its entropy source explicitly. The
/// scenario block and all nested blocks fall back to the stock wafer
/// scenario. Note that the default designs are dosed for the stock
/// stage tilts; configs that change an electrode angle should also list
/// their designs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub scenario: ProcessScenario,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, String> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| format!("config {origin}: {e}"))?;
        cfg.scenario.rng_seed = cfg.seed;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }
}
