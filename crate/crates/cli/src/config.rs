use std::path::{Path, PathBuf};

use airmia::harness::{Scenario, ScenarioConfig};
use serde::{Deserialize, Serialize};

/// Config file: one scenario configuration plus where and how often to run it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_experiment")]
    pub experiment: ScenarioConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_experiment() -> ScenarioConfig {
    ScenarioConfig::new(Scenario::FullStrong, 1)
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            out: None,
            seeds: default_seeds(),
            experiment: default_experiment(),
        }
    }
}

impl CliConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: CliConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.experiment.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(CliConfig::from_json("{}").unwrap(), CliConfig::default());
    }

    #[test]
    fn unknown_keys_rejected_at_every_level() {
        assert!(CliConfig::from_json(r#"{"outdir": "x"}"#).is_err());
        let nested = r#"{"experiment": {"scenario": "same-power", "seed": 3, "epochs": 5}}"#;
        assert!(CliConfig::from_json(nested).is_err());
    }

    #[test]
    fn invalid_experiment_rejected() {
        let odd = r#"{"experiment": {"scenario": "full-strong", "seed": 1, "counts": {"provider_train": 7, "surrogate_train": 10, "provider_test": 10, "member_eval": 2, "nonmember_eval": 2}}}"#;
        assert!(CliConfig::from_json(odd).unwrap_err().contains("provider_train"));
    }

    #[test]
    fn shipped_default_matches_built_in() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
        let shipped = CliConfig::load(&path).unwrap();
        assert_eq!(shipped.experiment, default_experiment());
        assert_eq!(shipped.seeds, default_seeds());
    }
}
