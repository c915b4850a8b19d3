//! Run configuration shared by all subcommands, loaded from TOML.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use egotraj::energy::EnergyCoefficients;
use egotraj::infill::WindowConfig;
use egotraj::metrics::AlignmentWindowConfig;
use egotraj::optim::OptimizerConfig;
use egotraj::synth::SceneConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfillSection {
    pub method: String,
    pub window: WindowConfig,
}

impl Default for InfillSection {
    fn default() -> Self {
        Self {
            method: "linear".into(),
            window: WindowConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub generate: SceneConfig,
    pub infill: InfillSection,
    pub energy: EnergyCoefficients,
    pub optimizer: OptimizerConfig,
    pub metrics: AlignmentWindowConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn sections_override_single_fields() {
        let c: RunConfig = toml::from_str(
            "[optimizer]\niterations = 20\n[energy]\nlambda_cam = 5.0\n[generate]\npatterns = [\"circle\"]\nframes = 90\n",
        )
        .unwrap();
        assert_eq!(c.optimizer.iterations, 20);
        assert_eq!(c.optimizer.learning_rate, 1e-3);
        assert_eq!(c.energy.lambda_cam, 5.0);
        assert_eq!(c.energy.lambda_traj, 1e5);
        assert_eq!(c.generate.frames, 90);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[optimizer]\niters = 3\n").is_err());
    }
}
