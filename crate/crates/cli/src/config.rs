//! File form of a run invocation.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use qgp_core::controller::ControllerConfig;
use qgp_core::policy::PolicySpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out: PathBuf,
    #[serde(default = "one")]
    pub jobs: usize,
    pub controller: ControllerConfig,
    pub policy: PolicySpec,
}

fn one() -> usize {
    1
}

fn absolute(path: &Path) -> Result<PathBuf> {
    if path.is_absolute() {
        Ok(path.to_path_buf())
    } else {
        Ok(std::env::current_dir()
            .context("cannot read the working directory")?
            .join(path))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid run config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs serialize")
    }

    /// Makes every path absolute and checks the component settings.
    pub fn resolve(mut self) -> Result<Self> {
        self.manifest = absolute(&self.manifest)?;
        self.out = absolute(&self.out)?;
        if self.jobs == 0 {
            anyhow::bail!("jobs must be at least 1");
        }
        self.controller.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qgp_core::controller::AblationFlags;

    #[test]
    fn round_trips_through_toml() {
        let configs = [
            RunConfig {
                manifest: "/data/reposcan.json".into(),
                out: "/runs/a.jsonl".into(),
                jobs: 8,
                controller: ControllerConfig::ablation(AblationFlags::DedupePlusPageNoBuffer),
                policy: PolicySpec::FalseCompleter {
                    stop_step: 3,
                    claim_count: Some(12),
                },
            },
            RunConfig {
                manifest: "m.json".into(),
                out: "o.jsonl".into(),
                jobs: 1,
                controller: ControllerConfig::unit_qgp(4),
                policy: PolicySpec::External {
                    command: "python3 agent.py".into(),
                    timeout_ms: 500,
                },
            },
        ];
        for c in configs {
            let text = c.to_toml();
            assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), c, "{text}");
        }
    }
}
