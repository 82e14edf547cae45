//! Run configuration: one TOML file describing a whole experiment.
//!
//! ```toml
//! output_dir = "runs/x4"        # optional, see resolve_output_dir
//!
//! [scale]
//! tau = 4
//! patch_hr = 64
//!
//! [network]
//! hsi_bands = 31
//! tau = 4
//!
//! [train]
//! epochs = 10                   # every field optional
//!
//! [data]
//! manifest = "data/manifest.json"
//! crf = "data/nikon_d700.txt"   # optional, bundled curve otherwise
//! ```
//!
//! Relative paths are taken from the config file's directory. Unknown
//! keys anywhere are rejected.

use crate::error::{Error, Result};
use crate::net::NetworkConfig;
use crate::types::{ScaleConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable consulted when neither the config file nor a
/// flag names an output directory.
pub const OUTPUT_ROOT_ENV: &str = "HYPERSR_OUTPUT_ROOT";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub manifest: PathBuf,
    /// Camera response curve file; the built-in curve applies when absent.
    pub crf: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scale: ScaleConfig,
    pub network: NetworkConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub data: DataPaths,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Parse without touching the filesystem beyond the file itself.
    pub fn from_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scale.validate()?;
        self.network.validate()?;
        self.train.validate()?;
        if self.scale.tau != self.network.tau {
            return Err(Error::InvalidConfig(format!(
                "scale.tau {} and network.tau {} disagree",
                self.scale.tau, self.network.tau
            )));
        }
        Ok(())
    }

    /// Rebase relative data paths onto `base` and require them to exist.
    pub fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        let rebase = |p: &PathBuf| -> PathBuf {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        self.data.manifest = rebase(&self.data.manifest);
        if !self.data.manifest.exists() {
            return Err(Error::InvalidConfig(format!(
                "data.manifest {} does not exist",
                self.data.manifest.display()
            )));
        }
        if let Some(crf) = &self.data.crf {
            let crf = rebase(crf);
            if !crf.exists() {
                return Err(Error::InvalidConfig(format!(
                    "data.crf {} does not exist",
                    crf.display()
                )));
            }
            self.data.crf = Some(crf);
        }
        if let Some(out) = &self.output_dir {
            self.output_dir = Some(rebase(out));
        }
        Ok(())
    }

    /// Flag > config > `$HYPERSR_OUTPUT_ROOT/<config stem>`.
    pub fn resolve_output_dir(
        &self,
        flag: Option<&Path>,
        config_path: &Path,
    ) -> Result<PathBuf> {
        if let Some(f) = flag {
            return Ok(f.to_path_buf());
        }
        if let Some(out) = &self.output_dir {
            return Ok(out.clone());
        }
        if let Ok(root) = std::env::var(OUTPUT_ROOT_ENV) {
            let stem = config_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".to_string());
            return Ok(PathBuf::from(root).join(stem));
        }
        Err(Error::InvalidConfig(format!(
            "no output directory: pass --out, set output_dir in the config, \
             or export {OUTPUT_ROOT_ENV}"
        )))
    }
}

/// Load, validate, and resolve a run config from disk.
pub fn load_run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = RunConfig::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.resolve_paths(base)?;
    Ok(cfg)
}
