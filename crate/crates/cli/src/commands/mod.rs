pub mod eval;
pub mod prepare;
pub mod sr;
pub mod train;
pub mod viz;

use hypersr_core::{Error, NetworkConfig};
use std::fs;
use std::path::Path;

pub(crate) fn ensure_dir(p: &Path) -> hypersr_core::Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// A checkpoint is only usable with the architecture it was trained
/// under; name every differing field.
pub(crate) fn check_network(
    stored: &NetworkConfig,
    cfg: &NetworkConfig,
) -> hypersr_core::Result<()> {
    if stored == cfg {
        return Ok(());
    }
    let mut diffs = Vec::new();
    let mut diff = |name: &str, a: usize, b: usize| {
        if a != b {
            diffs.push(format!("{name} {a} vs {b}"));
        }
    };
    diff("tau", stored.tau, cfg.tau);
    diff("hsi_bands", stored.hsi_bands, cfg.hsi_bands);
    diff("group_size", stored.group_size, cfg.group_size);
    diff("overlap", stored.overlap, cfg.overlap);
    diff("feature_width", stored.feature_width, cfg.feature_width);
    diff("ssb_per_stage", stored.ssb_per_stage, cfg.ssb_per_stage);
    Err(Error::InvalidConfig(format!(
        "checkpoint/config mismatch (checkpoint vs config): {}",
        diffs.join(", ")
    )))
}
