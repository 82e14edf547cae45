//! Dataset manifests: a JSON file naming the HR cubes (with their train/test
//! roles) and the auxiliary HR RGB images of one dataset.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    LabeledTrain,
    UnlabeledTrain,
    Test,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::LabeledTrain => "labeled_train",
            Role::UnlabeledTrain => "unlabeled_train",
            Role::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeEntry {
    pub id: String,
    pub hr_cube_path: String,
    pub role: Role,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RgbEntry {
    pub id: String,
    pub hr_rgb_path: String,
}

/// The split of one dataset. Paths are stored relative to `root`; `root`
/// itself, when relative, is resolved against the manifest file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub root: String,
    pub entries: Vec<CubeEntry>,
    #[serde(default)]
    pub rgb_entries: Vec<RgbEntry>,
    /// Filled at load time; not serialized.
    #[serde(skip)]
    resolved_root: PathBuf,
}

impl DatasetManifest {
    pub fn new(root: impl Into<String>) -> Self {
        let root = root.into();
        DatasetManifest {
            resolved_root: PathBuf::from(&root),
            root,
            entries: Vec::new(),
            rgb_entries: Vec::new(),
        }
    }

    /// Absolute (or caller-relative) path of an entry's raster.
    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.resolved_root.join(rel)
    }

    pub fn entries_with_role(&self, role: Role) -> impl Iterator<Item = &CubeEntry> {
        self.entries.iter().filter(move |e| e.role == role)
    }

    fn validate(&self, manifest_path: &Path) -> Result<()> {
        let mut ids = HashSet::new();
        let dup = self
            .entries
            .iter()
            .map(|e| &e.id)
            .chain(self.rgb_entries.iter().map(|e| &e.id))
            .find(|id| !ids.insert(id.as_str()));
        if let Some(id) = dup {
            return Err(Error::MalformedManifest {
                path: manifest_path.to_path_buf(),
                reason: format!("duplicate id {id:?}"),
            });
        }
        for e in &self.entries {
            // .hsr pairs live on disk as .hdr + .raw; check the header file.
            let p = self.resolve(&e.hr_cube_path);
            let probe = match p.extension().and_then(|x| x.to_str()) {
                Some("hsr" | "raw") => p.with_extension("hdr"),
                Some(_) => p.clone(),
                None => p.with_extension("hdr"),
            };
            if !probe.exists() {
                return Err(Error::MalformedManifest {
                    path: manifest_path.to_path_buf(),
                    reason: format!("entry {:?}: missing file {}", e.id, probe.display()),
                });
            }
        }
        for e in &self.rgb_entries {
            let p = self.resolve(&e.hr_rgb_path);
            let probe = match p.extension().and_then(|x| x.to_str()) {
                None | Some("hsr" | "raw") => p.with_extension("hdr"),
                Some(_) => p.clone(),
            };
            if !probe.exists() {
                return Err(Error::MalformedManifest {
                    path: manifest_path.to_path_buf(),
                    reason: format!("rgb entry {:?}: missing file {}", e.id, probe.display()),
                });
            }
        }
        Ok(())
    }
}

/// Parse and validate a manifest: ids unique, every referenced file present.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::MalformedManifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    let root = PathBuf::from(&manifest.root);
    manifest.resolved_root = if root.is_absolute() {
        root
    } else {
        path.parent().unwrap_or(Path::new(".")).join(root)
    };
    manifest.validate(path)?;
    Ok(manifest)
}

pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
