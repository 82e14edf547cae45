//! Checkpoint directory layout:
//!
//! ```text
//! <dir>/manifest.json   configs, progress counters, RNG state, tensor index
//! <dir>/params.bin      every parameter tensor, flat little-endian f32
//! <dir>/optim.bin       optimizer first and second moments, same layout
//! ```
//!
//! Writes land in a temp directory first and are renamed into place, so a
//! crash never leaves a half-written checkpoint under the target name.

use crate::crf::CrfMatrix;
use crate::error::{Error, Result};
use crate::net::{Model, NetworkConfig};
use crate::train::data::TrainerData;
use crate::train::trainer::{Trainer, TrainerState};
use crate::types::TrainConfig;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::process;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";
pub const OPTIM_FILE: &str = "optim.bin";

/// Index entry for one tensor inside `params.bin`. Offsets and lengths
/// count f32 elements, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 3],
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub state: TrainerState,
    pub adam_steps: Vec<u64>,
    pub tensors: Vec<TensorRecord>,
}

pub fn save_checkpoint(dir: impl AsRef<Path>, trainer: &Trainer) -> Result<()> {
    let dir = dir.as_ref();
    let model = &trainer.model;

    let mut tensors = Vec::with_capacity(model.params.len());
    let mut offset = 0;
    for (name, t) in model.params.iter() {
        tensors.push(TensorRecord {
            name: name.to_string(),
            shape: t.shape(),
            offset,
            len: t.numel(),
        });
        offset += t.numel();
    }
    let (optim_flat, adam_steps) = trainer.adam().to_flat();
    let manifest = CheckpointManifest {
        network: model.config,
        train: trainer.train.clone(),
        state: trainer.state(),
        adam_steps,
        tensors,
    };

    let tmp = temp_sibling(dir);
    fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let write = |name: &str, bytes: &[u8]| -> Result<()> {
        let p = tmp.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    write(MANIFEST_FILE, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    write(PARAMS_FILE, &to_le_bytes(&model.params.to_flat()))?;
    write(OPTIM_FILE, &to_le_bytes(&optim_flat))?;

    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

/// Load just the network and its weights, for inference and evaluation.
pub fn load_model(dir: impl AsRef<Path>) -> Result<(Model<f32>, CheckpointManifest)> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let mut model: Model<f32> = Model::init(manifest.network, manifest.train.seed)?;
    validate_index(&manifest, &model)?;
    let params_flat = read_blob(&dir.join(PARAMS_FILE))?;
    check_blob_len(&manifest, params_flat.len(), model.params.flat_len(), PARAMS_FILE)?;
    model.params.load_flat(&params_flat)?;
    Ok((model, manifest))
}

/// Rebuild a trainer from a checkpoint plus the (re-loaded) dataset.
/// Training resumes exactly where `save_checkpoint` left off.
pub fn load_checkpoint(
    dir: impl AsRef<Path>,
    data: TrainerData,
    crf: CrfMatrix,
) -> Result<Trainer> {
    let dir = dir.as_ref();
    let (model, manifest) = load_model(dir)?;
    let optim_flat = read_blob(&dir.join(OPTIM_FILE))?;
    let mut trainer = Trainer::new(model, data, manifest.train.clone(), crf)?;
    trainer.adam_mut().load_flat(&optim_flat, &manifest.adam_steps)?;
    trainer.restore_state(&manifest.state)?;
    Ok(trainer)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<CheckpointManifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn temp_sibling(dir: &Path) -> PathBuf {
    let name = dir.file_name().map(|s| s.to_string_lossy()).unwrap_or_default();
    dir.with_file_name(format!(".{name}.tmp-{}", process::id()))
}

fn to_le_bytes(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_blob(path: &Path) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::MalformedCheckpoint(format!(
            "{} holds {} bytes, not a whole number of f32 values",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// The stored tensor index must describe exactly the parameter set the
/// configured architecture produces.
fn validate_index(manifest: &CheckpointManifest, model: &Model<f32>) -> Result<()> {
    let expected: Vec<TensorRecord> = {
        let mut v = Vec::new();
        let mut offset = 0;
        for (name, t) in model.params.iter() {
            v.push(TensorRecord {
                name: name.to_string(),
                shape: t.shape(),
                offset,
                len: t.numel(),
            });
            offset += t.numel();
        }
        v
    };
    if manifest.tensors.len() != expected.len() {
        return Err(Error::MalformedCheckpoint(format!(
            "tensor index has {} entries, architecture defines {}",
            manifest.tensors.len(),
            expected.len()
        )));
    }
    for (got, want) in manifest.tensors.iter().zip(&expected) {
        if got != want {
            return Err(Error::MalformedCheckpoint(format!(
                "tensor {} stored as shape {:?} at offset {} (len {}), architecture expects \
                 {} with shape {:?} at offset {} (len {})",
                got.name,
                got.shape,
                got.offset,
                got.len,
                want.name,
                want.shape,
                want.offset,
                want.len
            )));
        }
    }
    Ok(())
}

/// On a short or long blob, name the first tensor whose data is missing.
fn check_blob_len(
    manifest: &CheckpointManifest,
    got: usize,
    expected: usize,
    file: &str,
) -> Result<()> {
    if got == expected {
        return Ok(());
    }
    let culprit = manifest
        .tensors
        .iter()
        .find(|t| t.offset + t.len > got)
        .map(|t| t.name.clone());
    Err(match culprit {
        Some(name) => Error::MalformedCheckpoint(format!(
            "{file} holds {got} values instead of {expected}; tensor {name} is truncated"
        )),
        None => Error::MalformedCheckpoint(format!(
            "{file} holds {got} values instead of {expected}"
        )),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::default_crf;
    use crate::io::extract_patches;
    use crate::train::trainer::LogRecord;
    use crate::types::{BatchCounts, HsiCube};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_cube(bands: usize, h: usize, w: usize, seed: u64) -> HsiCube {
        let mut rng = StdRng::seed_from_u64(seed);
        let data = (0..bands * h * w).map(|_| rng.random::<f32>()).collect();
        HsiCube::new(bands, h, w, data).unwrap()
    }

    fn tiny_net() -> NetworkConfig {
        NetworkConfig {
            hsi_bands: 5,
            tau: 2,
            group_size: 3,
            overlap: 1,
            feature_width: 4,
            ssb_per_stage: 1,
        }
    }

    fn tiny_data(bands: usize) -> TrainerData {
        let mut labeled = Vec::new();
        for s in 0..2 {
            let cube = random_cube(bands, 16, 16, 100 + s);
            labeled.extend(extract_patches(&cube, 2, 8, "lab").unwrap());
        }
        TrainerData {
            labeled,
            rgb: Vec::new(),
            unlabeled_lr: vec![random_cube(bands, 4, 4, 9)],
            test: Vec::new(),
        }
    }

    fn tiny_train() -> TrainConfig {
        TrainConfig {
            lr_initial: 1e-3,
            lr_decay: 0.3,
            lr_decay_every_epochs: 3,
            epochs: 4,
            batch_size: Some(2),
            batches_per_iter: BatchCounts {
                hsi: 1,
                rgb: 0,
                mixup: 1,
                ssl: 1,
            },
            alpha_mixup: 0.4,
            seed: 21,
        }
    }

    fn tiny_trainer() -> Trainer {
        let model = Model::<f32>::init(tiny_net(), 3).unwrap();
        let centers = random_cube(5, 1, 1, 0).band_centers_nm();
        let crf = default_crf(&centers).unwrap();
        Trainer::new(model, tiny_data(5), tiny_train(), crf).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("ckpt");
        let mut t = tiny_trainer();
        t.train_epoch(&mut |_| {}).unwrap();
        save_checkpoint(&ckpt, &t).unwrap();

        let centers = random_cube(5, 1, 1, 0).band_centers_nm();
        let crf = default_crf(&centers).unwrap();
        let u = load_checkpoint(&ckpt, tiny_data(5), crf).unwrap();

        assert_eq!(t.model.params.to_flat(), u.model.params.to_flat());
        assert_eq!(t.adam().to_flat(), u.adam().to_flat());
        assert_eq!(t.state(), u.state());
    }

    #[test]
    fn resumed_training_matches_uninterrupted_training() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("ckpt");

        let mut straight = tiny_trainer();
        let mut records_straight = Vec::new();
        for _ in 0..4 {
            straight
                .train_epoch(&mut |r: &LogRecord| records_straight.push(r.clone()))
                .unwrap();
        }

        let mut first = tiny_trainer();
        for _ in 0..2 {
            first.train_epoch(&mut |_| {}).unwrap();
        }
        save_checkpoint(&ckpt, &first).unwrap();
        drop(first);

        let centers = random_cube(5, 1, 1, 0).band_centers_nm();
        let crf = default_crf(&centers).unwrap();
        let mut resumed = load_checkpoint(&ckpt, tiny_data(5), crf).unwrap();
        assert_eq!(resumed.epoch(), 2);
        let mut records_resumed = Vec::new();
        for _ in 0..2 {
            resumed
                .train_epoch(&mut |r: &LogRecord| records_resumed.push(r.clone()))
                .unwrap();
        }

        let tail = &records_straight[records_straight.len() - records_resumed.len()..];
        assert_eq!(tail.len(), records_resumed.len());
        for (a, b) in tail.iter().zip(&records_resumed) {
            assert_eq!(a, b);
        }
        assert_eq!(
            straight.model.params.to_flat(),
            resumed.model.params.to_flat()
        );
    }

    #[test]
    fn save_replaces_an_existing_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("ckpt");
        let mut t = tiny_trainer();
        save_checkpoint(&ckpt, &t).unwrap();
        let first = read_manifest(&ckpt).unwrap();
        t.train_epoch(&mut |_| {}).unwrap();
        save_checkpoint(&ckpt, &t).unwrap();
        let second = read_manifest(&ckpt).unwrap();
        assert_eq!(first.state.epoch, 0);
        assert_eq!(second.state.epoch, 1);
    }

    #[test]
    fn truncated_blob_names_the_missing_tensor() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("ckpt");
        let t = tiny_trainer();
        save_checkpoint(&ckpt, &t).unwrap();

        let blob = ckpt.join(PARAMS_FILE);
        let bytes = std::fs::read(&blob).unwrap();
        std::fs::write(&blob, &bytes[..bytes.len() - 8]).unwrap();

        let centers = random_cube(5, 1, 1, 0).band_centers_nm();
        let crf = default_crf(&centers).unwrap();
        let err = load_checkpoint(&ckpt, tiny_data(5), crf).err().expect("load should fail");
        let msg = err.to_string();
        let last = t.model.params.iter().last().unwrap().0.to_string();
        assert!(msg.contains(&last), "error should name the tensor: {msg}");
    }

    #[test]
    fn architecture_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("ckpt");
        let t = tiny_trainer();
        save_checkpoint(&ckpt, &t).unwrap();

        let path = ckpt.join(MANIFEST_FILE);
        let mut manifest: CheckpointManifest =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        manifest.network.feature_width = 8;
        std::fs::write(&path, serde_json::to_string(&manifest).unwrap()).unwrap();

        let centers = random_cube(5, 1, 1, 0).band_centers_nm();
        let crf = default_crf(&centers).unwrap();
        let err = load_checkpoint(&ckpt, tiny_data(5), crf).err().expect("load should fail");
        assert!(matches!(err, Error::MalformedCheckpoint(_)), "{err}");
    }

    #[test]
    fn unreadable_bytes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("ckpt");
        let t = tiny_trainer();
        save_checkpoint(&ckpt, &t).unwrap();
        let blob = ckpt.join(OPTIM_FILE);
        let mut bytes = std::fs::read(&blob).unwrap();
        bytes.push(0);
        std::fs::write(&blob, &bytes).unwrap();

        let centers = random_cube(5, 1, 1, 0).band_centers_nm();
        let crf = default_crf(&centers).unwrap();
        assert!(load_checkpoint(&ckpt, tiny_data(5), crf).is_err());
    }
}
