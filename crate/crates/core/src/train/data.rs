//! Training data: in-memory patch pools and the index streams that feed
//! mini-batches. The labeled pool defines epochs; the other pools cycle
//! independently, reshuffling whenever they wrap around.

use crate::error::{Error, Result};
use crate::io::{extract_patches, load_cube, load_rgb, DatasetManifest, PatchPair, Role};
use crate::types::{HsiCube, RgbImage, ScaleConfig};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A shuffled cycle over `0..len`. The generator is a counter-based
/// stream, so its exact position can be captured and restored.
pub struct IndexStream {
    len: usize,
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

/// Serializable snapshot of an [`IndexStream`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamState {
    pub order: Vec<usize>,
    pub pos: usize,
    pub word_pos_hi: u64,
    pub word_pos_lo: u64,
}

impl IndexStream {
    /// `stream` separates the RNG sequences of the different pools built
    /// from one run seed.
    pub fn new(len: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut s = IndexStream {
            len,
            order: (0..len).collect(),
            pos: 0,
            rng,
        };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.pos = 0;
    }

    /// Restart the cycle for a new epoch (labeled pool only).
    pub fn start_epoch(&mut self) {
        self.reshuffle();
    }

    /// Whole batches remaining in the current pass, counting a partial
    /// tail as one batch.
    pub fn remaining_batches(&self, batch: usize) -> usize {
        (self.len - self.pos).div_ceil(batch)
    }

    /// Up to `n` indices without wrapping; empty at end of pass.
    pub fn take_epoch_batch(&mut self, n: usize) -> Vec<usize> {
        let end = (self.pos + n).min(self.len);
        let out = self.order[self.pos..end].to_vec();
        self.pos = end;
        out
    }

    /// Exactly `n` indices, reshuffling and wrapping as needed.
    pub fn take_cycling(&mut self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.pos == self.len {
                self.reshuffle();
            }
            let need = n - out.len();
            let end = (self.pos + need).min(self.len);
            out.extend_from_slice(&self.order[self.pos..end]);
            self.pos = end;
        }
        out
    }

    pub fn state(&self) -> StreamState {
        let wp = self.rng.get_word_pos();
        StreamState {
            order: self.order.clone(),
            pos: self.pos,
            word_pos_hi: (wp >> 64) as u64,
            word_pos_lo: wp as u64,
        }
    }

    pub fn restore(&mut self, state: &StreamState) -> Result<()> {
        if state.order.len() != self.len {
            return Err(Error::MalformedCheckpoint(format!(
                "stream order has {} entries, pool holds {}",
                state.order.len(),
                self.len
            )));
        }
        let mut seen = vec![false; self.len];
        for &i in &state.order {
            if i >= self.len || seen[i] {
                return Err(Error::MalformedCheckpoint(
                    "stream order is not a permutation".into(),
                ));
            }
            seen[i] = true;
        }
        if state.pos > self.len {
            return Err(Error::MalformedCheckpoint(
                "stream position beyond pool size".into(),
            ));
        }
        self.order = state.order.clone();
        self.pos = state.pos;
        self.rng
            .set_word_pos(((state.word_pos_hi as u128) << 64) | state.word_pos_lo as u128);
        Ok(())
    }
}

/// Everything the trainer consumes, already patched and in memory.
pub struct TrainerData {
    pub labeled: Vec<PatchPair<HsiCube>>,
    pub rgb: Vec<PatchPair<RgbImage>>,
    /// Low-resolution inputs only; the high-resolution side of unlabeled
    /// imagery is never shown to the loss.
    pub unlabeled_lr: Vec<HsiCube>,
    /// Whole high-resolution test images with their ids.
    pub test: Vec<(String, HsiCube)>,
}

/// Load every manifest entry, crop train roles into aligned LR/HR patch
/// pairs, and keep test images whole.
pub fn load_training_data(manifest: &DatasetManifest, scale: &ScaleConfig) -> Result<TrainerData> {
    scale.validate()?;
    let mut data = TrainerData {
        labeled: Vec::new(),
        rgb: Vec::new(),
        unlabeled_lr: Vec::new(),
        test: Vec::new(),
    };
    for entry in &manifest.entries {
        let path = manifest.resolve(&entry.hr_cube_path);
        let cube = load_cube(&path)?;
        match entry.role {
            Role::LabeledTrain => {
                data.labeled
                    .extend(extract_patches(&cube, scale.tau, scale.patch_hr, &entry.id)?);
            }
            Role::UnlabeledTrain => {
                let pairs = extract_patches(&cube, scale.tau, scale.patch_hr, &entry.id)?;
                data.unlabeled_lr.extend(pairs.into_iter().map(|p| p.lr));
            }
            Role::Test => data.test.push((entry.id.clone(), cube)),
        }
    }
    for entry in &manifest.rgb_entries {
        let path = manifest.resolve(&entry.hr_rgb_path);
        let img = load_rgb(&path)?;
        data.rgb
            .extend(extract_patches(&img, scale.tau, scale.patch_hr, &entry.id)?);
    }
    Ok(data)
}

/// Deterministic sub-seed for auxiliary RNG consumers (mixing matrices),
/// derived so it never collides with the stream ids.
pub fn aux_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Capture an auxiliary RNG's position.
pub fn rng_word_pos(rng: &ChaCha8Rng) -> (u64, u64) {
    let wp = rng.get_word_pos();
    ((wp >> 64) as u64, wp as u64)
}

pub fn set_rng_word_pos(rng: &mut ChaCha8Rng, hi: u64, lo: u64) {
    rng.set_word_pos(((hi as u128) << 64) | lo as u128);
}

/// Consume the generator enough to confirm restoration logic in tests.
#[allow(dead_code)]
fn advance(rng: &mut ChaCha8Rng, n: usize) {
    for _ in 0..n {
        rng.next_u32();
    }
}
