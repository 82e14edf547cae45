//! Shared data model: spectral rasters, scale/grouping/training configuration,
//! and their validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rank-3 spectral raster in band-major layout `(band, row, col)`.
///
/// Ingested data is normalized to `[0, 1]`; intermediate network outputs may
/// leave that range until clamped at a consumer boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    data: Vec<f32>,
    bands: usize,
    height: usize,
    width: usize,
    pub band_range_nm: Option<(f32, f32)>,
}

/// 3-band raster in `[0, 1]`, same band-major layout as [`HsiCube`].
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    data: Vec<f32>,
    height: usize,
    width: usize,
}

/// Common access surface for [`HsiCube`] and [`RgbImage`], so spatial
/// operators (resampling, patching) can stay generic over the two.
pub trait Raster: Sized + Clone {
    fn bands(&self) -> usize;
    fn height(&self) -> usize;
    fn width(&self) -> usize;
    fn data(&self) -> &[f32];
    fn data_mut(&mut self) -> &mut [f32];
    /// Build a raster of the same kind as `like`, with new contents.
    fn from_parts(like: &Self, bands: usize, height: usize, width: usize, data: Vec<f32>)
        -> Result<Self>;

    fn pixel_count(&self) -> usize {
        self.height() * self.width()
    }

    fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.data()[(band * self.height() + row) * self.width() + col]
    }

    /// Contiguous view of one band, row-major.
    fn band(&self, band: usize) -> &[f32] {
        let plane = self.height() * self.width();
        &self.data()[band * plane..(band + 1) * plane]
    }

    fn clamp_01(&mut self) {
        for v in self.data_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

impl HsiCube {
    pub fn new(bands: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if bands == 0 {
            return Err(Error::InvalidArgument("band_count must be >= 1".into()));
        }
        if data.len() != bands * height * width {
            return Err(Error::ShapeMismatch(format!(
                "cube payload has {} values, expected {}x{}x{} = {}",
                data.len(),
                bands,
                height,
                width,
                bands * height * width
            )));
        }
        Ok(HsiCube {
            data,
            bands,
            height,
            width,
            band_range_nm: None,
        })
    }

    pub fn zeros(bands: usize, height: usize, width: usize) -> Self {
        HsiCube {
            data: vec![0.0; bands * height * width],
            bands,
            height,
            width,
            band_range_nm: None,
        }
    }

    pub fn with_band_range(mut self, range: Option<(f32, f32)>) -> Self {
        self.band_range_nm = range;
        self
    }

    pub fn from_fn(
        bands: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(bands * height * width);
        for b in 0..bands {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(b, r, c));
                }
            }
        }
        HsiCube {
            data,
            bands,
            height,
            width,
            band_range_nm: None,
        }
    }

    pub fn set(&mut self, band: usize, row: usize, col: usize, value: f32) {
        let idx = (band * self.height + row) * self.width + col;
        self.data[idx] = value;
    }

    /// Spectrum at one pixel, in band order.
    pub fn spectrum(&self, row: usize, col: usize) -> Vec<f32> {
        let plane = self.height * self.width;
        let off = row * self.width + col;
        (0..self.bands).map(|b| self.data[b * plane + off]).collect()
    }

    /// Wavelength centers, assuming bands are evenly spaced over
    /// `band_range_nm` (defaults to the 400-700 nm convention).
    pub fn band_centers_nm(&self) -> Vec<f32> {
        let (start, end) = self.band_range_nm.unwrap_or((400.0, 700.0));
        if self.bands == 1 {
            return vec![(start + end) * 0.5];
        }
        let step = (end - start) / (self.bands as f32 - 1.0);
        (0..self.bands).map(|b| start + step * b as f32).collect()
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

impl Raster for HsiCube {
    fn bands(&self) -> usize {
        self.bands
    }
    fn height(&self) -> usize {
        self.height
    }
    fn width(&self) -> usize {
        self.width
    }
    fn data(&self) -> &[f32] {
        &self.data
    }
    fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
    fn from_parts(
        like: &Self,
        bands: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        let cube = HsiCube::new(bands, height, width, data)?;
        Ok(cube.with_band_range(like.band_range_nm))
    }
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 3 * height * width {
            return Err(Error::ShapeMismatch(format!(
                "rgb payload has {} values, expected 3x{}x{} = {}",
                data.len(),
                height,
                width,
                3 * height * width
            )));
        }
        Ok(RgbImage {
            data,
            height,
            width,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        RgbImage {
            data: vec![0.0; 3 * height * width],
            height,
            width,
        }
    }

    pub fn set(&mut self, band: usize, row: usize, col: usize, value: f32) {
        let idx = (band * self.height + row) * self.width + col;
        self.data[idx] = value;
    }

    /// View the image as a 3-band cube (copies the payload).
    pub fn to_cube(&self) -> HsiCube {
        HsiCube {
            data: self.data.clone(),
            bands: 3,
            height: self.height,
            width: self.width,
            band_range_nm: None,
        }
    }

    /// Reinterpret a 3-band cube as an RGB image.
    pub fn from_cube(cube: &HsiCube) -> Result<Self> {
        if cube.bands != 3 {
            return Err(Error::BandMismatch {
                expected: 3,
                got: cube.bands,
            });
        }
        Ok(RgbImage {
            data: cube.data.clone(),
            height: cube.height,
            width: cube.width,
        })
    }
}

impl Raster for RgbImage {
    fn bands(&self) -> usize {
        3
    }
    fn height(&self) -> usize {
        self.height
    }
    fn width(&self) -> usize {
        self.width
    }
    fn data(&self) -> &[f32] {
        &self.data
    }
    fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
    fn from_parts(
        _like: &Self,
        bands: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if bands != 3 {
            return Err(Error::BandMismatch {
                expected: 3,
                got: bands,
            });
        }
        RgbImage::new(height, width, data)
    }
}

/// One invariant violation found by [`validate_cube`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite { band: usize, row: usize, col: usize },
    OutOfRange { band: usize, row: usize, col: usize, value: f32 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NonFinite { band, row, col } => {
                write!(f, "non-finite value at ({band},{row},{col})")
            }
            Violation::OutOfRange { band, row, col, value } => {
                write!(f, "value {value} out of [0,1] at ({band},{row},{col})")
            }
        }
    }
}

/// Check the ingestion invariants (finite, in `[0, 1]`). Violations are
/// returned, not thrown; an empty list means the cube is valid.
pub fn validate_cube(cube: &HsiCube) -> Vec<Violation> {
    let mut out = Vec::new();
    let (h, w) = (cube.height(), cube.width());
    for (i, &v) in cube.data().iter().enumerate() {
        let band = i / (h * w);
        let rem = i % (h * w);
        let (row, col) = (rem / w, rem % w);
        if !v.is_finite() {
            out.push(Violation::NonFinite { band, row, col });
        } else if !(0.0..=1.0).contains(&v) {
            out.push(Violation::OutOfRange { band, row, col, value: v });
        }
    }
    out
}

/// Scale factor and the matching HR patch edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    pub tau: usize,
    pub patch_hr: usize,
}

impl ScaleConfig {
    pub fn new(tau: usize, patch_hr: usize) -> Result<Self> {
        let cfg = ScaleConfig { tau, patch_hr };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Conventional patch edge per scale: 64 for x4 (and x2), 128 for x8.
    pub fn for_tau(tau: usize) -> Result<Self> {
        let patch_hr = if tau == 8 { 128 } else { 64 };
        ScaleConfig::new(tau, patch_hr)
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.tau, 2 | 4 | 8) {
            return Err(Error::InvalidConfig(format!(
                "scale factor must be one of {{2, 4, 8}}, got {}",
                self.tau
            )));
        }
        if self.patch_hr == 0 || self.patch_hr % self.tau != 0 {
            return Err(Error::InvalidConfig(format!(
                "patch_hr {} must be a positive multiple of tau {}",
                self.patch_hr, self.tau
            )));
        }
        Ok(())
    }
}

/// Band grouping: overlapping windows of `group_size` bands, tail-aligned so
/// the last window ends exactly at band `band_count - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPlan {
    pub band_count: usize,
    pub group_size: usize,
    pub stride: usize,
    pub starts: Vec<usize>,
}

impl GroupPlan {
    /// Band ranges of all groups, in order.
    pub fn groups(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        let m = self.group_size;
        self.starts.iter().map(move |&s| s..s + m)
    }

    /// How many groups cover each band. Every entry is >= 1 by construction.
    pub fn coverage(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.band_count];
        for g in self.groups() {
            for b in g {
                counts[b] += 1;
            }
        }
        counts
    }
}

/// Divide `band_count` bands into overlapping groups of `group_size` with the
/// given overlap between neighbors. The final group is clamped (not padded) so
/// it ends at the last band.
pub fn make_group_plan(band_count: usize, group_size: usize, overlap: usize) -> Result<GroupPlan> {
    if group_size == 0 || group_size > band_count {
        return Err(Error::InvalidArgument(format!(
            "group_size {group_size} must be in [1, band_count={band_count}]"
        )));
    }
    if overlap >= group_size {
        return Err(Error::InvalidArgument(format!(
            "overlap {overlap} must be smaller than group_size {group_size}"
        )));
    }
    let stride = group_size - overlap;
    let mut starts = Vec::new();
    let mut s = 0usize;
    loop {
        if s + group_size >= band_count {
            starts.push(band_count - group_size);
            break;
        }
        starts.push(s);
        s += stride;
    }
    Ok(GroupPlan {
        band_count,
        group_size,
        stride,
        starts,
    })
}

/// Mini-batch counts per training iteration for the four loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchCounts {
    pub hsi: usize,
    pub rgb: usize,
    pub mixup: usize,
    pub ssl: usize,
}

impl Default for BatchCounts {
    fn default() -> Self {
        BatchCounts {
            hsi: 1,
            rgb: 3,
            mixup: 2,
            ssl: 3,
        }
    }
}

/// Optimization schedule and augmentation knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr_initial: f64,
    pub lr_decay: f64,
    pub lr_decay_every_epochs: usize,
    pub epochs: usize,
    /// When unset, 16 is used, or 8 when the SSL term is active.
    pub batch_size: Option<usize>,
    pub batches_per_iter: BatchCounts,
    pub alpha_mixup: f32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_initial: 1e-4,
            lr_decay: 0.3,
            lr_decay_every_epochs: 3,
            epochs: 10,
            batch_size: None,
            batches_per_iter: BatchCounts::default(),
            alpha_mixup: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batches_per_iter.hsi < 1 {
            return Err(Error::InvalidConfig(
                "batches_per_iter.hsi must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha_mixup) {
            return Err(Error::InvalidConfig(format!(
                "alpha_mixup {} must lie in [0, 1]",
                self.alpha_mixup
            )));
        }
        if self.lr_initial <= 0.0 || self.lr_decay <= 0.0 {
            return Err(Error::InvalidConfig(
                "learning rate and decay must be positive".into(),
            ));
        }
        if self.lr_decay_every_epochs == 0 {
            return Err(Error::InvalidConfig(
                "lr_decay_every_epochs must be >= 1".into(),
            ));
        }
        if let Some(b) = self.batch_size {
            if b == 0 {
                return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// 16, or 8 when the SSL term is active, unless overridden.
    pub fn effective_batch_size(&self) -> usize {
        self.batch_size
            .unwrap_or(if self.batches_per_iter.ssl > 0 { 8 } else { 16 })
    }

    /// Step-decayed learning rate for a 0-based epoch index.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        self.lr_initial * self.lr_decay.powi((epoch / self.lr_decay_every_epochs) as i32)
    }
}
