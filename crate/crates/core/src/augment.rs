//! Spectral augmentation: mixup of a spectrum with a random convex
//! recombination of its own bands, and 3-band to M-band interpolation.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{HsiCube, Raster, RgbImage};

/// Row-stochastic C x C matrix of uniform draws, row-normalized.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    b: Vec<f32>,
    band_count: usize,
    /// Seed the matrix was derived from, when constructed via [`MixingMatrix::from_seed`].
    pub seed: Option<u64>,
}

impl MixingMatrix {
    pub fn band_count(&self) -> usize {
        self.band_count
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.b[r * self.band_count..(r + 1) * self.band_count]
    }

    pub fn from_seed(band_count: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = make_mixing_matrix(band_count, &mut rng)?;
        m.seed = Some(seed);
        Ok(m)
    }
}

/// Draw a fresh mixing matrix: uniform [0,1) entries, each row divided by its
/// sum. A zero row (possible only in theory) is redrawn.
pub fn make_mixing_matrix(band_count: usize, rng: &mut impl Rng) -> Result<MixingMatrix> {
    if band_count == 0 {
        return Err(Error::InvalidArgument("band_count must be >= 1".into()));
    }
    let mut b = vec![0.0f32; band_count * band_count];
    for r in 0..band_count {
        let row = &mut b[r * band_count..(r + 1) * band_count];
        loop {
            let mut sum = 0.0f64;
            for v in row.iter_mut() {
                *v = rng.random::<f32>();
                sum += *v as f64;
            }
            if sum > 0.0 {
                let inv = (1.0 / sum) as f32;
                for v in row.iter_mut() {
                    *v *= inv;
                }
                break;
            }
        }
    }
    Ok(MixingMatrix {
        b,
        band_count,
        seed: None,
    })
}

fn mix_cube(cube: &HsiCube, alpha: f32, b: &MixingMatrix) -> Result<HsiCube> {
    if cube.bands() != b.band_count {
        return Err(Error::BandMismatch {
            expected: b.band_count,
            got: cube.bands(),
        });
    }
    let (c, h, w) = (cube.bands(), cube.height(), cube.width());
    let plane = h * w;
    let mut out = vec![0.0f32; c * plane];
    for o in 0..c {
        let row = b.row(o);
        let dst = &mut out[o * plane..(o + 1) * plane];
        // y_o = alpha * x_o + (1 - alpha) * sum_i B[o][i] * x_i, accumulated
        // plane by plane.
        for (i, &w_i) in row.iter().enumerate() {
            let coeff = (1.0 - alpha) * w_i + if i == o { alpha } else { 0.0 };
            if coeff == 0.0 {
                continue;
            }
            let src = cube.band(i);
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += coeff * s;
            }
        }
    }
    HsiCube::new(c, h, w, out).map(|k| k.with_band_range(cube.band_range_nm))
}

/// Blend each pixel's spectrum with its own band recombination: per pixel,
/// output = alpha * x + (1 - alpha) * B x, with the same B and alpha applied
/// to both members of the pair so the LR/HR relation survives.
pub fn spectral_mixup(
    lr: &HsiCube,
    hr: &HsiCube,
    alpha: f32,
    b: &MixingMatrix,
) -> Result<(HsiCube, HsiCube)> {
    if lr.bands() != hr.bands() {
        return Err(Error::BandMismatch {
            expected: hr.bands(),
            got: lr.bands(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} must lie in [0, 1]"
        )));
    }
    Ok((mix_cube(lr, alpha, b)?, mix_cube(hr, alpha, b)?))
}

/// Interpolation plan: number of interior bands per interval, ceil-first when
/// the total is odd.
fn interval_counts(m: usize) -> (usize, usize) {
    let interior = m - 3;
    ((interior + 1) / 2, interior / 2)
}

/// Expand a 3-band image to `m` bands in spectral order: first band, interior
/// interpolants, middle band, interior interpolants, last band. Interior band
/// i of an interval with k interiors is (1 - i/(k+1)) * left + i/(k+1) * right.
pub fn spectral_interpolate(rgb: &RgbImage, m: usize) -> Result<HsiCube> {
    if m < 3 {
        return Err(Error::InvalidArgument(format!(
            "target band count {m} must be >= 3"
        )));
    }
    let (h, w) = (rgb.height(), rgb.width());
    let plane = h * w;
    let (k1, k2) = interval_counts(m);
    let mut data = Vec::with_capacity(m * plane);

    let mut push_interval = |left: usize, right: usize, k: usize| {
        data.extend_from_slice(rgb.band(left));
        for i in 1..=k {
            let t = i as f32 / (k + 1) as f32;
            let (l, r) = (rgb.band(left), rgb.band(right));
            for p in 0..plane {
                data.push((1.0 - t) * l[p] + t * r[p]);
            }
        }
    };
    push_interval(0, 1, k1);
    push_interval(1, 2, k2);
    data.extend_from_slice(rgb.band(2));
    HsiCube::new(m, h, w, data)
}
