//! Camera response functions: sampled R/G/B sensitivity curves resampled at
//! a cube's band centers, and the resulting linear projection to RGB.

use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{HsiCube, Raster, RgbImage};

/// A smooth single-lobe-per-channel response table bundled for use when no
/// measured camera table is supplied.
pub const DEFAULT_CRF_TEXT: &str = include_str!("../assets/crf_default.txt");
pub const DEFAULT_CRF_NAME: &str = "bundled-default";

/// Row-stochastic 3 x C projection derived from a response-curve table.
#[derive(Debug, Clone)]
pub struct CrfMatrix {
    f: Vec<f32>,
    pub band_centers_nm: Vec<f32>,
    pub camera_name: String,
}

impl CrfMatrix {
    pub fn band_count(&self) -> usize {
        self.band_centers_nm.len()
    }

    /// Sensitivity row for channel 0..3, length C, summing to 1.
    pub fn row(&self, channel: usize) -> &[f32] {
        let c = self.band_count();
        &self.f[channel * c..(channel + 1) * c]
    }

    /// All three rows as one (3 x C) row-major slice.
    pub fn weights(&self) -> &[f32] {
        &self.f
    }
}

struct CurveTable {
    wavelengths: Vec<f32>,
    /// Rows aligned with `wavelengths`: [r, g, b] per sample.
    rgb: Vec<[f32; 3]>,
}

fn parse_curve_table(text: &str, origin: &str) -> Result<CurveTable> {
    let mut wavelengths = Vec::new();
    let mut rgb = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f32> = line
            .split_whitespace()
            .map(|t| t.parse::<f32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                Error::InvalidArgument(format!(
                    "{origin}: line {}: expected `wavelength r g b`, got {line:?}",
                    lineno + 1
                ))
            })?;
        if vals.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "{origin}: line {}: expected 4 columns, got {}",
                lineno + 1,
                vals.len()
            )));
        }
        if vals[1..].iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{origin}: line {}: negative sensitivity",
                lineno + 1
            )));
        }
        if let Some(&prev) = wavelengths.last() {
            if vals[0] <= prev {
                return Err(Error::InvalidArgument(format!(
                    "{origin}: wavelengths must be strictly increasing ({prev} then {})",
                    vals[0]
                )));
            }
        }
        wavelengths.push(vals[0]);
        rgb.push([vals[1], vals[2], vals[3]]);
    }
    if wavelengths.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{origin}: need at least two curve samples"
        )));
    }
    Ok(CurveTable { wavelengths, rgb })
}

fn sample_curve(table: &CurveTable, lambda: f32, channel: usize) -> f32 {
    // Caller guarantees lambda is inside the table's support.
    let i = match table
        .wavelengths
        .iter()
        .position(|&w| w >= lambda)
    {
        Some(0) => return table.rgb[0][channel],
        Some(i) => i,
        None => unreachable!("lambda checked against support"),
    };
    let (w0, w1) = (table.wavelengths[i - 1], table.wavelengths[i]);
    let t = (lambda - w0) / (w1 - w0);
    (1.0 - t) * table.rgb[i - 1][channel] + t * table.rgb[i][channel]
}

fn build_matrix(table: &CurveTable, band_centers_nm: &[f32], name: &str) -> Result<CrfMatrix> {
    let (lo, hi) = (
        table.wavelengths[0],
        *table.wavelengths.last().unwrap(),
    );
    let outside: Vec<f32> = band_centers_nm
        .iter()
        .copied()
        .filter(|&l| l < lo || l > hi)
        .collect();
    if !outside.is_empty() {
        return Err(Error::UnsupportedWavelengths(outside));
    }
    let c = band_centers_nm.len();
    let mut f = vec![0.0f32; 3 * c];
    for ch in 0..3 {
        let row = &mut f[ch * c..(ch + 1) * c];
        for (i, &lambda) in band_centers_nm.iter().enumerate() {
            row[i] = sample_curve(table, lambda, ch);
        }
        let sum: f64 = row.iter().map(|&v| v as f64).sum();
        if sum <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "channel {ch} response is zero across all requested band centers"
            )));
        }
        let inv = (1.0 / sum) as f32;
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
    Ok(CrfMatrix {
        f,
        band_centers_nm: band_centers_nm.to_vec(),
        camera_name: name.to_string(),
    })
}

/// Load a curve table and resample it at the given band centers. Any band
/// center outside the table's wavelength support is an error.
pub fn load_crf(path: impl AsRef<Path>, band_centers_nm: &[f32]) -> Result<CrfMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table = parse_curve_table(&text, &path.display().to_string())?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("crf")
        .to_string();
    build_matrix(&table, band_centers_nm, &name)
}

/// The bundled table resampled at the given band centers.
pub fn default_crf(band_centers_nm: &[f32]) -> Result<CrfMatrix> {
    let table = parse_curve_table(DEFAULT_CRF_TEXT, DEFAULT_CRF_NAME)?;
    build_matrix(&table, band_centers_nm, DEFAULT_CRF_NAME)
}

/// Project each pixel's spectrum through the response rows: rgb = f * x.
/// Inputs in [0,1] stay in [0,1] because rows are convex weights.
pub fn project_to_rgb(cube: &HsiCube, crf: &CrfMatrix) -> Result<RgbImage> {
    if cube.bands() != crf.band_count() {
        return Err(Error::BandMismatch {
            expected: crf.band_count(),
            got: cube.bands(),
        });
    }
    let plane = cube.pixel_count();
    let mut data = vec![0.0f32; 3 * plane];
    for ch in 0..3 {
        let row = crf.row(ch);
        let dst = &mut data[ch * plane..(ch + 1) * plane];
        for (b, &w) in row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (d, &s) in dst.iter_mut().zip(cube.band(b)) {
                *d += w * s;
            }
        }
    }
    RgbImage::new(cube.height(), cube.width(), data)
}
