//! PNG adapters: 8-bit RGB ingestion, band-triplet renderings, and heat-map
//! output for error visualization.

use std::path::Path;

use image::{ImageBuffer, ImageReader, Rgb};

use crate::error::{Error, Result};
use crate::types::{HsiCube, Raster, RgbImage};

/// Load an 8-bit RGB PNG (or any format the decoder recognizes), dividing by
/// 255 into `[0, 1]`.
pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let img = reader.decode()?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = vec![0.0f32; 3 * h * w];
    for (x, y, px) in img.enumerate_pixels() {
        let off = y as usize * w + x as usize;
        for b in 0..3 {
            data[b * h * w + off] = px.0[b] as f32 / 255.0;
        }
    }
    RgbImage::new(h, w, data)
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Write an RGB raster as an 8-bit PNG, clamping to `[0, 1]`.
pub fn save_rgb_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let (h, w) = (img.height(), img.width());
    let buf = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        Rgb([
            to_u8(img.get(0, y as usize, x as usize)),
            to_u8(img.get(1, y as usize, x as usize)),
            to_u8(img.get(2, y as usize, x as usize)),
        ])
    });
    buf.save_with_format(path.as_ref(), image::ImageFormat::Png)
        .map_err(Error::from)
}

/// Render three bands of a cube as an RGB image (band order = channel order).
pub fn band_triplet_rgb(cube: &HsiCube, bands: [usize; 3]) -> Result<RgbImage> {
    for &b in &bands {
        if b >= cube.bands() {
            return Err(Error::InvalidArgument(format!(
                "display band {b} out of range for a {}-band cube",
                cube.bands()
            )));
        }
    }
    let (h, w) = (cube.height(), cube.width());
    let mut data = Vec::with_capacity(3 * h * w);
    for &b in &bands {
        data.extend_from_slice(cube.band(b));
    }
    let mut img = RgbImage::new(h, w, data)?;
    img.clamp_01();
    Ok(img)
}

/// Black -> purple -> red -> orange -> yellow -> white ramp; zero maps to
/// exact black so an all-zero map renders as a black image.
fn heat_color(t: f32) -> [u8; 3] {
    const STOPS: [(f32, [f32; 3]); 6] = [
        (0.0, [0.0, 0.0, 0.0]),
        (0.2, [0.35, 0.0, 0.55]),
        (0.45, [0.85, 0.1, 0.15]),
        (0.65, [0.98, 0.45, 0.05]),
        (0.85, [1.0, 0.85, 0.2]),
        (1.0, [1.0, 1.0, 1.0]),
    ];
    let t = t.clamp(0.0, 1.0);
    let mut lo = STOPS[0];
    for hi in STOPS.iter().skip(1) {
        if t <= hi.0 {
            let u = (t - lo.0) / (hi.0 - lo.0);
            return [
                to_u8(lo.1[0] + u * (hi.1[0] - lo.1[0])),
                to_u8(lo.1[1] + u * (hi.1[1] - lo.1[1])),
                to_u8(lo.1[2] + u * (hi.1[2] - lo.1[2])),
            ];
        }
        lo = *hi;
    }
    [255, 255, 255]
}

/// Write a scalar map as an 8-bit heat-map PNG. `scale` fixes the value that
/// saturates the ramp; pass `None` to use the map's own maximum.
pub fn save_heatmap_png(
    map: &[f32],
    height: usize,
    width: usize,
    scale: Option<f32>,
    path: impl AsRef<Path>,
) -> Result<()> {
    if map.len() != height * width {
        return Err(Error::ShapeMismatch(format!(
            "heat map has {} values for {}x{}",
            map.len(),
            height,
            width
        )));
    }
    let top = match scale {
        Some(s) if s > 0.0 => s,
        _ => map.iter().cloned().fold(0.0f32, f32::max),
    };
    let inv = if top > 0.0 { 1.0 / top } else { 0.0 };
    let buf = ImageBuffer::from_fn(width as u32, height as u32, |x, y| {
        Rgb(heat_color(map[y as usize * width + x as usize] * inv))
    });
    buf.save_with_format(path.as_ref(), image::ImageFormat::Png)
        .map_err(Error::from)
}
