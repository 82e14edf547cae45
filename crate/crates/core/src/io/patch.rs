//! Non-overlapping patch extraction pairing each HR tile with its bicubic
//! LR counterpart.

use crate::error::{Error, Result};
use crate::resample::degrade;
use crate::types::Raster;

/// One LR/HR training pair cut from a source image.
#[derive(Debug, Clone)]
pub struct PatchPair<R: Raster> {
    pub lr: R,
    pub hr: R,
    pub source_id: String,
    /// Top-left corner in HR coordinates.
    pub origin: (usize, usize),
}

fn crop<R: Raster>(img: &R, top: usize, left: usize, edge: usize) -> Result<R> {
    let (bands, w) = (img.bands(), img.width());
    let mut data = Vec::with_capacity(bands * edge * edge);
    for b in 0..bands {
        let plane = img.band(b);
        for r in top..top + edge {
            data.extend_from_slice(&plane[r * w + left..r * w + left + edge]);
        }
    }
    R::from_parts(img, bands, edge, edge, data)
}

/// Tile `hr` into non-overlapping `patch_hr` squares in row-major order,
/// discarding residual borders, and degrade each tile by `tau`. An image
/// smaller than one patch yields an empty list.
pub fn extract_patches<R: Raster>(
    hr: &R,
    tau: usize,
    patch_hr: usize,
    source_id: &str,
) -> Result<Vec<PatchPair<R>>> {
    if patch_hr == 0 || tau == 0 || patch_hr % tau != 0 {
        return Err(Error::InvalidArgument(format!(
            "patch edge {patch_hr} must be a positive multiple of tau {tau}"
        )));
    }
    let rows = hr.height() / patch_hr;
    let cols = hr.width() / patch_hr;
    let mut out = Vec::with_capacity(rows * cols);
    for pr in 0..rows {
        for pc in 0..cols {
            let origin = (pr * patch_hr, pc * patch_hr);
            let tile = crop(hr, origin.0, origin.1, patch_hr)?;
            let lr = degrade(&tile, tau)?;
            out.push(PatchPair {
                lr,
                hr: tile,
                source_id: source_id.to_string(),
                origin,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::HsiCube;

    fn ramp_cube(bands: usize, edge: usize) -> HsiCube {
        HsiCube::from_fn(bands, edge, edge, |b, r, c| {
            (b * edge * edge + r * edge + c) as f32 / (bands * edge * edge) as f32
        })
    }

    #[test]
    fn tiling_counts() {
        let big = ramp_cube(2, 512);
        assert_eq!(extract_patches(&big, 4, 64, "big").unwrap().len(), 64);
        let exact = ramp_cube(2, 64);
        let one = extract_patches(&exact, 4, 64, "exact").unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].origin, (0, 0));
        let awkward = ramp_cube(2, 100);
        assert_eq!(extract_patches(&awkward, 4, 64, "awkward").unwrap().len(), 1);
        let small = ramp_cube(2, 32);
        assert!(extract_patches(&small, 4, 64, "small").unwrap().is_empty());
    }

    #[test]
    fn pairs_have_consistent_shapes() {
        let cube = ramp_cube(3, 128);
        for p in extract_patches(&cube, 4, 64, "x").unwrap() {
            assert_eq!((p.hr.height(), p.hr.width()), (64, 64));
            assert_eq!((p.lr.height(), p.lr.width()), (16, 16));
            assert_eq!(p.lr.bands(), p.hr.bands());
        }
    }

    #[test]
    fn tiles_reassemble_to_cropped_source() {
        let cube = ramp_cube(2, 100);
        let patches = extract_patches(&cube, 2, 32, "y").unwrap();
        assert_eq!(patches.len(), 9);
        let mut rebuilt = HsiCube::zeros(2, 96, 96);
        for p in &patches {
            for b in 0..2 {
                for r in 0..32 {
                    for c in 0..32 {
                        rebuilt.set(b, p.origin.0 + r, p.origin.1 + c, p.hr.get(b, r, c));
                    }
                }
            }
        }
        for b in 0..2 {
            for r in 0..96 {
                for c in 0..96 {
                    assert_eq!(rebuilt.get(b, r, c), cube.get(b, r, c));
                }
            }
        }
    }

    #[test]
    fn rejects_indivisible_patch() {
        let cube = ramp_cube(1, 64);
        assert!(extract_patches(&cube, 4, 30, "z").is_err());
    }
}
