use crate::commands::ensure_dir;
use crate::failure::{Failure, Phase};
use crate::VizArgs;
use hypersr_core::io::{band_triplet_rgb, load_cube, save_heatmap_png, save_rgb_png};
use hypersr_core::metrics::error_map;
use hypersr_core::types::Raster;
use hypersr_core::Error;

/// 1-based display bands assumed for 31-band cubes when none are given.
const DEFAULT_BANDS_31: [usize; 3] = [5, 15, 25];

pub fn run(args: VizArgs) -> Result<(), Failure> {
    let reference = load_cube(&args.reference).setup()?;
    let est = load_cube(&args.est).setup()?;
    let bands = resolve_bands(args.bands.as_deref(), reference.bands()).setup()?;

    ensure_dir(&args.out).runtime()?;
    let map = error_map(&est, &reference, bands).runtime()?;
    save_heatmap_png(
        &map,
        reference.height(),
        reference.width(),
        None,
        args.out.join("error.png"),
    )
    .runtime()?;
    let ref_png = band_triplet_rgb(&reference, bands).runtime()?;
    save_rgb_png(&ref_png, args.out.join("ref.png")).runtime()?;
    let est_png = band_triplet_rgb(&est, bands).runtime()?;
    save_rgb_png(&est_png, args.out.join("est.png")).runtime()?;

    println!(
        "bands {}/{}/{} (1-based)  ->  {}",
        bands[0] + 1,
        bands[1] + 1,
        bands[2] + 1,
        args.out.display()
    );
    Ok(())
}

/// Convert user-facing 1-based bands to 0-based indices, falling back to
/// the 31-band display convention.
fn resolve_bands(given: Option<&[usize]>, band_count: usize) -> hypersr_core::Result<[usize; 3]> {
    let one_based: [usize; 3] = match given {
        Some(v) => v.try_into().map_err(|_| {
            Error::InvalidArgument(format!("--bands needs exactly 3 values, got {}", v.len()))
        })?,
        None if band_count == 31 => DEFAULT_BANDS_31,
        None => {
            return Err(Error::InvalidArgument(format!(
                "default display bands {}/{}/{} apply only to 31-band cubes; this cube has \
                 {band_count} bands, pass --bands",
                DEFAULT_BANDS_31[0], DEFAULT_BANDS_31[1], DEFAULT_BANDS_31[2]
            )))
        }
    };
    let mut out = [0usize; 3];
    for (dst, &b) in out.iter_mut().zip(&one_based) {
        if b == 0 || b > band_count {
            return Err(Error::InvalidArgument(format!(
                "band {b} out of range 1..={band_count}"
            )));
        }
        *dst = b - 1;
    }
    Ok(out)
}
