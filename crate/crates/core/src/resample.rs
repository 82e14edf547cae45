//! Separable bicubic resampling (Keys kernel, a = -0.5) and the derived
//! downscaling used to pair HR images with their LR counterparts.

use crate::error::{Error, Result};
use crate::types::Raster;

/// Keys cubic convolution kernel with a = -0.5.
pub fn keys_kernel(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t < 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * t * t * t - 5.0 * A * t * t + 8.0 * A * t - 4.0 * A
    } else {
        0.0
    }
}

/// Symmetric reflection: ..., 1, 0 | 0, 1, ..., n-1 | n-1, n-2, ...
fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Per-output-coordinate taps for one axis, with half-pixel-center mapping
/// src = (dst + 0.5) * in/out - 0.5.
struct AxisTaps {
    idx: Vec<[usize; 4]>,
    w: Vec<[f32; 4]>,
}

fn axis_taps(in_size: usize, out_size: usize) -> AxisTaps {
    let scale = in_size as f64 / out_size as f64;
    let mut idx = Vec::with_capacity(out_size);
    let mut w = Vec::with_capacity(out_size);
    for o in 0..out_size {
        let src = (o as f64 + 0.5) * scale - 0.5;
        let base = src.floor();
        let frac = src - base;
        let base = base as isize;
        let raw = [
            keys_kernel(frac + 1.0),
            keys_kernel(frac),
            keys_kernel(frac - 1.0),
            keys_kernel(frac - 2.0),
        ];
        // The four weights sum to 1 analytically; renormalize so constants
        // survive the float evaluation exactly.
        let sum: f64 = raw.iter().sum();
        w.push([
            (raw[0] / sum) as f32,
            (raw[1] / sum) as f32,
            (raw[2] / sum) as f32,
            (raw[3] / sum) as f32,
        ]);
        idx.push([
            reflect(base - 1, in_size),
            reflect(base, in_size),
            reflect(base + 1, in_size),
            reflect(base + 2, in_size),
        ]);
    }
    AxisTaps { idx, w }
}

/// Resample every band of `image` to `out_h` x `out_w`. No clamping is
/// applied; callers clamp at consumer boundaries only.
pub fn bicubic_resize<R: Raster>(image: &R, out_h: usize, out_w: usize) -> Result<R> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument(
            "resize target must be at least 1x1".into(),
        ));
    }
    let (bands, in_h, in_w) = (image.bands(), image.height(), image.width());
    let cols = axis_taps(in_w, out_w);
    let rows = axis_taps(in_h, out_h);

    let mut out = Vec::with_capacity(bands * out_h * out_w);
    // Horizontal pass into a per-band scratch, then vertical pass.
    let mut mid = vec![0.0f32; in_h * out_w];
    for b in 0..bands {
        let src = image.band(b);
        for r in 0..in_h {
            let line = &src[r * in_w..(r + 1) * in_w];
            let dst = &mut mid[r * out_w..(r + 1) * out_w];
            for (o, d) in dst.iter_mut().enumerate() {
                let ix = &cols.idx[o];
                let wx = &cols.w[o];
                *d = line[ix[0]] * wx[0]
                    + line[ix[1]] * wx[1]
                    + line[ix[2]] * wx[2]
                    + line[ix[3]] * wx[3];
            }
        }
        for o in 0..out_h {
            let iy = &rows.idx[o];
            let wy = &rows.w[o];
            let (l0, l1, l2, l3) = (
                &mid[iy[0] * out_w..iy[0] * out_w + out_w],
                &mid[iy[1] * out_w..iy[1] * out_w + out_w],
                &mid[iy[2] * out_w..iy[2] * out_w + out_w],
                &mid[iy[3] * out_w..iy[3] * out_w + out_w],
            );
            for c in 0..out_w {
                out.push(l0[c] * wy[0] + l1[c] * wy[1] + l2[c] * wy[2] + l3[c] * wy[3]);
            }
        }
    }
    R::from_parts(image, bands, out_h, out_w, out)
}

/// Bicubic downscale by an integer factor; the standard way LR inputs are
/// produced from HR ground truth.
pub fn degrade<R: Raster>(hr: &R, tau: usize) -> Result<R> {
    if tau == 0 {
        return Err(Error::InvalidArgument("tau must be >= 1".into()));
    }
    if hr.height() % tau != 0 || hr.width() % tau != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} image is not divisible by tau={}",
            hr.height(),
            hr.width(),
            tau
        )));
    }
    bicubic_resize(hr, hr.height() / tau, hr.width() / tau)
}
