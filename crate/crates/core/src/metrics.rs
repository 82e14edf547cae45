//! Reconstruction quality metrics. All six accumulate in f64 and treat
//! the value range as [0, 1]. Band-wise metrics average over bands,
//! pixel-wise metrics over pixels.

use crate::error::{Error, Result};
use crate::types::{HsiCube, Raster};
use serde::{Deserialize, Serialize};

/// PSNR is capped here when a band's MSE drops below 1e-12, so identical
/// bands report 120 dB instead of infinity.
pub const PSNR_CAP_DB: f64 = 120.0;
const PSNR_MSE_FLOOR: f64 = 1e-12;
const SAM_NORM_FLOOR: f64 = 1e-8;
const ERGAS_MEAN_FLOOR: f64 = 1e-8;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_shapes(pred: &HsiCube, target: &HsiCube) -> Result<()> {
    if (pred.bands(), pred.height(), pred.width())
        != (target.bands(), target.height(), target.width())
    {
        return Err(Error::ShapeMismatch(format!(
            "metric inputs {}x{}x{} vs {}x{}x{}",
            pred.bands(),
            pred.height(),
            pred.width(),
            target.bands(),
            target.height(),
            target.width()
        )));
    }
    Ok(())
}

/// Root mean squared error over every element.
pub fn rmse(pred: &HsiCube, target: &HsiCube) -> Result<f64> {
    check_shapes(pred, target)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok((sum / pred.data().len() as f64).sqrt())
}

/// Mean over bands of per-band PSNR against a unit value range.
pub fn mpsnr(pred: &HsiCube, target: &HsiCube) -> Result<f64> {
    check_shapes(pred, target)?;
    let plane = pred.height() * pred.width();
    let mut acc = 0.0f64;
    for b in 0..pred.bands() {
        let mse: f64 = pred
            .band(b)
            .iter()
            .zip(target.band(b))
            .map(|(&x, &y)| {
                let d = x as f64 - y as f64;
                d * d
            })
            .sum::<f64>()
            / plane as f64;
        acc += if mse < PSNR_MSE_FLOOR {
            PSNR_CAP_DB
        } else {
            -10.0 * mse.log10()
        };
    }
    Ok(acc / pred.bands() as f64)
}

/// 1-D Gaussian window used separably for SSIM local statistics.
fn ssim_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0f64; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Valid-region separable filtering: horizontal pass then vertical pass.
/// Output is (h - 10) x (w - 10).
fn filter_valid(plane: &[f64], h: usize, w: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut mid = vec![0.0f64; h * ow];
    for r in 0..h {
        for c in 0..ow {
            let mut s = 0.0;
            for (k, &wk) in win.iter().enumerate() {
                s += wk * plane[r * w + c + k];
            }
            mid[r * ow + c] = s;
        }
    }
    let mut out = vec![0.0f64; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            let mut s = 0.0;
            for (k, &wk) in win.iter().enumerate() {
                s += wk * mid[(r + k) * ow + c];
            }
            out[r * ow + c] = s;
        }
    }
    out
}

/// Mean structural similarity: per-band SSIM maps from an 11x11 Gaussian
/// window over the valid region, averaged over positions and bands.
/// Requires both spatial dimensions to be at least 11.
pub fn mssim(pred: &HsiCube, target: &HsiCube) -> Result<f64> {
    check_shapes(pred, target)?;
    let (h, w) = (pred.height(), pred.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "ssim needs spatial size >= {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let win = ssim_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut acc = 0.0f64;
    for b in 0..pred.bands() {
        let x: Vec<f64> = pred.band(b).iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = target.band(b).iter().map(|&v| v as f64).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();

        let mx = filter_valid(&x, h, w, &win);
        let my = filter_valid(&y, h, w, &win);
        let mxx = filter_valid(&xx, h, w, &win);
        let myy = filter_valid(&yy, h, w, &win);
        let mxy = filter_valid(&xy, h, w, &win);

        let mut band_sum = 0.0f64;
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cov = mxy[i] - ux * uy;
            band_sum += ((2.0 * ux * uy + c1) * (2.0 * cov + c2))
                / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        acc += band_sum / mx.len() as f64;
    }
    Ok(acc / pred.bands() as f64)
}

/// Mean over bands of the Pearson correlation coefficient. A band where
/// either side has zero variance scores 1 when the bands are identical
/// and 0 otherwise.
pub fn cc(pred: &HsiCube, target: &HsiCube) -> Result<f64> {
    check_shapes(pred, target)?;
    let plane = pred.height() * pred.width();
    let mut acc = 0.0f64;
    for b in 0..pred.bands() {
        let x = pred.band(b);
        let y = target.band(b);
        let mx = x.iter().map(|&v| v as f64).sum::<f64>() / plane as f64;
        let my = y.iter().map(|&v| v as f64).sum::<f64>() / plane as f64;
        let (mut vx, mut vy, mut cov) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..plane {
            let dx = x[i] as f64 - mx;
            let dy = y[i] as f64 - my;
            vx += dx * dx;
            vy += dy * dy;
            cov += dx * dy;
        }
        acc += if vx == 0.0 || vy == 0.0 {
            if x == y {
                1.0
            } else {
                0.0
            }
        } else {
            cov / (vx.sqrt() * vy.sqrt())
        };
    }
    Ok(acc / pred.bands() as f64)
}

/// Mean spectral angle in degrees over pixels. Pixels where either
/// spectrum has near-zero norm are skipped; if every pixel is skipped the
/// inputs carry no spectral direction to compare and this errors.
pub fn sam_degrees(pred: &HsiCube, target: &HsiCube) -> Result<f64> {
    check_shapes(pred, target)?;
    let (c, h, w) = (pred.bands(), pred.height(), pred.width());
    let plane = h * w;
    let mut sum = 0.0f64;
    let mut kept = 0usize;
    for p in 0..plane {
        let (mut dot, mut nx, mut ny) = (0.0f64, 0.0f64, 0.0f64);
        for b in 0..c {
            let x = pred.data()[b * plane + p] as f64;
            let y = target.data()[b * plane + p] as f64;
            dot += x * y;
            nx += x * x;
            ny += y * y;
        }
        let (nx, ny) = (nx.sqrt(), ny.sqrt());
        if nx < SAM_NORM_FLOOR || ny < SAM_NORM_FLOOR {
            continue;
        }
        let cos = (dot / (nx * ny)).clamp(-1.0, 1.0);
        sum += cos.acos().to_degrees();
        kept += 1;
    }
    if kept == 0 {
        return Err(Error::InvalidArgument(
            "spectral angle undefined: every pixel has near-zero norm".into(),
        ));
    }
    Ok(sum / kept as f64)
}

/// Relative global dimensionless error for upscale factor `tau`:
/// (100 / tau) * sqrt(mean over bands of (RMSE_b / mean_b)^2), with the
/// per-band target mean floored to avoid division blowups on dark bands.
pub fn ergas(pred: &HsiCube, target: &HsiCube, tau: usize) -> Result<f64> {
    check_shapes(pred, target)?;
    if tau == 0 {
        return Err(Error::InvalidArgument("tau must be positive".into()));
    }
    let plane = pred.height() * pred.width();
    let mut acc = 0.0f64;
    for b in 0..pred.bands() {
        let mse: f64 = pred
            .band(b)
            .iter()
            .zip(target.band(b))
            .map(|(&x, &y)| {
                let d = x as f64 - y as f64;
                d * d
            })
            .sum::<f64>()
            / plane as f64;
        let mean = (target.band(b).iter().map(|&v| v as f64).sum::<f64>() / plane as f64)
            .max(ERGAS_MEAN_FLOOR);
        acc += mse / (mean * mean);
    }
    Ok((100.0 / tau as f64) * (acc / pred.bands() as f64).sqrt())
}

/// Per-pixel mean absolute error over three chosen bands, as a flat
/// h*w map for heatmap rendering.
pub fn error_map(pred: &HsiCube, target: &HsiCube, bands: [usize; 3]) -> Result<Vec<f32>> {
    check_shapes(pred, target)?;
    let plane = pred.height() * pred.width();
    for &b in &bands {
        if b >= pred.bands() {
            return Err(Error::InvalidArgument(format!(
                "error map band {b} out of range, cube has {} bands",
                pred.bands()
            )));
        }
    }
    let mut map = vec![0.0f32; plane];
    for &b in &bands {
        let x = pred.band(b);
        let y = target.band(b);
        for i in 0..plane {
            map[i] += (x[i] - y[i]).abs() / 3.0;
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mpsnr: f64,
    pub mssim: f64,
    pub rmse: f64,
    pub sam: f64,
    pub ergas: f64,
    pub cc: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "rmse,cc,mpsnr,mssim,ergas,sam";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.rmse, self.cc, self.mpsnr, self.mssim, self.ergas, self.sam
        )
    }
}

/// All six metrics at once. SSIM's minimum-size requirement applies.
pub fn evaluate_pair(pred: &HsiCube, target: &HsiCube, tau: usize) -> Result<MetricReport> {
    Ok(MetricReport {
        mpsnr: mpsnr(pred, target)?,
        mssim: mssim(pred, target)?,
        rmse: rmse(pred, target)?,
        sam: sam_degrees(pred, target)?,
        ergas: ergas(pred, target, tau)?,
        cc: cc(pred, target)?,
    })
}
