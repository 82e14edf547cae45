//! Test-set evaluation: degrade each reference image, super-resolve it,
//! and score the clamped result with all six metrics next to a bicubic
//! baseline scored the same way.

use crate::error::{Error, Result};
use crate::metrics::{evaluate_pair, MetricReport};
use crate::net::Model;
use crate::resample::{bicubic_resize, degrade};
use crate::types::{HsiCube, Raster};

/// Tile edge above which whole-image inference switches to tiling, in LR
/// pixels. Keeps peak memory bounded on large scenes.
pub const EVAL_TILE_LR: usize = 64;
pub const EVAL_TILE_OVERLAP_LR: usize = 8;

/// Scores for one test image.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub id: String,
    pub model: MetricReport,
    pub bicubic: MetricReport,
}

impl EvalRow {
    pub const CSV_HEADER: &'static str = "id,rmse,cc,mpsnr,mssim,ergas,sam,\
        bicubic_rmse,bicubic_cc,bicubic_mpsnr,bicubic_mssim,bicubic_ergas,bicubic_sam";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{}",
            self.id,
            self.model.to_csv_row(),
            self.bicubic.to_csv_row()
        )
    }
}

/// Per-image rows plus the column-mean summary row.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub mean_model: MetricReport,
    pub mean_bicubic: MetricReport,
}

impl EvalReport {
    pub fn summary_csv_row(&self) -> String {
        format!(
            "mean,{},{}",
            self.mean_model.to_csv_row(),
            self.mean_bicubic.to_csv_row()
        )
    }
}

/// Evaluate on whole test images. Each reference is degraded by the
/// model's scale factor, so its height and width must divide by τ.
pub fn evaluate(model: &Model<f32>, test: &[(String, HsiCube)]) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let tau = model.config.tau;
    let mut rows = Vec::with_capacity(test.len());
    for (id, reference) in test {
        let lr = degrade(reference, tau)?;
        let pred = if lr.height() > EVAL_TILE_LR || lr.width() > EVAL_TILE_LR {
            model.super_resolve_tiled(&lr, EVAL_TILE_LR, EVAL_TILE_OVERLAP_LR)?
        } else {
            model.super_resolve(&lr)?
        };
        let baseline = bicubic_resize(&lr, reference.height(), reference.width())?;
        let row = EvalRow {
            id: id.clone(),
            model: evaluate_pair(&clamp_01(&pred), reference, tau)?,
            bicubic: evaluate_pair(&clamp_01(&baseline), reference, tau)?,
        };
        rows.push(row);
    }
    let mean_model = mean_report(rows.iter().map(|r| &r.model));
    let mean_bicubic = mean_report(rows.iter().map(|r| &r.bicubic));
    Ok(EvalReport {
        rows,
        mean_model,
        mean_bicubic,
    })
}

pub fn clamp_01(cube: &HsiCube) -> HsiCube {
    let data = cube.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    HsiCube::new(cube.bands(), cube.height(), cube.width(), data)
        .expect("clamping preserves shape")
}

fn mean_report<'a>(reports: impl Iterator<Item = &'a MetricReport>) -> MetricReport {
    let mut sum = MetricReport {
        mpsnr: 0.0,
        mssim: 0.0,
        rmse: 0.0,
        sam: 0.0,
        ergas: 0.0,
        cc: 0.0,
    };
    let mut n = 0usize;
    for r in reports {
        sum.mpsnr += r.mpsnr;
        sum.mssim += r.mssim;
        sum.rmse += r.rmse;
        sum.sam += r.sam;
        sum.ergas += r.ergas;
        sum.cc += r.cc;
        n += 1;
    }
    let n = n as f64;
    MetricReport {
        mpsnr: sum.mpsnr / n,
        mssim: sum.mssim / n,
        rmse: sum.rmse / n,
        sam: sum.sam / n,
        ergas: sum.ergas / n,
        cc: sum.cc / n,
    }
}
