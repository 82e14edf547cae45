//! Training objectives. Every term is a composite of mean absolute error
//! and a spatial-spectral total-variation penalty on the prediction; the
//! four terms differ only in which pair of images they compare:
//!
//! * `hsi`:    labeled pair, hyperspectral branch
//! * `rgb`:    RGB pair, RGB branch
//! * `smixup`: mixed labeled pair, hyperspectral branch
//! * `ssl`:    cross-branch consistency on unlabeled input, comparing the
//!   RGB projection of the hyperspectral output against the RGB branch's
//!   output on the projected input; the RGB branch runs frozen, so the
//!   term trains only the hyperspectral path.

use crate::crf::CrfMatrix;
use crate::error::{Error, Result};
use crate::net::Model;
use crate::nn::{Bound, NodeId, Scalar, Tape, Tensor};
use crate::types::{HsiCube, Raster};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Hsi,
    Rgb,
    Smixup,
    Ssl,
}

impl std::fmt::Display for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Term::Hsi => "hsi",
            Term::Rgb => "rgb",
            Term::Smixup => "smixup",
            Term::Ssl => "ssl",
        })
    }
}

/// One optimizer step's scalar losses, as logged per term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub term: Term,
    pub l1: f64,
    pub sstv: f64,
    pub total: f64,
}

/// Tape handles for one composite loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct CompositeNodes {
    pub l1: NodeId,
    pub sstv: NodeId,
    pub total: NodeId,
}

/// l1(pred, target) + sstv(pred), unit weights.
pub fn composite_on_tape<S: Scalar>(
    tape: &mut Tape<S>,
    pred: NodeId,
    target: NodeId,
) -> CompositeNodes {
    let l1 = tape.l1(pred, target);
    let sstv = tape.sstv(pred);
    let total = tape.sum_scalars(&[l1, sstv], &[S::ONE, S::ONE]);
    CompositeNodes { l1, sstv, total }
}

/// Average the per-sample composites of one mini-batch into a single
/// scalar node, and report the averaged components.
pub fn mean_composite<S: Scalar>(
    tape: &mut Tape<S>,
    term: Term,
    samples: &[CompositeNodes],
) -> (NodeId, LossBreakdown) {
    assert!(!samples.is_empty(), "empty loss batch");
    let inv = S::ONE / S::from_usize(samples.len());
    let totals: Vec<NodeId> = samples.iter().map(|s| s.total).collect();
    let coeffs = vec![inv; samples.len()];
    let node = tape.sum_scalars(&totals, &coeffs);

    let mean_of = |pick: fn(&CompositeNodes) -> NodeId| -> f64 {
        samples
            .iter()
            .map(|s| tape.value(pick(s)).item().to_f64())
            .sum::<f64>()
            / samples.len() as f64
    };
    let breakdown = LossBreakdown {
        term,
        l1: mean_of(|s| s.l1),
        sstv: mean_of(|s| s.sstv),
        total: tape.value(node).item().to_f64(),
    };
    (node, breakdown)
}

/// Cross-branch consistency on one unlabeled low-resolution cube. Builds
/// both forward paths on the tape and compares them in RGB space. The RGB
/// branch runs on a frozen binding and acts as the fixed target of the
/// step, so gradients reach the hyperspectral path only and supervision
/// flows one way, from the RGB side into the hyperspectral side.
pub fn ssl_on_tape<S: Scalar>(
    model: &Model<S>,
    tape: &mut Tape<S>,
    bound: &Bound,
    lr: &Tensor<S>,
    crf: &CrfMatrix,
) -> CompositeNodes {
    let rows: Vec<S> = crf.weights().iter().map(|&v| S::from_f32(v)).collect();
    let rgb_in = project_tensor(lr, &rows);
    let teacher = model.params.bind_frozen(tape);
    let branch_rgb = model.forward_rgb(tape, &teacher, &rgb_in);
    let hsi = model.forward_hsi(tape, bound, lr);
    let projected_hsi = tape.project(hsi, &rows, 3);
    composite_on_tape(tape, projected_hsi, branch_rgb)
}

fn project_tensor<S: Scalar>(t: &Tensor<S>, rows: &[S]) -> Tensor<S> {
    let [c, h, w] = t.shape();
    assert_eq!(rows.len(), 3 * c, "projection row length mismatch");
    let plane = h * w;
    let mut out = Tensor::zeros([3, h, w]);
    for o in 0..3 {
        let dst_range = o * plane..(o + 1) * plane;
        for b in 0..c {
            let wgt = rows[o * c + b];
            if wgt == S::ZERO {
                continue;
            }
            let src = t.channel(b);
            let dst = &mut out.data_mut()[dst_range.clone()];
            for (d, &v) in dst.iter_mut().zip(src) {
                *d += wgt * v;
            }
        }
    }
    out
}

/// Mean absolute difference between two same-shape cubes, in f64.
pub fn l1_loss(pred: &HsiCube, target: &HsiCube) -> Result<f64> {
    if (pred.bands(), pred.height(), pred.width())
        != (target.bands(), target.height(), target.width())
    {
        return Err(Error::ShapeMismatch(format!(
            "l1 inputs {}x{}x{} vs {}x{}x{}",
            pred.bands(),
            pred.height(),
            pred.width(),
            target.bands(),
            target.height(),
            target.width()
        )));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum();
    Ok(sum / pred.data().len() as f64)
}

/// Spatial-spectral total variation: the mean absolute forward difference
/// along rows, plus along columns, plus along bands. Axes of length 1
/// contribute zero.
pub fn sstv_loss(cube: &HsiCube) -> f64 {
    let (c, h, w) = (cube.bands(), cube.height(), cube.width());
    let d = cube.data();
    let mut total = 0.0f64;
    if h > 1 {
        let mut sum = 0.0f64;
        for ch in 0..c {
            for r in 0..h - 1 {
                let base = (ch * h + r) * w;
                for col in 0..w {
                    sum += (d[base + w + col] as f64 - d[base + col] as f64).abs();
                }
            }
        }
        total += sum / (c * (h - 1) * w) as f64;
    }
    if w > 1 {
        let mut sum = 0.0f64;
        for ch in 0..c {
            for r in 0..h {
                let base = (ch * h + r) * w;
                for col in 0..w - 1 {
                    sum += (d[base + col + 1] as f64 - d[base + col] as f64).abs();
                }
            }
        }
        total += sum / (c * h * (w - 1)) as f64;
    }
    if c > 1 {
        let plane = h * w;
        let mut sum = 0.0f64;
        for ch in 0..c - 1 {
            let base = ch * plane;
            for i in 0..plane {
                sum += (d[base + plane + i] as f64 - d[base + i] as f64).abs();
            }
        }
        total += sum / ((c - 1) * plane) as f64;
    }
    total
}

/// The scalar components of one composite evaluation outside any tape.
pub fn composite_loss(pred: &HsiCube, target: &HsiCube) -> Result<(f64, f64, f64)> {
    let l1 = l1_loss(pred, target)?;
    let sstv = sstv_loss(pred);
    Ok((l1, sstv, l1 + sstv))
}
