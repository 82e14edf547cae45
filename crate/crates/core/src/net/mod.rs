//! The super-resolution network: a band-group encoder shared between the
//! hyperspectral and RGB branches, plus one reconstruction decoder per
//! branch. Both branches predict a residual on top of a bicubic upscale,
//! and both start as an exact bicubic identity because every path that
//! feeds the residual ends in a zero-initialized convolution.

use crate::augment::spectral_interpolate;
use crate::error::{Error, Result};
use crate::nn::{Bound, NodeId, ParamId, ParamSet, Scalar, Tape, Tensor};
use crate::resample::bicubic_resize;
use crate::types::{make_group_plan, GroupPlan, HsiCube, Raster, RgbImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

fn default_group_size() -> usize {
    8
}
fn default_overlap() -> usize {
    2
}
fn default_feature_width() -> usize {
    256
}
fn default_ssb_per_stage() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Band count of the hyperspectral inputs.
    pub hsi_bands: usize,
    /// Upscaling factor.
    pub tau: usize,
    #[serde(default = "default_group_size")]
    pub group_size: usize,
    #[serde(default = "default_overlap")]
    pub overlap: usize,
    #[serde(default = "default_feature_width")]
    pub feature_width: usize,
    #[serde(default = "default_ssb_per_stage")]
    pub ssb_per_stage: usize,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if ![2, 4, 8].contains(&self.tau) {
            return Err(Error::InvalidConfig(format!(
                "tau {} not supported, use 2, 4 or 8",
                self.tau
            )));
        }
        if self.hsi_bands == 0 {
            return Err(Error::InvalidConfig("hsi_bands must be >= 1".into()));
        }
        if self.group_size < 3 {
            return Err(Error::InvalidConfig(format!(
                "group_size {} too small, the RGB branch interpolates 3 channels up to the group size",
                self.group_size
            )));
        }
        if self.group_size > self.hsi_bands {
            return Err(Error::InvalidConfig(format!(
                "group_size {} exceeds hsi_bands {}",
                self.group_size, self.hsi_bands
            )));
        }
        if self.overlap >= self.group_size {
            return Err(Error::InvalidConfig(format!(
                "overlap {} must be smaller than group_size {}",
                self.overlap, self.group_size
            )));
        }
        if self.feature_width == 0 || self.feature_width % 4 != 0 {
            return Err(Error::InvalidConfig(format!(
                "feature_width {} must be a positive multiple of 4",
                self.feature_width
            )));
        }
        if self.ssb_per_stage == 0 {
            return Err(Error::InvalidConfig("ssb_per_stage must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone)]
struct Conv {
    w: ParamId,
    b: ParamId,
    pad: usize,
}

impl Conv {
    fn apply<S: Scalar>(&self, tape: &mut Tape<S>, bound: &Bound, x: NodeId) -> NodeId {
        tape.conv2d(x, bound.node(self.w), bound.node(self.b), self.pad)
    }
}

/// Spatial-spectral block. The spatial half is a plain residual pair of
/// 3x3 convolutions; the spectral half is a residual pair of 1x1
/// convolutions whose output is rescaled per channel by a squeeze-and-
/// excite gate before joining the trunk. The second convolution of each
/// half starts at zero, so a fresh block is the identity map.
#[derive(Clone)]
struct Ssb {
    spa1: Conv,
    spa2: Conv,
    spe1: Conv,
    spe2: Conv,
    gate1: Conv,
    gate2: Conv,
}

impl Ssb {
    fn apply<S: Scalar>(&self, tape: &mut Tape<S>, bound: &Bound, x: NodeId) -> NodeId {
        let s1 = self.spa1.apply(tape, bound, x);
        let s1 = tape.relu(s1);
        let s2 = self.spa2.apply(tape, bound, s1);
        let spatial = tape.add(x, s2);

        let b1 = self.spe1.apply(tape, bound, spatial);
        let b1 = tape.relu(b1);
        let body = self.spe2.apply(tape, bound, b1);
        let pooled = tape.global_avg(body);
        let g1 = self.gate1.apply(tape, bound, pooled);
        let g1 = tape.relu(g1);
        let g2 = self.gate2.apply(tape, bound, g1);
        let gate = tape.sigmoid(g2);
        let gated = tape.mul_channel(body, gate);
        tape.add(spatial, gated)
    }
}

#[derive(Clone)]
struct Upsample {
    conv: Conv,
    r: usize,
}

impl Upsample {
    fn apply<S: Scalar>(&self, tape: &mut Tape<S>, bound: &Bound, x: NodeId) -> NodeId {
        let y = self.conv.apply(tape, bound, x);
        tape.pixel_shuffle(y, self.r)
    }
}

#[derive(Clone)]
struct Encoder {
    head: Conv,
    stage1: Vec<Ssb>,
    up1: Option<Upsample>,
    stage2: Vec<Ssb>,
    up2: Upsample,
    tail: Conv,
}

#[derive(Clone)]
struct Decoder {
    head: Conv,
    blocks: Vec<Ssb>,
    tail: Conv,
}

impl Decoder {
    fn apply<S: Scalar>(&self, tape: &mut Tape<S>, bound: &Bound, x: NodeId) -> NodeId {
        let mut f = self.head.apply(tape, bound, x);
        for block in &self.blocks {
            f = block.apply(tape, bound, f);
        }
        self.tail.apply(tape, bound, f)
    }
}

/// Parameter initializer: He-normal weights by default, exact zeros for
/// the layers that keep fresh models at the bicubic identity.
struct Init<'a, S: Scalar> {
    params: &'a mut ParamSet<S>,
    rng: ChaCha8Rng,
}

impl<S: Scalar> Init<'_, S> {
    fn conv(&mut self, name: &str, out_c: usize, in_c: usize, k: usize, zero: bool) -> Conv {
        let n = out_c * in_c * k * k;
        let data = if zero {
            vec![S::ZERO; n]
        } else {
            let std = (2.0 / (in_c * k * k) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            (0..n)
                .map(|_| S::from_f64(normal.sample(&mut self.rng)))
                .collect()
        };
        let w = self
            .params
            .add(format!("{name}.w"), Tensor::from_vec([out_c, in_c, k * k], data));
        let b = self
            .params
            .add(format!("{name}.b"), Tensor::zeros([out_c, 1, 1]));
        Conv {
            w,
            b,
            pad: if k == 3 { 1 } else { 0 },
        }
    }

    fn ssb(&mut self, name: &str, f: usize) -> Ssb {
        let gate_c = (f / 16).max(1);
        Ssb {
            spa1: self.conv(&format!("{name}.spa1"), f, f, 3, false),
            spa2: self.conv(&format!("{name}.spa2"), f, f, 3, true),
            spe1: self.conv(&format!("{name}.spe1"), f, f, 1, false),
            spe2: self.conv(&format!("{name}.spe2"), f, f, 1, true),
            gate1: self.conv(&format!("{name}.gate1"), gate_c, f, 1, false),
            gate2: self.conv(&format!("{name}.gate2"), f, gate_c, 1, false),
        }
    }

    fn ssb_chain(&mut self, name: &str, count: usize, f: usize) -> Vec<Ssb> {
        (0..count).map(|i| self.ssb(&format!("{name}.{i}"), f)).collect()
    }
}

#[derive(Clone)]
pub struct Model<S> {
    pub config: NetworkConfig,
    pub plan: GroupPlan,
    pub params: ParamSet<S>,
    encoder: Encoder,
    dec_hsi: Decoder,
    dec_rgb: Decoder,
}

impl<S: Scalar> Model<S> {
    pub fn init(config: NetworkConfig, seed: u64) -> Result<Model<S>> {
        config.validate()?;
        let plan = make_group_plan(config.hsi_bands, config.group_size, config.overlap)?;
        let (f, m) = (config.feature_width, config.group_size);
        let mut params = ParamSet::new();
        let mut init = Init {
            params: &mut params,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };

        let head = init.conv("encoder.head", f, m, 3, false);
        let stage1 = init.ssb_chain("encoder.stage1", config.ssb_per_stage, f);
        let r1 = config.tau / 2;
        let up1 = (r1 > 1).then(|| Upsample {
            conv: init.conv("encoder.up1", r1 * r1 * f, f, 3, false),
            r: r1,
        });
        let stage2 = init.ssb_chain("encoder.stage2", config.ssb_per_stage, f);
        let up2 = Upsample {
            conv: init.conv("encoder.up2", 4 * f, f, 3, false),
            r: 2,
        };
        let tail = init.conv("encoder.tail", m, f, 3, false);
        let encoder = Encoder {
            head,
            stage1,
            up1,
            stage2,
            up2,
            tail,
        };

        let dec_hsi = Decoder {
            head: init.conv("dec_hsi.head", f, config.hsi_bands, 3, false),
            blocks: init.ssb_chain("dec_hsi.block", config.ssb_per_stage, f),
            tail: init.conv("dec_hsi.tail", config.hsi_bands, f, 3, true),
        };
        let dec_rgb = Decoder {
            head: init.conv("dec_rgb.head", f, m, 3, false),
            blocks: init.ssb_chain("dec_rgb.block", config.ssb_per_stage, f),
            tail: init.conv("dec_rgb.tail", 3, f, 3, true),
        };

        Ok(Model {
            config,
            plan,
            params,
            encoder,
            dec_hsi,
            dec_rgb,
        })
    }

    pub fn cast<T: Scalar>(&self) -> Model<T> {
        Model {
            config: self.config,
            plan: self.plan.clone(),
            params: self.params.cast(),
            encoder: self.encoder.clone(),
            dec_hsi: self.dec_hsi.clone(),
            dec_rgb: self.dec_rgb.clone(),
        }
    }

    /// Upscale one band group from tau-downsampled to full resolution.
    fn encode_group(&self, tape: &mut Tape<S>, bound: &Bound, g: NodeId) -> NodeId {
        let e = &self.encoder;
        let f0 = e.head.apply(tape, bound, g);
        let mut x = f0;
        for ssb in &e.stage1 {
            x = ssb.apply(tape, bound, x);
        }
        x = tape.add(x, f0);
        if let Some(up) = &e.up1 {
            x = up.apply(tape, bound, x);
        }
        let f1 = x;
        for ssb in &e.stage2 {
            x = ssb.apply(tape, bound, x);
        }
        x = tape.add(x, f1);
        x = e.up2.apply(tape, bound, x);
        e.tail.apply(tape, bound, x)
    }

    /// Full hyperspectral branch: split bands into overlapping groups, run
    /// the shared encoder on each, reassemble, decode, and add the bicubic
    /// upscale of the input. `lr` must have `hsi_bands` channels.
    pub fn forward_hsi(&self, tape: &mut Tape<S>, bound: &Bound, lr: &Tensor<S>) -> NodeId {
        let [c, h, w] = lr.shape();
        assert_eq!(c, self.config.hsi_bands, "band count mismatch");
        let tau = self.config.tau;
        let bic = tape.constant(bicubic_tensor(lr, h * tau, w * tau));

        let m = self.config.group_size;
        let mut outs = Vec::with_capacity(self.plan.starts.len());
        for &s in &self.plan.starts {
            let g = tape.constant(lr.band_window(s, m));
            outs.push(self.encode_group(tape, bound, g));
        }
        let asm = tape.assemble(&outs, &self.plan.starts, c);
        let dec = self.dec_hsi.apply(tape, bound, asm);
        tape.add(dec, bic)
    }

    /// RGB branch: lift the 3 channels to a full band group by linear
    /// spectral interpolation, run the shared encoder once, decode back to
    /// RGB, and add the bicubic upscale.
    pub fn forward_rgb(&self, tape: &mut Tape<S>, bound: &Bound, rgb: &Tensor<S>) -> NodeId {
        let [c, h, w] = rgb.shape();
        assert_eq!(c, 3, "rgb input must have 3 channels");
        let tau = self.config.tau;
        let bic = tape.constant(bicubic_tensor(rgb, h * tau, w * tau));

        let lifted = interp_tensor(rgb, self.config.group_size);
        let g = tape.constant(lifted);
        let enc = self.encode_group(tape, bound, g);
        let dec = self.dec_rgb.apply(tape, bound, enc);
        tape.add(dec, bic)
    }

    /// Whole-image inference. The output is the raw network prediction,
    /// not clamped to [0, 1].
    pub fn super_resolve(&self, lr: &HsiCube) -> Result<HsiCube> {
        if lr.bands() != self.config.hsi_bands {
            return Err(Error::BandMismatch {
                expected: self.config.hsi_bands,
                got: lr.bands(),
            });
        }
        let t = cube_to_tensor::<S>(lr);
        let mut tape = Tape::new();
        let bound = self.params.bind_frozen(&mut tape);
        let out = self.forward_hsi(&mut tape, &bound, &t);
        let mut cube = tensor_to_cube(tape.value(out))?;
        cube.band_range_nm = lr.band_range_nm;
        Ok(cube)
    }

    /// Tiled inference for inputs too large to process in one pass. Tiles
    /// of at most `tile` LR pixels per side overlap by `overlap`; outputs
    /// are averaged where they meet. Tile borders see reflected padding
    /// instead of true neighbors, so results differ slightly from a
    /// single-pass upscale near seams.
    pub fn super_resolve_tiled(&self, lr: &HsiCube, tile: usize, overlap: usize) -> Result<HsiCube> {
        if tile == 0 || overlap >= tile {
            return Err(Error::InvalidArgument(format!(
                "tile {tile} must be positive and larger than overlap {overlap}"
            )));
        }
        let (c, h, w) = (lr.bands(), lr.height(), lr.width());
        if h <= tile && w <= tile {
            return self.super_resolve(lr);
        }
        if lr.bands() != self.config.hsi_bands {
            return Err(Error::BandMismatch {
                expected: self.config.hsi_bands,
                got: lr.bands(),
            });
        }
        let tau = self.config.tau;
        let (oh, ow) = (h * tau, w * tau);
        let mut accum = vec![0.0f64; c * oh * ow];
        let mut cover = vec![0.0f64; oh * ow];
        let t = cube_to_tensor::<S>(lr);

        for y0 in tile_starts(h, tile, overlap) {
            for x0 in tile_starts(w, tile, overlap) {
                let (th, tw) = (tile.min(h - y0), tile.min(w - x0));
                let patch = crop_tensor(&t, y0, x0, th, tw);
                let mut tape = Tape::new();
                let bound = self.params.bind_frozen(&mut tape);
                let out = self.forward_hsi(&mut tape, &bound, &patch);
                let v = tape.value(out);
                for ch in 0..c {
                    for py in 0..th * tau {
                        let dst = (ch * oh + y0 * tau + py) * ow + x0 * tau;
                        let src = v.channel(ch);
                        for px in 0..tw * tau {
                            accum[dst + px] += src[py * tw * tau + px].to_f64();
                        }
                    }
                }
                for py in 0..th * tau {
                    let dst = (y0 * tau + py) * ow + x0 * tau;
                    for px in 0..tw * tau {
                        cover[dst + px] += 1.0;
                    }
                }
            }
        }

        let plane = oh * ow;
        let data: Vec<f32> = accum
            .iter()
            .enumerate()
            .map(|(i, &v)| (v / cover[i % plane]) as f32)
            .collect();
        let mut cube = HsiCube::new(c, oh, ow, data)?;
        cube.band_range_nm = lr.band_range_nm;
        Ok(cube)
    }

    /// Whole-image RGB inference, unclamped.
    pub fn super_resolve_rgb(&self, rgb: &RgbImage) -> Result<RgbImage> {
        let t = Tensor::from_vec(
            [3, rgb.height(), rgb.width()],
            rgb.data().iter().map(|&v| S::from_f32(v)).collect(),
        );
        let mut tape = Tape::new();
        let bound = self.params.bind_frozen(&mut tape);
        let out = self.forward_rgb(&mut tape, &bound, &t);
        let v = tape.value(out);
        let [_, oh, ow] = v.shape();
        RgbImage::new(oh, ow, v.data().iter().map(|x| x.to_f32()).collect())
    }
}

fn crop_tensor<S: Scalar>(t: &Tensor<S>, y0: usize, x0: usize, th: usize, tw: usize) -> Tensor<S> {
    let [c, h, w] = t.shape();
    assert!(y0 + th <= h && x0 + tw <= w, "crop out of bounds");
    let mut out = Tensor::zeros([c, th, tw]);
    for ch in 0..c {
        for y in 0..th {
            let src = (ch * h + y0 + y) * w + x0;
            let dst = (ch * th + y) * tw;
            out.data_mut()[dst..dst + tw].copy_from_slice(&t.data()[src..src + tw]);
        }
    }
    out
}

/// Left-edge positions of tiles of width `tile` covering `n` with the
/// given overlap; the final tile is flush with the right edge.
fn tile_starts(n: usize, tile: usize, overlap: usize) -> Vec<usize> {
    if n <= tile {
        return vec![0];
    }
    let step = tile - overlap;
    let mut starts = Vec::new();
    let mut s = 0;
    loop {
        if s + tile >= n {
            starts.push(n - tile);
            break;
        }
        starts.push(s);
        s += step;
    }
    starts
}

pub fn cube_to_tensor<S: Scalar>(cube: &HsiCube) -> Tensor<S> {
    Tensor::from_vec(
        [cube.bands(), cube.height(), cube.width()],
        cube.data().iter().map(|&v| S::from_f32(v)).collect(),
    )
}

pub fn tensor_to_cube<S: Scalar>(t: &Tensor<S>) -> Result<HsiCube> {
    let [c, h, w] = t.shape();
    HsiCube::new(c, h, w, t.data().iter().map(|v| v.to_f32()).collect())
}

/// Bicubic upscale of a tensor, computed through the f32 resampler.
fn bicubic_tensor<S: Scalar>(t: &Tensor<S>, oh: usize, ow: usize) -> Tensor<S> {
    let [c, h, w] = t.shape();
    let cube = HsiCube::new(c, h, w, t.data().iter().map(|v| v.to_f32()).collect())
        .expect("tensor shape is a valid cube shape");
    let resized = bicubic_resize(&cube, oh, ow).expect("positive target size");
    Tensor::from_vec(
        [c, oh, ow],
        resized.data().iter().map(|&v| S::from_f32(v)).collect(),
    )
}

/// Spectral lift of an RGB tensor to `m` bands, through the f32 path.
fn interp_tensor<S: Scalar>(rgb: &Tensor<S>, m: usize) -> Tensor<S> {
    let [_, h, w] = rgb.shape();
    let img = RgbImage::new(h, w, rgb.data().iter().map(|v| v.to_f32()).collect())
        .expect("tensor shape is a valid rgb shape");
    let cube = spectral_interpolate(&img, m).expect("group size is validated >= 3");
    Tensor::from_vec(
        [m, h, w],
        cube.data().iter().map(|&v| S::from_f32(v)).collect(),
    )
}
