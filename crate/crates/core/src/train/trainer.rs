//! Alternating multi-term training loop. Every iteration steps the
//! optimizer once per configured mini-batch, in a fixed term order.

use crate::augment::{make_mixing_matrix, spectral_mixup};
use crate::crf::CrfMatrix;
use crate::error::{Error, Result};
use crate::loss::{composite_on_tape, mean_composite, ssl_on_tape, CompositeNodes, Term};
use crate::net::{cube_to_tensor, Model};
use crate::nn::{Bound, ParamId, Tape, Tensor};
use crate::train::adam::Adam;
use crate::train::data::{
    aux_rng, rng_word_pos, set_rng_word_pos, IndexStream, StreamState, TrainerData,
};
use crate::types::{Raster, RgbImage, TrainConfig};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

// Fixed RNG stream ids so every random consumer draws from its own
// deterministic sequence under the one run seed.
const STREAM_LABELED: u64 = 0;
const STREAM_RGB: u64 = 1;
const STREAM_MIXUP: u64 = 2;
const STREAM_SSL: u64 = 3;
const STREAM_MIX_MATRIX: u64 = 4;

/// One training-log line.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub epoch: usize,
    pub iteration: usize,
    pub term: Term,
    pub l1: f64,
    pub sstv: f64,
    pub total: f64,
    pub lr: f64,
}

impl LogRecord {
    pub const CSV_HEADER: &'static str = "epoch,iteration,term,l1,sstv,total,lr";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.epoch, self.iteration, self.term, self.l1, self.sstv, self.total, self.lr
        )
    }
}

/// Serializable resume point: progress counters plus every RNG position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub epoch: usize,
    pub iteration: usize,
    pub labeled: StreamState,
    pub rgb: Option<StreamState>,
    pub mixup: Option<StreamState>,
    pub ssl: Option<StreamState>,
    pub mix_word_pos_hi: u64,
    pub mix_word_pos_lo: u64,
}

pub struct Trainer {
    pub model: Model<f32>,
    pub train: TrainConfig,
    data: TrainerData,
    crf: CrfMatrix,
    adam: Adam,
    labeled: IndexStream,
    rgb: Option<IndexStream>,
    mixup: Option<IndexStream>,
    ssl: Option<IndexStream>,
    mix_rng: ChaCha8Rng,
    epoch: usize,
    iteration: usize,
}

impl Trainer {
    pub fn new(
        model: Model<f32>,
        data: TrainerData,
        train: TrainConfig,
        crf: CrfMatrix,
    ) -> Result<Self> {
        train.validate()?;
        let counts = &train.batches_per_iter;
        if data.labeled.is_empty() {
            return Err(Error::InvalidConfig(
                "training requires at least one labeled patch".into(),
            ));
        }
        if counts.rgb > 0 && data.rgb.is_empty() {
            return Err(Error::InvalidConfig(
                "rgb term is enabled but the dataset has no rgb entries".into(),
            ));
        }
        if counts.ssl > 0 && data.unlabeled_lr.is_empty() {
            return Err(Error::InvalidConfig(
                "ssl term is enabled but the dataset has no unlabeled entries".into(),
            ));
        }
        let bands = data.labeled[0].lr.bands();
        if bands != model.config.hsi_bands {
            return Err(Error::BandMismatch {
                expected: model.config.hsi_bands,
                got: bands,
            });
        }
        if crf.band_count() != bands {
            return Err(Error::BandMismatch {
                expected: bands,
                got: crf.band_count(),
            });
        }

        let seed = train.seed;
        let labeled = IndexStream::new(data.labeled.len(), seed, STREAM_LABELED);
        let rgb = (counts.rgb > 0).then(|| IndexStream::new(data.rgb.len(), seed, STREAM_RGB));
        let mixup =
            (counts.mixup > 0).then(|| IndexStream::new(data.labeled.len(), seed, STREAM_MIXUP));
        let ssl = (counts.ssl > 0)
            .then(|| IndexStream::new(data.unlabeled_lr.len(), seed, STREAM_SSL));
        let adam = Adam::new(&model.params);
        Ok(Trainer {
            model,
            train,
            data,
            crf,
            adam,
            labeled,
            rgb,
            mixup,
            ssl,
            mix_rng: aux_rng(seed, STREAM_MIX_MATRIX),
            epoch: 0,
            iteration: 0,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn data(&self) -> &TrainerData {
        &self.data
    }

    pub fn crf(&self) -> &CrfMatrix {
        &self.crf
    }

    pub fn adam(&self) -> &Adam {
        &self.adam
    }

    pub fn adam_mut(&mut self) -> &mut Adam {
        &mut self.adam
    }

    /// Term sequence executed by every iteration.
    pub fn iteration_plan(&self) -> Vec<Term> {
        let c = &self.train.batches_per_iter;
        let mut plan = Vec::with_capacity(c.hsi + c.rgb + c.mixup + c.ssl);
        plan.extend(std::iter::repeat_n(Term::Hsi, c.hsi));
        plan.extend(std::iter::repeat_n(Term::Rgb, c.rgb));
        plan.extend(std::iter::repeat_n(Term::Smixup, c.mixup));
        plan.extend(std::iter::repeat_n(Term::Ssl, c.ssl));
        plan
    }

    /// Capture progress and RNG positions for a checkpoint.
    pub fn state(&self) -> TrainerState {
        let (hi, lo) = rng_word_pos(&self.mix_rng);
        TrainerState {
            epoch: self.epoch,
            iteration: self.iteration,
            labeled: self.labeled.state(),
            rgb: self.rgb.as_ref().map(|s| s.state()),
            mixup: self.mixup.as_ref().map(|s| s.state()),
            ssl: self.ssl.as_ref().map(|s| s.state()),
            mix_word_pos_hi: hi,
            mix_word_pos_lo: lo,
        }
    }

    pub fn restore_state(&mut self, state: &TrainerState) -> Result<()> {
        fn pair(stream: &mut Option<IndexStream>, snap: &Option<StreamState>) -> Result<()> {
            match (stream, snap) {
                (Some(s), Some(snap)) => s.restore(snap),
                (None, None) => Ok(()),
                _ => Err(Error::MalformedCheckpoint(
                    "stream presence does not match the configured term counts".into(),
                )),
            }
        }
        self.labeled.restore(&state.labeled)?;
        pair(&mut self.rgb, &state.rgb)?;
        pair(&mut self.mixup, &state.mixup)?;
        pair(&mut self.ssl, &state.ssl)?;
        set_rng_word_pos(&mut self.mix_rng, state.mix_word_pos_hi, state.mix_word_pos_lo);
        self.epoch = state.epoch;
        self.iteration = state.iteration;
        Ok(())
    }

    /// Run one labeled-stream pass. Emits one record per term step.
    pub fn train_epoch(&mut self, sink: &mut dyn FnMut(&LogRecord)) -> Result<()> {
        let batch = self.train.effective_batch_size();
        self.labeled.start_epoch();
        while self.labeled.remaining_batches(batch) > 0 {
            self.run_iteration(batch, sink)?;
        }
        self.epoch += 1;
        Ok(())
    }

    /// Run epochs until the configured total is reached.
    pub fn train(&mut self, sink: &mut dyn FnMut(&LogRecord)) -> Result<()> {
        while self.epoch < self.train.epochs {
            self.train_epoch(sink)?;
        }
        Ok(())
    }

    fn run_iteration(&mut self, batch: usize, sink: &mut dyn FnMut(&LogRecord)) -> Result<()> {
        self.iteration += 1;
        let lr = self.train.lr_at_epoch(self.epoch);
        for term in self.iteration_plan() {
            let breakdown = match term {
                Term::Hsi => {
                    let mut idx = self.labeled.take_epoch_batch(batch);
                    if idx.is_empty() {
                        // Extra labeled steps past the end of the pass
                        // draw from the next shuffle.
                        idx = self.labeled.take_cycling(batch);
                    }
                    self.step_labeled(term, &idx, None)?
                }
                Term::Smixup => {
                    let idx = self.mixup.as_mut().unwrap().take_cycling(batch);
                    let bands = self.model.config.hsi_bands;
                    let mix = make_mixing_matrix(bands, &mut self.mix_rng)?;
                    self.step_labeled(term, &idx, Some(&mix))?
                }
                Term::Rgb => {
                    let idx = self.rgb.as_mut().unwrap().take_cycling(batch);
                    self.step_rgb(&idx)?
                }
                Term::Ssl => {
                    let idx = self.ssl.as_mut().unwrap().take_cycling(batch);
                    self.step_ssl(&idx)?
                }
            };
            if !breakdown.total.is_finite() {
                return Err(Error::NanLoss {
                    term: term.to_string(),
                    epoch: self.epoch,
                    iteration: self.iteration,
                });
            }
            sink(&LogRecord {
                epoch: self.epoch,
                iteration: self.iteration,
                term,
                l1: breakdown.l1,
                sstv: breakdown.sstv,
                total: breakdown.total,
                lr,
            });
        }
        Ok(())
    }

    fn step_labeled(
        &mut self,
        term: Term,
        indices: &[usize],
        mix: Option<&crate::augment::MixingMatrix>,
    ) -> Result<crate::loss::LossBreakdown> {
        let alpha = self.train.alpha_mixup;
        let mut tape = Tape::new();
        let bound = self.model.params.bind(&mut tape);
        let mut comps = Vec::with_capacity(indices.len());
        for &i in indices {
            let pair = &self.data.labeled[i];
            let (lr_t, hr_t): (Tensor<f32>, Tensor<f32>) = match mix {
                Some(b) => {
                    let (lr, hr) = spectral_mixup(&pair.lr, &pair.hr, alpha, b)?;
                    (cube_to_tensor(&lr), cube_to_tensor(&hr))
                }
                None => (cube_to_tensor(&pair.lr), cube_to_tensor(&pair.hr)),
            };
            let pred = self.model.forward_hsi(&mut tape, &bound, &lr_t);
            let target = tape.constant(hr_t);
            comps.push(composite_on_tape(&mut tape, pred, target));
        }
        self.finish_step(tape, &bound, term, &comps)
    }

    fn step_rgb(&mut self, indices: &[usize]) -> Result<crate::loss::LossBreakdown> {
        let mut tape = Tape::new();
        let bound = self.model.params.bind(&mut tape);
        let mut comps = Vec::with_capacity(indices.len());
        for &i in indices {
            let pair = &self.data.rgb[i];
            let lr_t = rgb_to_tensor(&pair.lr);
            let hr_t = rgb_to_tensor(&pair.hr);
            let pred = self.model.forward_rgb(&mut tape, &bound, &lr_t);
            let target = tape.constant(hr_t);
            comps.push(composite_on_tape(&mut tape, pred, target));
        }
        self.finish_step(tape, &bound, Term::Rgb, &comps)
    }

    fn step_ssl(&mut self, indices: &[usize]) -> Result<crate::loss::LossBreakdown> {
        let mut tape = Tape::new();
        let bound = self.model.params.bind(&mut tape);
        let mut comps = Vec::with_capacity(indices.len());
        for &i in indices {
            let lr_t = cube_to_tensor::<f32>(&self.data.unlabeled_lr[i]);
            comps.push(ssl_on_tape(&self.model, &mut tape, &bound, &lr_t, &self.crf));
        }
        self.finish_step(tape, &bound, Term::Ssl, &comps)
    }

    fn finish_step(
        &mut self,
        mut tape: Tape<f32>,
        bound: &Bound,
        term: Term,
        comps: &[CompositeNodes],
    ) -> Result<crate::loss::LossBreakdown> {
        let (loss, breakdown) = mean_composite(&mut tape, term, comps);
        if !breakdown.total.is_finite() {
            // Skip backward so the optimizer state stays clean; the caller
            // turns this into the fatal error with loop coordinates.
            return Ok(breakdown);
        }
        tape.backward(loss);
        let grads: Vec<Option<Tensor<f32>>> = (0..self.model.params.len())
            .map(|i| tape.grad(bound.node(ParamId(i))).cloned())
            .collect();
        let lr = self.train.lr_at_epoch(self.epoch) as f32;
        self.adam.step(&mut self.model.params, &grads, lr);
        Ok(breakdown)
    }
}

fn rgb_to_tensor(img: &RgbImage) -> Tensor<f32> {
    Tensor::from_vec([3, img.height(), img.width()], img.data().to_vec())
}

/// Mean of `window` consecutive values ending at 1-based position `at`.
pub fn moving_average(values: &[f64], window: usize, at: usize) -> f64 {
    assert!(at >= window && at <= values.len(), "window out of range");
    values[at - window..at].iter().sum::<f64>() / window as f64
}
