//! Adam optimizer over a `ParamSet<f32>`. Tensors whose gradient is
//! absent in a step (branches the current loss never touched) keep their
//! moments and per-tensor step count unchanged.

use crate::error::{Error, Result};
use crate::nn::{ParamSet, Tensor};

pub const ADAM_BETA1: f32 = 0.9;
pub const ADAM_BETA2: f32 = 0.999;
pub const ADAM_EPS: f32 = 1e-8;

pub struct Adam {
    m: Vec<Tensor<f32>>,
    v: Vec<Tensor<f32>>,
    steps: Vec<u64>,
}

impl Adam {
    pub fn new(params: &ParamSet<f32>) -> Self {
        let m: Vec<Tensor<f32>> = params
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape()))
            .collect();
        Adam {
            v: m.clone(),
            steps: vec![0; m.len()],
            m,
        }
    }

    /// One update with the given learning rate. `grads` is parallel to the
    /// parameter set; `None` skips that tensor.
    pub fn step(&mut self, params: &mut ParamSet<f32>, grads: &[Option<Tensor<f32>>], lr: f32) {
        assert_eq!(grads.len(), params.len(), "gradient list length mismatch");
        for (i, grad) in grads.iter().enumerate() {
            let Some(g) = grad else { continue };
            self.steps[i] += 1;
            let t = self.steps[i] as i32;
            let bc1 = 1.0 - ADAM_BETA1.powi(t);
            let bc2 = 1.0 - ADAM_BETA2.powi(t);
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params.tensor_mut(crate::nn::ParamId(i)).data_mut();
            for ((pv, (mv, vv)), &gv) in
                p.iter_mut().zip(m.iter_mut().zip(v.iter_mut())).zip(g.data())
            {
                *mv = ADAM_BETA1 * *mv + (1.0 - ADAM_BETA1) * gv;
                *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * gv * gv;
                let mhat = *mv / bc1;
                let vhat = *vv / bc2;
                *pv -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
    }

    /// Moments and step counters flattened for checkpointing: all first
    /// moments in parameter order, then all second moments.
    pub fn to_flat(&self) -> (Vec<f32>, Vec<u64>) {
        let mut flat = Vec::new();
        for t in &self.m {
            flat.extend_from_slice(t.data());
        }
        for t in &self.v {
            flat.extend_from_slice(t.data());
        }
        (flat, self.steps.clone())
    }

    pub fn load_flat(&mut self, flat: &[f32], steps: &[u64]) -> Result<()> {
        let want: usize = self.m.iter().map(Tensor::numel).sum::<usize>() * 2;
        if flat.len() != want {
            return Err(Error::MalformedCheckpoint(format!(
                "optimizer payload holds {} values, expected {}",
                flat.len(),
                want
            )));
        }
        if steps.len() != self.steps.len() {
            return Err(Error::MalformedCheckpoint(format!(
                "optimizer step list has {} entries, expected {}",
                steps.len(),
                self.steps.len()
            )));
        }
        let mut off = 0;
        for t in self.m.iter_mut().chain(self.v.iter_mut()) {
            let n = t.numel();
            t.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        self.steps.copy_from_slice(steps);
        Ok(())
    }
}
