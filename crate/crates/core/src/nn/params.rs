//! Parameter storage shared by the model layers. Layers hold `ParamId`
//! handles; the tensors live here so they can be serialized, cast between
//! float widths, and bound onto a tape as a block.

use super::scalar::Scalar;
use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

#[derive(Clone)]
pub struct ParamSet<S> {
    tensors: Vec<Tensor<S>>,
    names: Vec<String>,
}

impl<S: Scalar> ParamSet<S> {
    pub fn new() -> Self {
        ParamSet {
            tensors: Vec::new(),
            names: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<S>) -> ParamId {
        self.tensors.push(tensor);
        self.names.push(name.into());
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor<S> {
        &self.tensors[id.0]
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<S>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Tensor<S>> {
        self.tensors.iter_mut()
    }

    /// Total scalar count across all tensors.
    pub fn flat_len(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Concatenation of all tensors in registration order.
    pub fn to_flat(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.flat_len());
        for t in &self.tensors {
            out.extend_from_slice(t.data());
        }
        out
    }

    /// Overwrite every tensor from a flat buffer written by `to_flat` on a
    /// set with identical structure.
    pub fn load_flat(&mut self, flat: &[S]) -> Result<()> {
        if flat.len() != self.flat_len() {
            return Err(Error::MalformedCheckpoint(format!(
                "parameter payload holds {} values, model needs {}",
                flat.len(),
                self.flat_len()
            )));
        }
        let mut off = 0;
        for t in &mut self.tensors {
            let n = t.numel();
            t.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn cast<T: Scalar>(&self) -> ParamSet<T> {
        ParamSet {
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
            names: self.names.clone(),
        }
    }

    /// Register every tensor on the tape as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape<S>) -> Bound {
        Bound {
            ids: self.tensors.iter().map(|t| tape.param(t.clone())).collect(),
        }
    }

    /// Register every tensor as a constant; forward-only graphs skip all
    /// gradient bookkeeping.
    pub fn bind_frozen(&self, tape: &mut Tape<S>) -> Bound {
        Bound {
            ids: self
                .tensors
                .iter()
                .map(|t| tape.constant(t.clone()))
                .collect(),
        }
    }
}

impl<S: Scalar> Default for ParamSet<S> {
    fn default() -> Self {
        ParamSet::new()
    }
}

/// Tape node handles for one binding of a `ParamSet`, parallel by index.
pub struct Bound {
    ids: Vec<NodeId>,
}

impl Bound {
    pub fn node(&self, id: ParamId) -> NodeId {
        self.ids[id.0]
    }
}
