//! Dense rank-3 tensors in channel-major (c, h, w) layout. Scalars are
//! (1,1,1); per-channel vectors are (c,1,1); conv weights are
//! (out_c, in_c, k*k).

use super::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    shape: [usize; 3],
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Tensor {
            shape,
            data: vec![S::ZERO; shape[0] * shape[1] * shape[2]],
        }
    }

    pub fn from_vec(shape: [usize; 3], data: Vec<S>) -> Self {
        assert_eq!(
            data.len(),
            shape[0] * shape[1] * shape[2],
            "tensor payload does not match shape {shape:?}"
        );
        Tensor { shape, data }
    }

    pub fn scalar(v: S) -> Self {
        Tensor {
            shape: [1, 1, 1],
            data: vec![v],
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn item(&self) -> S {
        debug_assert_eq!(self.numel(), 1);
        self.data[0]
    }

    pub fn at(&self, c: usize, h: usize, w: usize) -> S {
        self.data[(c * self.shape[1] + h) * self.shape[2] + w]
    }

    pub fn channel(&self, c: usize) -> &[S] {
        let plane = self.shape[1] * self.shape[2];
        &self.data[c * plane..(c + 1) * plane]
    }

    /// Contiguous copy of channels [start, start + count).
    pub fn band_window(&self, start: usize, count: usize) -> Tensor<S> {
        assert!(start + count <= self.shape[0], "band window out of range");
        let plane = self.shape[1] * self.shape[2];
        Tensor {
            shape: [count, self.shape[1], self.shape[2]],
            data: self.data[start * plane..(start + count) * plane].to_vec(),
        }
    }

    /// Convert element type, used to lift f32 parameters to f64 checks.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| T::from_f64(v.to_f64())).collect(),
        }
    }
}

impl Tensor<f32> {
    pub fn from_f32_slice(shape: [usize; 3], data: &[f32]) -> Self {
        Tensor::from_vec(shape, data.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_channel_major() {
        let t = Tensor::from_vec([2, 2, 3], (0..12).map(|v| v as f32).collect());
        assert_eq!(t.at(0, 0, 0), 0.0);
        assert_eq!(t.at(0, 1, 2), 5.0);
        assert_eq!(t.at(1, 0, 0), 6.0);
        assert_eq!(t.channel(1), &[6.0, 7.0, 8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn cast_round_trips() {
        let t = Tensor::from_vec([1, 1, 3], vec![0.25f32, -1.5, 3.0]);
        let d: Tensor<f64> = t.cast();
        let back: Tensor<f32> = d.cast();
        assert_eq!(t, back);
    }
}
