//! Separable complex FFT over the `2n` periodic axes of the grid.

use crate::linalg::C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

// Lines handed to one rayon task when transforming an axis.
const LINES_PER_TASK: usize = 256;

pub(crate) struct MultiFft {
    len: usize,
    axes: usize,
    total: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl MultiFft {
    pub fn new(len: usize, axes: usize) -> Self {
        let mut planner = FftPlanner::new();
        MultiFft {
            len,
            axes,
            total: len.pow(axes as u32),
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [C64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform including the `1/total` normalization, in place.
    pub fn inverse(&self, data: &mut [C64]) {
        self.transform(data, &self.inverse);
        let norm = 1.0 / self.total as f64;
        data.par_iter_mut().for_each(|v| *v *= norm);
    }

    fn transform(&self, data: &mut [C64], fft: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.total);
        let n = self.len;
        let mut lines = vec![C64::new(0.0, 0.0); self.total];
        for axis in 0..self.axes {
            let stride = n.pow((self.axes - 1 - axis) as u32);
            if stride == 1 {
                data.par_chunks_mut(n * LINES_PER_TASK)
                    .for_each(|chunk| fft.process(chunk));
                continue;
            }
            let block = stride * n;
            let src: &[C64] = data;
            lines
                .par_chunks_mut(n * LINES_PER_TASK)
                .enumerate()
                .for_each(|(c, chunk)| {
                    for (l, line) in chunk.chunks_mut(n).enumerate() {
                        let id = c * LINES_PER_TASK + l;
                        let base = (id / stride) * block + id % stride;
                        for (i, v) in line.iter_mut().enumerate() {
                            *v = src[base + i * stride];
                        }
                    }
                    fft.process(chunk);
                });
            let lines_ref: &[C64] = &lines;
            data.par_chunks_mut(block)
                .enumerate()
                .for_each(|(outer, blk)| {
                    for (rem, v) in blk.iter_mut().enumerate() {
                        let i = rem / stride;
                        let o = rem % stride;
                        *v = lines_ref[(outer * stride + o) * n + i];
                    }
                });
        }
    }
}
