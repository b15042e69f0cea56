use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse FFT pair of one length; the inverse is normalized by `1/N`.
#[derive(Clone)]
pub(crate) struct FftPair {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    len: usize,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            len,
        }
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inv.process_with_scratch(buf, &mut self.scratch);
        let s = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

/// DFT bin frequencies in Hz, in FFT order (0, positive, then negative).
pub(crate) fn bin_freqs(len: usize, sample_rate: f64) -> Vec<f64> {
    let df = sample_rate / len as f64;
    (0..len)
        .map(|k| signed_bin(k, len) as f64 * df)
        .collect()
}

/// Signed bin index of bin `k` in FFT order.
pub(crate) fn signed_bin(k: usize, len: usize) -> i64 {
    if k < len.div_ceil(2) {
        k as i64
    } else {
        k as i64 - len as i64
    }
}
