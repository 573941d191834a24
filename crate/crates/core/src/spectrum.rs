//! FFT helpers shared by the analysis code and the tests.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward FFT of fixed size, reused across frames.
#[derive(Clone)]
pub struct Fourier {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("size", &self.size).finish()
    }
}

impl Fourier {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    /// Plan for `size` shared by every caller on the current thread.
    pub fn cached(size: usize) -> Self {
        thread_local! {
            static PLANS: RefCell<HashMap<usize, Fourier>> = RefCell::new(HashMap::new());
        }
        PLANS.with(|p| p.borrow_mut().entry(size).or_insert_with(|| Fourier::new(size)).clone())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bins(&self) -> usize {
        self.size / 2 + 1
    }

    /// Complex spectrum of `x`, zero-padded (or truncated) to the FFT size.
    pub fn spectrum(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = (0..self.size)
            .map(|i| Complex64::new(x.get(i).copied().unwrap_or(0.0), 0.0))
            .collect();
        thread_local! {
            static SCRATCH: RefCell<Vec<Complex64>> = const { RefCell::new(Vec::new()) };
        }
        SCRATCH.with(|s| {
            let mut scratch = s.borrow_mut();
            let need = self.forward.get_inplace_scratch_len();
            if scratch.len() < need {
                scratch.resize(need, Complex64::new(0.0, 0.0));
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch[..need]);
        });
        buf
    }

    /// `|X(k)|^2` for the non-negative frequency bins.
    pub fn power(&self, x: &[f64]) -> Vec<f64> {
        let spec = self.spectrum(x);
        spec[..self.bins()].iter().map(|c| c.norm_sqr()).collect()
    }

    /// Real signal whose spectrum is the given half spectrum (Hermitian extension).
    pub fn inverse_real(&self, half: &[Complex64]) -> Vec<f64> {
        let n = self.size;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (k, v) in half.iter().enumerate().take(self.bins()) {
            buf[k] = *v;
            if k > 0 && k < n - k {
                buf[n - k] = v.conj();
            }
        }
        self.inverse.process(&mut buf);
        buf.iter().map(|c| c.re / n as f64).collect()
    }
}

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

pub fn to_db(power: f64) -> f64 {
    10.0 * power.max(1e-300).log10()
}

/// Frequency in Hz of bin `k` for an FFT of `size` points.
pub fn bin_hz(k: usize, size: usize, sample_rate: u32) -> f64 {
    k as f64 * sample_rate as f64 / size as f64
}
