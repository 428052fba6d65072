//! Orthonormal type-II discrete cosine transform.
//!
//! The fast path reorders the input (even samples forward, odd samples
//! reversed), runs a complex FFT of the same length and rotates each bin by
//! `exp(-i*pi*k / 2n)`. Works for any length, not only powers of two.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Reusable fast DCT-II plan for one length.
#[derive(Clone)]
pub struct Dct2 {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
    twiddles: Vec<Complex<f64>>,
}

impl std::fmt::Debug for Dct2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct2").field("len", &self.len).finish()
    }
}

impl Dct2 {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "DCT length must be positive");
        let fft = FftPlanner::new().plan_fft_forward(len);
        let n = len as f64;
        let twiddles = (0..len)
            .map(|k| {
                let w = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
                Complex::from_polar(w, -PI * k as f64 / (2.0 * n))
            })
            .collect();
        Self { len, fft, twiddles }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Scratch buffer sized for [`Dct2::forward`].
    pub fn buffer(&self) -> Vec<Complex<f64>> {
        vec![Complex::default(); self.len + self.fft.get_inplace_scratch_len()]
    }

    /// Writes the orthonormal DCT-II of `input` into `output`.
    pub fn forward(&self, input: &[f64], output: &mut [f64], buf: &mut [Complex<f64>]) {
        let n = self.len;
        debug_assert_eq!(input.len(), n);
        debug_assert_eq!(output.len(), n);
        let (data, scratch) = buf.split_at_mut(n);
        for k in 0..n.div_ceil(2) {
            data[k] = Complex::new(input[2 * k], 0.0);
        }
        for k in 0..n / 2 {
            data[n - 1 - k] = Complex::new(input[2 * k + 1], 0.0);
        }
        self.fft.process_with_scratch(data, scratch);
        for ((o, d), t) in output.iter_mut().zip(data.iter()).zip(&self.twiddles) {
            *o = (d * t).re;
        }
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        let mut buf = self.buffer();
        self.forward(input, &mut out, &mut buf);
        out
    }
}

/// Dense orthonormal DCT-II matrix, row `k`, column `m`:
/// `c_k * cos(pi * (2m + 1) * k / 2n)`.
pub fn dct2_matrix(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|k| dct2_row(n, k)).collect()
}

/// Row `k` of [`dct2_matrix`], without forming the rest.
pub fn dct2_row(n: usize, k: usize) -> Vec<f64> {
    let nf = n as f64;
    let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
    (0..n)
        .map(|m| c * (PI * (2 * m + 1) as f64 * k as f64 / (2.0 * nf)).cos())
        .collect()
}
