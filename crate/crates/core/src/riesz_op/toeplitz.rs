//! Symmetric Toeplitz matrix-vector products, direct and via circulant
//! embedding.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// `T_{ij} = c_{|i-j|}` of order `n`, with an FFT plan for the embedding.
pub struct SymmetricToeplitz {
    first_col: Vec<f64>,
    /// Eigenvalues of the circulant embedding (real: the embedding is symmetric).
    spectrum: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SymmetricToeplitz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetricToeplitz")
            .field("n", &self.n())
            .field("embedding", &self.spectrum.len())
            .finish()
    }
}

impl SymmetricToeplitz {
    /// `first_col` is `c_0, ..., c_{n-1}`.
    pub fn new(first_col: Vec<f64>) -> Self {
        let n = first_col.len();
        assert!(n > 0, "empty Toeplitz matrix");
        let size = (2 * n).next_power_of_two();
        // [c_0, c_1, ..., c_{n-1}, 0, ..., 0, c_{n-1}, ..., c_1]
        let mut embed = vec![Complex::new(0.0, 0.0); size];
        for (k, &c) in first_col.iter().enumerate() {
            embed[k].re = c;
            if k > 0 {
                embed[size - k].re = c;
            }
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        forward.process(&mut embed);
        let spectrum = embed.iter().map(|z| z.re).collect();
        Self {
            first_col,
            spectrum,
            forward,
            inverse,
        }
    }

    pub fn n(&self) -> usize {
        self.first_col.len()
    }

    pub fn embedding_size(&self) -> usize {
        self.spectrum.len()
    }

    pub fn first_col(&self) -> &[f64] {
        &self.first_col
    }

    /// `out += alpha * T x` by the O(n²) sum.
    pub fn matvec_dense_add(&self, x: &[f64], alpha: f64, out: &mut [f64]) {
        let n = self.n();
        debug_assert_eq!(x.len(), n);
        let c = &self.first_col;
        for i in 0..n {
            let mut acc = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                acc += c[i.abs_diff(j)] * xj;
            }
            out[i] += alpha * acc;
        }
    }

    /// `out += alpha * T x` through the circulant embedding. `buf` must hold
    /// `embedding_size()` entries and `scratch` at least the FFT scratch length.
    pub fn matvec_fft_add(
        &self,
        x: &[f64],
        alpha: f64,
        out: &mut [f64],
        buf: &mut [Complex<f64>],
        scratch: &mut [Complex<f64>],
    ) {
        let n = self.n();
        let size = self.embedding_size();
        debug_assert_eq!(x.len(), n);
        for (slot, &v) in buf.iter_mut().zip(x) {
            *slot = Complex::new(v, 0.0);
        }
        for slot in buf[n..size].iter_mut() {
            *slot = Complex::new(0.0, 0.0);
        }
        self.forward.process_with_scratch(buf, scratch);
        for (z, &lam) in buf.iter_mut().zip(&self.spectrum) {
            *z *= lam;
        }
        self.inverse.process_with_scratch(buf, scratch);
        let scale = alpha / size as f64;
        for (o, z) in out.iter_mut().zip(buf.iter()) {
            *o += scale * z.re;
        }
    }

    pub fn fft_buffers(&self) -> (Vec<Complex<f64>>, Vec<Complex<f64>>) {
        let zero = Complex::new(0.0, 0.0);
        let scratch_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        (vec![zero; self.embedding_size()], vec![zero; scratch_len])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_size_is_power_of_two() {
        let t = SymmetricToeplitz::new(vec![1.0; 31]);
        assert_eq!(t.embedding_size(), 64);
        let t = SymmetricToeplitz::new(vec![1.0; 32]);
        assert_eq!(t.embedding_size(), 64);
    }

    #[test]
    fn fft_matches_dense_small() {
        let col = vec![4.0, -1.0, 0.5, 0.25, -0.125];
        let t = SymmetricToeplitz::new(col);
        let x = vec![1.0, 2.0, -3.0, 0.5, 7.0];
        let mut dense = vec![0.0; 5];
        t.matvec_dense_add(&x, 1.0, &mut dense);
        let mut fast = vec![0.0; 5];
        let (mut buf, mut scratch) = t.fft_buffers();
        t.matvec_fft_add(&x, 1.0, &mut fast, &mut buf, &mut scratch);
        for (a, b) in dense.iter().zip(&fast) {
            assert!((a - b).abs() < 1e-12);
        }
        // row 0: 4*1 - 1*2 + 0.5*(-3) + 0.25*0.5 - 0.125*7
        assert!((dense[0] - (4.0 - 2.0 - 1.5 + 0.125 - 0.875)).abs() < 1e-15);
    }
}
