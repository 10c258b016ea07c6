//! Fourier-spectral operators on the periodic N×N grid of the unit torus.
//!
//! The Laplacian is exact on the resolved modes (grid frequencies
//! `k ∈ [-N/2, N/2)` in each direction), which is what makes the uniform
//! grid the right discretisation for the periodic problem.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub struct Spectral2d {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_scratch_len: usize,
    inv_scratch_len: usize,
    /// -4π²|k|² per (row-major) mode.
    lap_symbol: Vec<f64>,
}

/// Integer frequency of mode index `i` on an `n`-grid.
fn freq(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

impl Spectral2d {
    pub fn new(n: usize) -> Self {
        assert!(n >= 4 && n.is_power_of_two(), "grid size must be a power of two");
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut lap_symbol = vec![0.0; n * n];
        for iy in 0..n {
            for ix in 0..n {
                let kx = freq(ix, n);
                let ky = freq(iy, n);
                lap_symbol[iy * n + ix] =
                    -4.0 * std::f64::consts::PI * std::f64::consts::PI * (kx * kx + ky * ky);
            }
        }
        let fwd_scratch_len = fwd.get_inplace_scratch_len();
        let inv_scratch_len = inv.get_inplace_scratch_len();
        Spectral2d { n, fwd, inv, fwd_scratch_len, inv_scratch_len, lap_symbol }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() / f.len() as f64
    }

    fn rows_fft(&self, data: &mut [Complex<f64>], forward: bool) {
        let n = self.n;
        let (fft, scratch_len) = if forward {
            (&self.fwd, self.fwd_scratch_len)
        } else {
            (&self.inv, self.inv_scratch_len)
        };
        data.par_chunks_mut(n).for_each_init(
            || vec![Complex::new(0.0, 0.0); scratch_len],
            |scratch, row| fft.process_with_scratch(row, scratch),
        );
    }

    fn transpose(&self, data: &[Complex<f64>], out: &mut [Complex<f64>]) {
        let n = self.n;
        const B: usize = 64;
        for bi in (0..n).step_by(B) {
            for bj in (0..n).step_by(B) {
                for i in bi..(bi + B).min(n) {
                    for j in bj..(bj + B).min(n) {
                        out[j * n + i] = data[i * n + j];
                    }
                }
            }
        }
    }

    /// Forward 2-D transform (unnormalised) of a real field.
    pub fn forward(&self, f: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.rows_fft(&mut buf, true);
        let mut t = vec![Complex::new(0.0, 0.0); buf.len()];
        self.transpose(&buf, &mut t);
        self.rows_fft(&mut t, true);
        let mut out = vec![Complex::new(0.0, 0.0); buf.len()];
        self.transpose(&t, &mut out);
        out
    }

    /// Inverse transform back to a real field, including the 1/N² scaling.
    pub fn inverse(&self, mut buf: Vec<Complex<f64>>) -> Vec<f64> {
        self.rows_fft(&mut buf, false);
        let mut t = vec![Complex::new(0.0, 0.0); buf.len()];
        self.transpose(&buf, &mut t);
        self.rows_fft(&mut t, false);
        let mut out = vec![Complex::new(0.0, 0.0); buf.len()];
        self.transpose(&t, &mut out);
        let scale = 1.0 / (self.n * self.n) as f64;
        out.iter().map(|c| c.re * scale).collect()
    }

    /// Spectral Laplacian.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let mut hat = self.forward(f);
        for (c, &s) in hat.iter_mut().zip(&self.lap_symbol) {
            *c *= s;
        }
        self.inverse(hat)
    }

    /// `(Δ - shift)^{-1} f` for `shift > 0`.
    pub fn solve_shifted(&self, f: &[f64], shift: f64) -> Vec<f64> {
        assert!(shift > 0.0);
        let mut hat = self.forward(f);
        for (c, &s) in hat.iter_mut().zip(&self.lap_symbol) {
            *c *= 1.0 / (s - shift);
        }
        self.inverse(hat)
    }

    /// Spectral gradient (Nyquist mode dropped, as usual for real fields).
    pub fn gradient(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let hat = self.forward(f);
        let mut gx = hat.clone();
        let mut gy = hat;
        let two_pi = 2.0 * std::f64::consts::PI;
        for iy in 0..n {
            for ix in 0..n {
                let kx = if ix == n / 2 { 0.0 } else { freq(ix, n) };
                let ky = if iy == n / 2 { 0.0 } else { freq(iy, n) };
                let idx = iy * n + ix;
                gx[idx] *= Complex::new(0.0, two_pi * kx);
                gy[idx] *= Complex::new(0.0, two_pi * ky);
            }
        }
        (self.inverse(gx), self.inverse(gy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn laplacian_of_plane_wave() {
        let n = 64;
        let sp = Spectral2d::new(n);
        let mut f = vec![0.0; n * n];
        for iy in 0..n {
            for ix in 0..n {
                let x = ix as f64 / n as f64;
                let y = iy as f64 / n as f64;
                f[iy * n + ix] = (2.0 * std::f64::consts::PI * (3.0 * x - 2.0 * y)).cos();
            }
        }
        let lap = sp.laplacian(&f);
        let expect = -4.0 * std::f64::consts::PI * std::f64::consts::PI * 13.0;
        for (l, v) in lap.iter().zip(&f) {
            assert_relative_eq!(*l, expect * v, epsilon = 1e-9);
        }
    }

    #[test]
    fn shifted_solve_inverts_shifted_laplacian() {
        let n = 32;
        let sp = Spectral2d::new(n);
        let f: Vec<f64> = (0..n * n).map(|i| ((i * 37 + 11) % 101) as f64 / 101.0).collect();
        let shift = 7.0;
        let u = sp.solve_shifted(&f, shift);
        let mut back = sp.laplacian(&u);
        for (b, &ui) in back.iter_mut().zip(&u) {
            *b -= shift * ui;
        }
        for (b, &fi) in back.iter().zip(&f) {
            assert_relative_eq!(*b, fi, epsilon = 1e-9);
        }
    }

    #[test]
    fn gradient_of_plane_wave() {
        let n = 64;
        let sp = Spectral2d::new(n);
        let mut f = vec![0.0; n * n];
        for iy in 0..n {
            for ix in 0..n {
                let x = ix as f64 / n as f64;
                let y = iy as f64 / n as f64;
                f[iy * n + ix] = (2.0 * std::f64::consts::PI * (x + 4.0 * y)).sin();
            }
        }
        let (gx, gy) = sp.gradient(&f);
        for iy in 0..n {
            for ix in 0..n {
                let x = ix as f64 / n as f64;
                let y = iy as f64 / n as f64;
                let c = (2.0 * std::f64::consts::PI * (x + 4.0 * y)).cos();
                let tp = 2.0 * std::f64::consts::PI;
                assert_relative_eq!(gx[iy * n + ix], tp * c, epsilon = 1e-9);
                assert_relative_eq!(gy[iy * n + ix], 4.0 * tp * c, epsilon = 1e-9);
            }
        }
    }
}
