//! Uniform periodic grids on the real torus [0,1)^{2n} and spectral
//! derivatives along single axes.
//!
//! Flat index layout: coordinate a (x_1..x_n, then y_1..y_n) has stride N^a,
//! so axis 0 varies fastest.

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone)]
pub struct Grid {
    pub n: usize,
    pub size: usize,
    pub len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Grid(n={}, N={})", self.n, self.size)
    }
}

impl Grid {
    pub fn new(n: usize, size: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        Grid { n, size, len: size.pow(2 * n as u32), fwd, inv }
    }

    pub fn dims(&self) -> usize {
        2 * self.n
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.size.pow(axis as u32)
    }

    /// Integer coordinates of a flat index.
    pub fn coords(&self, idx: usize) -> Vec<usize> {
        let mut c = Vec::with_capacity(self.dims());
        let mut r = idx;
        for _ in 0..self.dims() {
            c.push(r % self.size);
            r /= self.size;
        }
        c
    }

    /// Real coordinates (x, y) of a flat index, each in [0,1).
    pub fn point(&self, idx: usize) -> (Vec<f64>, Vec<f64>) {
        let c = self.coords(idx);
        let h = 1.0 / self.size as f64;
        let x = c[..self.n].iter().map(|&k| k as f64 * h).collect();
        let y = c[self.n..].iter().map(|&k| k as f64 * h).collect();
        (x, y)
    }

    /// Signed integer frequency of FFT bin `b`, Nyquist mapped to `None`.
    pub fn frequency(&self, b: usize) -> Option<i64> {
        let n = self.size as i64;
        let b = b as i64;
        if 2 * b == n {
            None
        } else if 2 * b < n {
            Some(b)
        } else {
            Some(b - n)
        }
    }

    /// Multiply each line along `axis` in Fourier space by `mult(line_start, bin)`.
    pub fn apply_axis(&self, f: &[C64], axis: usize, mult: &dyn Fn(usize, usize) -> C64) -> Vec<C64> {
        let n = self.size;
        let stride = self.stride(axis);
        let mut out = vec![C64::new(0.0, 0.0); self.len];
        let mut buf = vec![C64::new(0.0, 0.0); n];
        let scale = 1.0 / n as f64;
        for start in 0..self.len {
            if (start / stride) % n != 0 {
                continue;
            }
            for k in 0..n {
                buf[k] = f[start + k * stride];
            }
            self.fwd.process(&mut buf);
            for (b, v) in buf.iter_mut().enumerate() {
                *v *= mult(start, b) * scale;
            }
            self.inv.process(&mut buf);
            for k in 0..n {
                out[start + k * stride] = buf[k];
            }
        }
        out
    }

    /// Periodic spectral derivative d/d(coordinate axis); Nyquist bin zeroed.
    pub fn deriv(&self, f: &[C64], axis: usize) -> Vec<C64> {
        self.apply_axis(f, axis, &|_, b| match self.frequency(b) {
            Some(k) => C64::new(0.0, 2.0 * PI * k as f64),
            None => C64::new(0.0, 0.0),
        })
    }

    pub fn deriv_real(&self, f: &[f64], axis: usize) -> Vec<f64> {
        let c: Vec<C64> = f.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.deriv(&c, axis).into_iter().map(|v| v.re).collect()
    }

    /// In-place unnormalized transform of one line of length N.
    pub fn fft_line(&self, buf: &mut [C64], forward: bool) {
        if forward {
            self.fwd.process(buf);
        } else {
            self.inv.process(buf);
        }
    }

    /// Full forward transform over all axes (unnormalized).
    pub fn fft_all(&self, f: &[C64]) -> Vec<C64> {
        let mut g = f.to_vec();
        for axis in 0..self.dims() {
            g = self.transform_axis(&g, axis, true);
        }
        g
    }

    pub fn ifft_all(&self, f: &[C64]) -> Vec<C64> {
        let mut g = f.to_vec();
        for axis in 0..self.dims() {
            g = self.transform_axis(&g, axis, false);
        }
        let s = 1.0 / self.len as f64;
        g.iter_mut().for_each(|v| *v *= s);
        g
    }

    fn transform_axis(&self, f: &[C64], axis: usize, forward: bool) -> Vec<C64> {
        let n = self.size;
        let stride = self.stride(axis);
        let mut out = f.to_vec();
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for start in 0..self.len {
            if (start / stride) % n != 0 {
                continue;
            }
            for k in 0..n {
                buf[k] = f[start + k * stride];
            }
            if forward {
                self.fwd.process(&mut buf);
            } else {
                self.inv.process(&mut buf);
            }
            for k in 0..n {
                out[start + k * stride] = buf[k];
            }
        }
        out
    }

    /// Mean value (grid quadrature with unit total weight).
    pub fn mean(&self, f: &[C64]) -> C64 {
        f.iter().sum::<C64>() / self.len as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_trigonometric_polynomial_is_exact() {
        let g = Grid::new(1, 16);
        let f: Vec<C64> = (0..g.len)
            .map(|i| {
                let (x, y) = g.point(i);
                C64::new((2.0 * PI * 3.0 * x[0]).sin() * (2.0 * PI * y[0]).cos(), 0.0)
            })
            .collect();
        let dx = g.deriv(&f, 0);
        for i in 0..g.len {
            let (x, y) = g.point(i);
            let e = 6.0 * PI * (2.0 * PI * 3.0 * x[0]).cos() * (2.0 * PI * y[0]).cos();
            assert!((dx[i].re - e).abs() < 1e-11);
        }
    }

    #[test]
    fn round_trip_fft() {
        let g = Grid::new(2, 4);
        let f: Vec<C64> = (0..g.len).map(|i| C64::new(i as f64, (i * i % 7) as f64)).collect();
        let back = g.ifft_all(&g.fft_all(&f));
        for (a, b) in f.iter().zip(back.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
