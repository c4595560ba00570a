//! Second-order Taylor jets of complex-valued functions of a few real
//! variables. Used to differentiate the analytic family data (period map and
//! weight) exactly at grid points.

use num_complex::Complex64 as C64;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub const MAX_VARS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub nv: usize,
    pub v: C64,
    pub g: [C64; MAX_VARS],
    pub h: [[C64; MAX_VARS]; MAX_VARS],
}

const Z: C64 = C64 { re: 0.0, im: 0.0 };

impl Jet {
    pub fn constant(nv: usize, c: C64) -> Self {
        assert!(nv <= MAX_VARS);
        Jet { nv, v: c, g: [Z; MAX_VARS], h: [[Z; MAX_VARS]; MAX_VARS] }
    }

    pub fn real(nv: usize, c: f64) -> Self {
        Self::constant(nv, C64::new(c, 0.0))
    }

    /// The coordinate function x_k evaluated at `value`.
    pub fn var(nv: usize, k: usize, value: f64) -> Self {
        let mut j = Self::real(nv, value);
        j.g[k] = C64::new(1.0, 0.0);
        j
    }

    /// Complex coordinate w = x_k + i x_{k+1}.
    pub fn complex_var(nv: usize, k: usize, value: C64) -> Self {
        let mut j = Self::constant(nv, value);
        j.g[k] = C64::new(1.0, 0.0);
        j.g[k + 1] = C64::new(0.0, 1.0);
        j
    }

    fn map_all(&self, f: impl Fn(C64) -> C64) -> Self {
        let mut out = *self;
        out.v = f(self.v);
        for i in 0..self.nv {
            out.g[i] = f(self.g[i]);
            for k in 0..self.nv {
                out.h[i][k] = f(self.h[i][k]);
            }
        }
        out
    }

    /// Apply a scalar function given its value and first two derivatives.
    pub fn chain(&self, f0: C64, f1: C64, f2: C64) -> Self {
        let mut out = Self::constant(self.nv, f0);
        for i in 0..self.nv {
            out.g[i] = f1 * self.g[i];
        }
        for i in 0..self.nv {
            for k in 0..self.nv {
                out.h[i][k] = f1 * self.h[i][k] + f2 * self.g[i] * self.g[k];
            }
        }
        out
    }

    pub fn re(&self) -> Self {
        self.map_all(|c| C64::new(c.re, 0.0))
    }

    pub fn im(&self) -> Self {
        self.map_all(|c| C64::new(c.im, 0.0))
    }

    pub fn conj(&self) -> Self {
        self.map_all(|c| c.conj())
    }

    pub fn abs2(&self) -> Self {
        *self * self.conj()
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let inv = self.v.inv();
        self.chain(self.v.ln(), inv, -inv * inv)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(c, -s, -c)
    }

    pub fn recip(&self) -> Self {
        let inv = self.v.inv();
        self.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut out = Self::real(self.nv, 1.0);
        for _ in 0..k {
            out = out * *self;
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map_all(|c| c * s)
    }

    /// Wirtinger derivative d/dw for w = x_k + i x_{k+1}.
    pub fn d_holo(&self, k: usize) -> C64 {
        0.5 * (self.g[k] - C64::i() * self.g[k + 1])
    }

    pub fn d_anti(&self, k: usize) -> C64 {
        0.5 * (self.g[k] + C64::i() * self.g[k + 1])
    }

    /// d^2 / dw_a d(conj w_b) with w_a at real index a, w_b at real index b.
    pub fn d_holo_anti(&self, a: usize, b: usize) -> C64 {
        let i = C64::i();
        let h = &self.h;
        0.25 * (h[a][b] + i * h[a][b + 1] - i * h[a + 1][b] + h[a + 1][b + 1])
    }

    /// d^2 / dw_a dw_b.
    pub fn d_holo_holo(&self, a: usize, b: usize) -> C64 {
        let i = C64::i();
        let h = &self.h;
        0.25 * (h[a][b] - i * h[a][b + 1] - i * h[a + 1][b] - h[a + 1][b + 1])
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut out = self;
        out.v += o.v;
        for i in 0..self.nv {
            out.g[i] += o.g[i];
            for k in 0..self.nv {
                out.h[i][k] += o.h[i][k];
            }
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map_all(|c| -c)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.nv, self.v * o.v);
        for i in 0..self.nv {
            out.g[i] = self.g[i] * o.v + self.v * o.g[i];
        }
        for i in 0..self.nv {
            for k in 0..self.nv {
                out.h[i][k] = self.h[i][k] * o.v
                    + self.v * o.h[i][k]
                    + self.g[i] * o.g[k]
                    + self.g[k] * o.g[i];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        let mut out = self;
        out.v += c;
        out
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(C64::new(c, 0.0))
    }
}

impl Mul<C64> for Jet {
    type Output = Jet;
    fn mul(self, c: C64) -> Jet {
        self.scale(c)
    }
}
