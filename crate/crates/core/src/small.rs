//! Tiny dense complex matrices (n ≤ 3) stored row-major.

use num_complex::Complex64 as C64;

#[derive(Clone, Debug, PartialEq)]
pub struct SMat {
    pub n: usize,
    pub a: Vec<C64>,
}

impl SMat {
    pub fn zeros(n: usize) -> Self {
        SMat { n, a: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i * n + j] = rows[i][j];
            }
        }
        m
    }

    pub fn scalar(c: C64) -> Self {
        SMat { n: 1, a: vec![c] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.a[i * self.n + j] = v;
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        SMat { n: self.n, a: self.a.iter().map(|&v| f(v)).collect() }
    }

    pub fn re(&self) -> Self {
        self.map(|v| C64::new(v.re, 0.0))
    }

    pub fn im(&self) -> Self {
        self.map(|v| C64::new(v.im, 0.0))
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m.set(i, j, self.get(j, i));
            }
        }
        m
    }

    pub fn mul(&self, o: &SMat) -> SMat {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..n {
                    s += self.get(i, k) * o.get(k, j);
                }
                m.set(i, j, s);
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        (0..self.n).map(|i| (0..self.n).map(|k| self.get(i, k) * v[k]).sum()).collect()
    }

    pub fn scale(&self, s: C64) -> SMat {
        self.map(|v| v * s)
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> C64 {
        let n = self.n;
        let mut m = self.a.clone();
        let mut det = C64::new(1.0, 0.0);
        for c in 0..n {
            let piv = (c..n).max_by(|&i, &j| m[i * n + c].norm().total_cmp(&m[j * n + c].norm())).unwrap();
            if m[piv * n + c].norm() == 0.0 {
                return C64::new(0.0, 0.0);
            }
            if piv != c {
                for k in 0..n {
                    m.swap(piv * n + k, c * n + k);
                }
                det = -det;
            }
            let d = m[c * n + c];
            det *= d;
            for r in c + 1..n {
                let f = m[r * n + c] / d;
                for k in c..n {
                    let v = m[c * n + k];
                    m[r * n + k] -= f * v;
                }
            }
        }
        det
    }

    /// Inverse by Gauss–Jordan elimination; `None` if singular relative to the entry scale.
    pub fn inverse(&self) -> Option<SMat> {
        let n = self.n;
        let scale = self.max_abs().max(1e-300);
        let mut m = self.a.clone();
        let mut inv = Self::identity(n).a;
        for c in 0..n {
            let piv = (c..n).max_by(|&i, &j| m[i * n + c].norm().total_cmp(&m[j * n + c].norm())).unwrap();
            if m[piv * n + c].norm() <= 1e-14 * scale {
                return None;
            }
            for k in 0..n {
                m.swap(piv * n + k, c * n + k);
                inv.swap(piv * n + k, c * n + k);
            }
            let d = m[c * n + c].inv();
            for k in 0..n {
                m[c * n + k] *= d;
                inv[c * n + k] *= d;
            }
            for r in 0..n {
                if r == c {
                    continue;
                }
                let f = m[r * n + c];
                if f == C64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..n {
                    let (a, b) = (m[c * n + k], inv[c * n + k]);
                    m[r * n + k] -= f * a;
                    inv[r * n + k] -= f * b;
                }
            }
        }
        Some(SMat { n, a: inv })
    }

    /// Determinant of the submatrix with the given rows and columns.
    pub fn minor(&self, rows: &[usize], cols: &[usize]) -> C64 {
        let k = rows.len();
        let mut s = SMat::zeros(k);
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                s.set(i, j, self.get(r, c));
            }
        }
        s.det()
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of a Hermitian matrix with n ≤ 2.
    pub fn hermitian_min_eig(&self) -> f64 {
        match self.n {
            1 => self.a[0].re,
            2 => {
                let (a, d) = (self.a[0].re, self.a[3].re);
                let b = self.a[1].norm();
                0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt()
            }
            _ => panic!("hermitian_min_eig only for n <= 2"),
        }
    }

    pub fn hermitian_max_eig(&self) -> f64 {
        match self.n {
            1 => self.a[0].re,
            2 => {
                let (a, d) = (self.a[0].re, self.a[3].re);
                let b = self.a[1].norm();
                0.5 * (a + d) + (0.25 * (a - d) * (a - d) + b * b).sqrt()
            }
            _ => panic!("hermitian_max_eig only for n <= 2"),
        }
    }
}

/// Lexicographic k-subsets of {0..n}.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = SMat::from_rows(&[
            &[C64::new(2.0, 0.5), C64::new(0.3, 0.0)],
            &[C64::new(-1.0, 0.2), C64::new(1.0, 1.0)],
        ]);
        let p = m.mul(&m.inverse().unwrap());
        assert!((p.get(0, 0) - 1.0).norm() < 1e-14 && p.get(0, 1).norm() < 1e-14);
        assert!(SMat::zeros(2).inverse().is_none());
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(combinations(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(combinations(2, 0), vec![Vec::<usize>::new()]);
        assert_eq!(binomial(4, 2), 6);
    }
}
