use super::FiberModel;
use crate::error::{Error, Result};
use crate::small::combinations;
use num_complex::Complex64 as C64;
use rand::Rng;

pub type Field = Vec<C64>;

/// A bundle-valued (p,q)-form. Component k belongs to the k-th pair (I,J) in
/// lexicographic order and is the coefficient of dz_I ∧ dz̄_J.
#[derive(Clone, Debug)]
pub struct Form {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub comps: Vec<Field>,
    pub bundle: u64,
}

impl Form {
    pub fn zeros(f: &FiberModel, p: usize, q: usize) -> Form {
        let k = f.component_count(p, q);
        Form { n: f.n, p, q, comps: vec![vec![C64::new(0.0, 0.0); f.len()]; k], bundle: f.id }
    }

    pub fn from_components(f: &FiberModel, p: usize, q: usize, comps: Vec<Field>) -> Result<Form> {
        if p > f.n || q > f.n {
            return Err(Error::Shape(format!("bidegree ({p},{q}) exceeds fiber dimension {}", f.n)));
        }
        if comps.len() != f.component_count(p, q) || comps.iter().any(|c| c.len() != f.len()) {
            return Err(Error::Shape(format!(
                "({p},{q})-form needs {} fields of length {}",
                f.component_count(p, q),
                f.len()
            )));
        }
        Ok(Form { n: f.n, p, q, comps, bundle: f.id })
    }

    /// Single-component convenience for elliptic fibers.
    pub fn scalar(f: &FiberModel, p: usize, q: usize, field: Field) -> Result<Form> {
        Self::from_components(f, p, q, vec![field])
    }

    /// Form whose every component is the same function of the grid point.
    pub fn from_fn(f: &FiberModel, p: usize, q: usize, g: impl Fn(usize, &[f64], &[f64]) -> C64) -> Form {
        let mut out = Self::zeros(f, p, q);
        for (k, comp) in out.comps.iter_mut().enumerate() {
            for (i, v) in comp.iter_mut().enumerate() {
                let (x, y) = f.grid.point(i);
                *v = g(k, &x, &y);
            }
        }
        out
    }

    /// Random smooth form. Trivial bundle: a trigonometric polynomial with
    /// frequencies |k| ≤ band per axis. Elliptic fiber with degree d: the
    /// periodized sum Σ_j F(x, y+j) exp(2πi d x j) of a Gaussian envelope in y
    /// times a trigonometric polynomial in x, which respects the twist.
    pub fn random_smooth<R: Rng>(f: &FiberModel, p: usize, q: usize, band: i64, rng: &mut R) -> Form {
        let n = f.n;
        let mut out = Self::zeros(f, p, q);
        let two_pi = std::f64::consts::PI * 2.0;
        let d = if n == 1 { f.degree[0] } else { 0 };
        let width = (2 * band + 1) as usize;
        for comp in out.comps.iter_mut() {
            if d == 0 {
                let modes = width.pow(2 * n as u32);
                let coeffs: Vec<C64> =
                    (0..modes).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                for (i, v) in comp.iter_mut().enumerate() {
                    let c = f.grid.coords(i);
                    let h = 1.0 / f.size() as f64;
                    let mut s = C64::new(0.0, 0.0);
                    for (m, coef) in coeffs.iter().enumerate() {
                        let mut r = m;
                        let mut ph = 0.0;
                        for &ca in &c {
                            ph += ((r % width) as i64 - band) as f64 * ca as f64 * h;
                            r /= width;
                        }
                        s += coef * C64::from_polar(1.0, two_pi * ph);
                    }
                    *v = s;
                }
            } else {
                let coeffs: Vec<[C64; 3]> = (0..width)
                    .map(|_| {
                        [0, 1, 2].map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    })
                    .collect();
                let envelope = |x: f64, y: f64| -> C64 {
                    let mut s = C64::new(0.0, 0.0);
                    for (m, c) in coeffs.iter().enumerate() {
                        let poly = c[0] + c[1] * y + c[2] * y * y;
                        s += poly * C64::from_polar(1.0, two_pi * (m as i64 - band) as f64 * x);
                    }
                    s * (-two_pi * (y - 0.5) * (y - 0.5)).exp()
                };
                for (i, v) in comp.iter_mut().enumerate() {
                    let (x, y) = f.grid.point(i);
                    let mut s = C64::new(0.0, 0.0);
                    for j in -6i64..=6 {
                        s += envelope(x[0], y[0] + j as f64) * C64::from_polar(1.0, two_pi * (d as i64 * j) as f64 * x[0]);
                    }
                    *v = s;
                }
            }
        }
        out
    }

    pub fn same_shape(&self, o: &Form) -> Result<()> {
        if self.p != o.p || self.q != o.q || self.n != o.n {
            return Err(Error::Shape(format!(
                "bidegree mismatch: ({},{}) vs ({},{})",
                self.p, self.q, o.p, o.q
            )));
        }
        if self.bundle != o.bundle {
            return Err(Error::Shape("forms live on different fibers".into()));
        }
        Ok(())
    }

    pub fn scale(&self, s: C64) -> Form {
        let mut out = self.clone();
        out.comps.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    /// self + s·o
    pub fn axpy(&self, s: C64, o: &Form) -> Form {
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(&o.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
        out
    }

    pub fn add(&self, o: &Form) -> Form {
        self.axpy(C64::new(1.0, 0.0), o)
    }

    pub fn sub(&self, o: &Form) -> Form {
        self.axpy(C64::new(-1.0, 0.0), o)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Pointwise multiplication of every component by a scalar field.
    pub fn mul_field(&self, g: &[C64]) -> Form {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            for (x, y) in c.iter_mut().zip(g) {
                *x *= y;
            }
        }
        out
    }

    /// Complex conjugate: a (q,p)-form with conjugated, reindexed components.
    /// Its coefficients live in the conjugate bundle, so the bundle tag is kept
    /// only as a provenance marker.
    pub fn conj(&self) -> Form {
        let n = self.n;
        let holo_p = combinations(n, self.p);
        let anti_q = combinations(n, self.q);
        let holo_q = combinations(n, self.q);
        let anti_p = combinations(n, self.p);
        let sign = if (self.p * self.q) % 2 == 0 { 1.0 } else { -1.0 };
        let mut comps = vec![Vec::new(); self.comps.len()];
        for (a, i) in holo_p.iter().enumerate() {
            for (b, j) in anti_q.iter().enumerate() {
                let src = a * anti_q.len() + b;
                let ni = holo_q.iter().position(|x| x == j).unwrap();
                let nj = anti_p.iter().position(|x| x == i).unwrap();
                let dst = ni * anti_p.len() + nj;
                comps[dst] = self.comps[src].iter().map(|v| v.conj() * sign).collect();
            }
        }
        Form { n, p: self.q, q: self.p, comps, bundle: self.bundle }
    }
}

/// Weighted L² pairing ∫⟨f,g⟩_ω e^{-φ} dV.
pub fn inner(fm: &FiberModel, f: &Form, g: &Form) -> Result<C64> {
    f.same_shape(g)?;
    let w = fm.weight(f.p, f.q);
    let k = f.comps.len();
    let mut total = C64::new(0.0, 0.0);
    for i in 0..fm.len() {
        let mut s = C64::new(0.0, 0.0);
        for a in 0..k {
            for b in 0..k {
                s += f.comps[a][i] * w.mat.get(a, b) * g.comps[b][i].conj();
            }
        }
        total += s * w.field[i];
    }
    Ok(total)
}

pub fn norm2(fm: &FiberModel, f: &Form) -> f64 {
    inner(fm, f, f).map(|v| v.re).unwrap_or(f64::NAN)
}
