use super::form::{inner, norm2};
use super::ops::{Backend, OperatorSet};
use super::{Field, FiberModel, Form};
use crate::error::{Error, Result};
use crate::linalg::{self, DMat};
use num_complex::Complex64 as C64;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Relative size below which a component counts as orthogonal.
pub const ORTHO_TOL: f64 = 1e-6;
/// Required ratio between the first non-harmonic and last harmonic eigenvalue.
pub const GAP_RATIO: f64 = 1e3;
/// Resolved-energy fraction below which a near-zero mode is a grid artifact.
/// Genuine harmonic sections sit at 1 to many digits, artifacts below 0.3.
pub const SPURIOUS_LOW_BAND: f64 = 0.5;

#[derive(Clone, Debug)]
enum Basis {
    /// eigenvectors of W^{1/2}□W^{-1/2}, one column per eigenvalue
    Dense { vectors: Arc<DMat>, index: Vec<usize> },
    /// (mode flat index, component basis vector) per eigenvalue
    Fourier { modes: Vec<(usize, usize)> },
}

#[derive(Clone, Debug)]
pub struct BidegreeSpectrum {
    pub p: usize,
    pub q: usize,
    /// eigenvalues of □'' ascending, grid artifacts excluded
    pub values: Vec<f64>,
    pub harmonic_dim: usize,
    pub harmonic_threshold: f64,
    pub gap_ratio: f64,
    /// near-zero eigenvalues of high-frequency grid modes (not harmonic)
    pub spurious_values: Vec<f64>,
    basis: Basis,
}

impl BidegreeSpectrum {
    pub fn first_nonharmonic(&self) -> Option<f64> {
        self.values.get(self.harmonic_dim).copied()
    }
}

#[derive(Debug)]
pub struct SpectralCache {
    pub ops: OperatorSet,
    slots: Mutex<HashMap<(usize, usize), Arc<OnceLock<std::result::Result<Arc<BidegreeSpectrum>, String>>>>>,
    fourier: OnceLock<FourierTable>,
}

#[derive(Debug)]
struct FourierTable {
    /// □'' eigenvalue per flat mode index, None for modes touching Nyquist
    lambda: Vec<Option<f64>>,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

impl SpectralCache {
    pub fn new(ops: &OperatorSet) -> Self {
        SpectralCache { ops: ops.clone(), slots: Mutex::new(HashMap::new()), fourier: OnceLock::new() }
    }

    pub fn fiber(&self) -> &FiberModel {
        &self.ops.fiber
    }

    fn check(&self, u: &Form) -> Result<()> {
        if u.bundle != self.ops.fiber.id {
            return Err(Error::Stale("spectral cache was built for a different fiber".into()));
        }
        Ok(())
    }

    pub fn check_ops(&self, ops: &OperatorSet) -> Result<()> {
        if ops.fiber.id != self.ops.fiber.id {
            return Err(Error::Stale("operator set and spectral cache disagree".into()));
        }
        Ok(())
    }

    /// Spectrum of □'' on (p,q)-forms, computed on first use.
    pub fn spectrum(&self, p: usize, q: usize) -> Result<Arc<BidegreeSpectrum>> {
        let n = self.ops.fiber.n;
        if p > n || q > n {
            return Err(Error::Shape(format!("bidegree ({p},{q}) out of range")));
        }
        let slot = {
            let mut m = self.slots.lock().unwrap();
            m.entry((p, q)).or_insert_with(|| Arc::new(OnceLock::new())).clone()
        };
        let r = slot.get_or_init(|| self.compute(p, q).map(Arc::new).map_err(|e| e.to_string()));
        r.clone().map_err(Error::DegenerateSpectrum)
    }

    fn compute(&self, p: usize, q: usize) -> Result<BidegreeSpectrum> {
        match self.ops.backend {
            Backend::Twisted => self.compute_dense(p, q),
            Backend::Fourier => self.compute_fourier(p, q),
        }
    }

    fn fourier_table(&self) -> &FourierTable {
        self.fourier.get_or_init(|| {
            let fm = &self.ops.fiber;
            let n = fm.n;
            let g = match &fm.metric {
                super::Metric::Constant(g) => g.clone(),
                super::Metric::Scalar(_) => unreachable!("Fourier backend uses a constant metric"),
            };
            let ginv = g.inverse().unwrap();
            let yinv = fm.im_tau.inverse().unwrap();
            let lambda = (0..fm.len())
                .map(|idx| {
                    let c = fm.grid.coords(idx);
                    let mut f = Vec::with_capacity(2 * n);
                    for &b in &c {
                        f.push(fm.grid.frequency(b)? as f64);
                    }
                    // β_k = π (Y^{-1}(τ m − l))_k
                    let v: Vec<C64> = (0..n)
                        .map(|a| {
                            let mut s = C64::new(-f[n + a], 0.0);
                            for b in 0..n {
                                s += fm.tau.get(a, b) * f[b];
                            }
                            s
                        })
                        .collect();
                    let beta = yinv.mul_vec(&v).into_iter().map(|x| x * PI).collect::<Vec<_>>();
                    let mut lam = zero();
                    for j in 0..n {
                        for k in 0..n {
                            lam += beta[j] * ginv.get(j, k) * beta[k].conj();
                        }
                    }
                    Some(lam.re)
                })
                .collect();
            FourierTable { lambda }
        })
    }

    fn compute_fourier(&self, p: usize, q: usize) -> Result<BidegreeSpectrum> {
        let fm = &self.ops.fiber;
        let table = self.fourier_table();
        let ncomp = fm.component_count(p, q);
        let mut entries: Vec<(f64, usize, usize)> = Vec::new();
        for (idx, l) in table.lambda.iter().enumerate() {
            if let Some(l) = l {
                for c in 0..ncomp {
                    entries.push((*l, idx, c));
                }
            }
        }
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let values: Vec<f64> = entries.iter().map(|e| e.0).collect();
        let r = fm.predicted_harmonic_dim(p, q);
        let (thr, gap) = threshold(&values, r)?;
        Ok(BidegreeSpectrum {
            p,
            q,
            values,
            harmonic_dim: r,
            harmonic_threshold: thr,
            gap_ratio: gap,
            spurious_values: Vec::new(),
            basis: Basis::Fourier { modes: entries.iter().map(|e| (e.1, e.2)).collect() },
        })
    }

    fn compute_dense(&self, p: usize, q: usize) -> Result<BidegreeSpectrum> {
        let fm = &self.ops.fiber;
        let m = self.ops.dense_box(p, q)?;
        let eig = linalg::herm_eig(&m)?;
        let lmax = eig.values.last().copied().unwrap_or(0.0).abs();
        let cut = 1e-7 * lmax;
        let w = fm.weight(p, q);
        let mut index = Vec::new();
        let mut spurious_index = Vec::new();
        for (k, &l) in eig.values.iter().enumerate() {
            if l < cut {
                let col = linalg::column(&eig.vectors, k);
                let f: Field = col.iter().zip(&w.field).map(|(v, s)| v / s.sqrt()).collect();
                if low_band_fraction(fm, &f) < SPURIOUS_LOW_BAND {
                    spurious_index.push(k);
                    continue;
                }
            }
            index.push(k);
        }
        let values: Vec<f64> = index.iter().map(|&k| eig.values[k]).collect();
        let spurious_values = spurious_index.iter().map(|&k| eig.values[k]).collect();
        let r = fm.predicted_harmonic_dim(p, q);
        let (thr, gap) = threshold(&values, r)?;
        Ok(BidegreeSpectrum {
            p,
            q,
            values,
            harmonic_dim: r,
            harmonic_threshold: thr,
            gap_ratio: gap,
            spurious_values,
            basis: Basis::Dense { vectors: Arc::new(eig.vectors), index },
        })
    }

    /// The k-th orthonormal eigenform (k indexes `values`).
    pub fn eigenform(&self, p: usize, q: usize, k: usize) -> Result<Form> {
        let s = self.spectrum(p, q)?;
        let fm = &self.ops.fiber;
        if k >= s.values.len() {
            return Err(Error::Shape(format!("eigenform index {k} out of range")));
        }
        match &s.basis {
            Basis::Dense { vectors, index, .. } => {
                let w = fm.weight(p, q);
                let col = linalg::column(vectors, index[k]);
                let f: Field = col.iter().zip(&w.field).map(|(v, s)| v / s.sqrt()).collect();
                Form::scalar(fm, p, q, f)
            }
            Basis::Fourier { modes } => {
                let (mode, comp) = modes[k];
                Ok(fourier_eigenform(fm, p, q, mode, comp))
            }
        }
    }

    /// Spectrum rows (bidegree, index, eigenvalue) for CSV dumps.
    pub fn spectrum_rows(&self, p: usize, q: usize, limit: usize) -> Result<Vec<(String, usize, f64)>> {
        let s = self.spectrum(p, q)?;
        Ok(s.values.iter().take(limit).enumerate().map(|(i, &v)| (format!("({p},{q})"), i, v)).collect())
    }

    /// Coefficients of u in the eigenbasis (dense backend), with index lists.
    fn dense_coeffs(&self, u: &Form, s: &BidegreeSpectrum) -> Vec<C64> {
        let fm = &self.ops.fiber;
        let Basis::Dense { vectors, .. } = &s.basis else { unreachable!() };
        let w = fm.weight(u.p, u.q);
        let len = fm.len();
        let x = DMat::from_fn(len, 1, |i, _| u.comps[0][i] * w.field[i].sqrt());
        let c = linalg::mul(&linalg::adjoint(vectors), &x);
        (0..len).map(|i| c[(i, 0)]).collect()
    }

    fn dense_synth(&self, p: usize, q: usize, s: &BidegreeSpectrum, coeffs: &[C64]) -> Result<Form> {
        let fm = &self.ops.fiber;
        let Basis::Dense { vectors, .. } = &s.basis else { unreachable!() };
        let w = fm.weight(p, q);
        let len = fm.len();
        let c = DMat::from_fn(len, 1, |i, _| coeffs[i]);
        let x = linalg::mul(vectors, &c);
        Form::scalar(fm, p, q, (0..len).map(|i| x[(i, 0)] / w.field[i].sqrt()).collect())
    }

    /// Apply a spectral multiplier m(λ, harmonic) to u; modes where it returns
    /// None are dropped. Grid artifacts are always dropped.
    fn apply_multiplier(&self, u: &Form, m: &dyn Fn(f64, bool) -> Option<C64>) -> Result<Form> {
        self.check(u)?;
        let s = self.spectrum(u.p, u.q)?;
        let fm = &self.ops.fiber;
        match &s.basis {
            Basis::Dense { index, .. } => {
                let c = self.dense_coeffs(u, &s);
                let mut out = vec![zero(); c.len()];
                for (k, &col) in index.iter().enumerate() {
                    if let Some(f) = m(s.values[k], k < s.harmonic_dim) {
                        out[col] = c[col] * f;
                    }
                }
                self.dense_synth(u.p, u.q, &s, &out)
            }
            Basis::Fourier { .. } => {
                let table = self.fourier_table();
                let mut out = u.clone();
                for comp in out.comps.iter_mut() {
                    let mut hat = fm.grid.fft_all(comp);
                    for (idx, h) in hat.iter_mut().enumerate() {
                        let f = match table.lambda[idx] {
                            Some(l) => m(l, idx == 0),
                            None => None,
                        };
                        *h = match f {
                            Some(f) => *h * f,
                            None => zero(),
                        };
                    }
                    *comp = fm.grid.ifft_all(&hat);
                }
                Ok(out)
            }
        }
    }
}

fn threshold(values: &[f64], r: usize) -> Result<(f64, f64)> {
    let lmax = values.last().copied().unwrap_or(0.0).abs().max(1e-300);
    let floor = 1e-16 * lmax;
    if values.len() <= r {
        return Err(Error::DegenerateSpectrum("fewer eigenvalues than the predicted harmonic dimension".into()));
    }
    let above = values[r];
    if r == 0 {
        let cut = 1e-7 * lmax;
        let gap = above / cut;
        if above < cut {
            return Err(Error::DegenerateSpectrum(format!(
                "smooth near-zero eigenvalue {above:.3e} where no harmonic forms are predicted"
            )));
        }
        return Ok((cut, gap));
    }
    let below = values[r - 1].max(floor);
    let gap = above / below;
    if gap < GAP_RATIO {
        return Err(Error::DegenerateSpectrum(format!(
            "gap ratio {gap:.3e} between eigenvalues {below:.3e} and {above:.3e} is below {GAP_RATIO:.0e}"
        )));
    }
    Ok(((below * above).sqrt(), gap))
}

/// Smaller of the two directional fractions of energy at frequencies below
/// N/4: along x on rows, and along y on columns conjugated to periodic
/// functions as in the twisted derivative.
pub(crate) fn low_band_fraction(fm: &FiberModel, f: &[C64]) -> f64 {
    let n = fm.size();
    let nf = n as f64;
    let d = fm.degree[0] as f64;
    let mut buf = vec![C64::new(0.0, 0.0); n];
    let (mut lx, mut ly, mut total) = (0.0, 0.0, 0.0);
    for l in 0..n {
        buf.copy_from_slice(&f[l * n..(l + 1) * n]);
        fm.grid.fft_line(&mut buf, true);
        for (b, v) in buf.iter().enumerate() {
            let m = if 2 * b >= n { b as f64 - nf } else { b as f64 };
            total += v.norm_sqr();
            if 4.0 * m.abs() < nf {
                lx += v.norm_sqr();
            }
        }
    }
    for j in 0..n {
        let q = -d * j as f64 / nf;
        for l in 0..n {
            buf[l] = f[j + l * n] * C64::from_polar(1.0, -2.0 * PI * q * l as f64 / nf);
        }
        fm.grid.fft_line(&mut buf, true);
        for (b, v) in buf.iter().enumerate() {
            let m = if 2 * b >= n { b as f64 - nf } else { b as f64 };
            let mut fr = m + q;
            fr -= (fr / nf).round() * nf;
            if 4.0 * fr.abs() < nf {
                ly += v.norm_sqr();
            }
        }
    }
    if total == 0.0 {
        1.0
    } else {
        lx.min(ly) / total
    }
}

fn fourier_eigenform(fm: &FiberModel, p: usize, q: usize, mode: usize, comp: usize) -> Form {
    let w = fm.weight(p, q);
    let eig = {
        let k = w.mat.n;
        let m = DMat::from_fn(k, k, |i, j| w.mat.get(i, j));
        linalg::herm_eig(&m).expect("small Hermitian eigenproblem")
    };
    let lam = eig.values[comp];
    let vol: f64 = w.field.iter().sum();
    let scale = 1.0 / (lam * vol).sqrt();
    let coords = fm.grid.coords(mode);
    let freqs: Vec<f64> = coords.iter().map(|&b| fm.grid.frequency(b).unwrap_or(0) as f64).collect();
    let mut out = Form::zeros(fm, p, q);
    for (a, c) in out.comps.iter_mut().enumerate() {
        let coef = eig.vectors[(a, comp)].conj() * scale;
        for (i, v) in c.iter_mut().enumerate() {
            let (x, y) = fm.grid.point(i);
            let ph: f64 = x.iter().chain(&y).zip(&freqs).map(|(t, k)| t * k).sum();
            *v = coef * C64::from_polar(1.0, 2.0 * PI * ph);
        }
    }
    out
}

/// Orthogonal projection onto harmonic forms.
pub fn harmonic_project(u: &Form, ops: &OperatorSet, cache: &SpectralCache) -> Result<Form> {
    cache.check_ops(ops)?;
    cache.apply_multiplier(u, &|_, h| if h { Some(C64::new(1.0, 0.0)) } else { None })
}

/// Solve (□'' + λ) x = u in the eigenbasis.
///
/// λ > 0: always solvable. λ = 0: u must be orthogonal to harmonic forms and
/// the harmonic part of x is zero. λ < 0: u must be orthogonal to every
/// eigenform with eigenvalue ≤ |λ| + gap tolerance.
pub fn green_shift(u: &Form, lambda: f64, ops: &OperatorSet, cache: &SpectralCache) -> Result<Form> {
    cache.check_ops(ops)?;
    let fm = &ops.fiber;
    let s = cache.spectrum(u.p, u.q)?;
    let unorm = norm2(fm, u).sqrt();
    if lambda <= 0.0 {
        let limit = if lambda == 0.0 { s.harmonic_threshold } else { -lambda + 1e-8 * lambda.abs().max(1.0) };
        let low = cache.apply_multiplier(u, &|l, h| {
            let hit = if lambda == 0.0 { h } else { l <= limit };
            hit.then_some(C64::new(1.0, 0.0))
        })?;
        let lnorm = norm2(fm, &low).sqrt();
        if lnorm > ORTHO_TOL * unorm.max(1e-300) {
            // report the eigenvalue carrying the largest share of the offending part
            let mut worst = (0.0, f64::NAN);
            for (k, &l) in s.values.iter().enumerate() {
                if (lambda == 0.0 && k >= s.harmonic_dim) || (lambda < 0.0 && l > limit) {
                    break;
                }
                let e = cache.eigenform(u.p, u.q, k)?;
                let c = inner(fm, u, &e)?.norm();
                if c > worst.0 {
                    worst = (c, l);
                }
            }
            return Err(Error::IllPosed { eigenvalue: worst.1, shift: lambda });
        }
    }
    cache.apply_multiplier(u, &|l, h| {
        if lambda == 0.0 && h {
            return None;
        }
        if lambda < 0.0 && l <= -lambda + 1e-8 * lambda.abs().max(1.0) {
            return None;
        }
        let den = if h { lambda } else { l + lambda };
        Some(C64::new(1.0 / den, 0.0))
    })
}
