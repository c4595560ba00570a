//! Dolbeault calculus on one flat torus fiber with values in a Hermitian line
//! bundle.
//!
//! Sections are stored in the unitary Landau-gauge frame: on an elliptic fiber
//! with degree d a coefficient field s satisfies s(x+1,y) = s(x,y) and
//! s(x,y+1) = exp(-2πi d x) s(x,y). The weight e^{-φ} is absorbed into the
//! frame, so inner products only carry the Kähler metric and volume.

mod form;
mod identities;
mod lefschetz;
mod ops;
mod spectral;

pub use form::{inner, norm2, Field, Form};
pub use identities::{green_identity, GreenCheck, PairBuilder, Regime};
pub use lefschetz::{lefschetz_decompose, omega_form, primitive_test, top_pairing, wedge_forms};
pub(crate) use lefschetz::{mask as form_mask, wedge_sign};
pub use ops::{Backend, LinkPhases, OperatorSet};
pub use spectral::{green_shift, harmonic_project, BidegreeSpectrum, SpectralCache};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::small::{binomial, combinations, SMat};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KahlerChoice {
    /// ω = ±i∂∂̄φ restricted to the fiber, sign chosen by the degree.
    FromWeight,
    /// Translation-invariant ω = (i/2) Σ (Im τ)^{-1}_{jk} dz_j∧dz̄_k, unit volume.
    ModelFlat,
}

/// Pointwise Kähler metric g_{jk̄}.
#[derive(Clone, Debug)]
pub enum Metric {
    Constant(SMat),
    /// n = 1 only: ω = i g dz∧dz̄ with g sampled on the grid.
    Scalar(Vec<f64>),
}

/// Per-bidegree quadrature weight: W(x) = field(x) · mat, acting on the
/// component vector of a form.
#[derive(Clone, Debug)]
pub struct Weight {
    pub field: Vec<f64>,
    pub mat: SMat,
    /// conj(mat)^{-1}, used to raise indices after the plain adjoint
    pub mat_lower_inv: SMat,
}

#[derive(Clone, Debug)]
pub struct FiberModel {
    pub id: u64,
    pub n: usize,
    pub tau: SMat,
    pub im_tau: SMat,
    pub grid: Grid,
    pub degree: Vec<i32>,
    pub phi_s: Vec<f64>,
    pub kahler: KahlerChoice,
    pub metric: Metric,
    /// volume element per grid point, including the 1/N^{2n} quadrature factor
    pub dv: Vec<f64>,
    /// ∂φ_s/∂z_k and ∂φ_s/∂z̄_k
    pub dphi_z: Vec<Field>,
    pub dphi_zb: Vec<Field>,
    /// (2i Im τ)^{-1}
    pub c: SMat,
}

fn c0() -> C64 {
    C64::new(0.0, 0.0)
}

impl FiberModel {
    pub fn new(tau: SMat, grid_size: usize, degree: Vec<i32>, phi_s: Vec<f64>, kahler: KahlerChoice) -> Result<Self> {
        let n = tau.n;
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidFiber(format!("fiber dimension {n} not supported")));
        }
        if degree.len() != n {
            return Err(Error::InvalidFiber("degree vector length must equal n".into()));
        }
        let im_tau = tau.im();
        let min_eig = im_tau.hermitian_min_eig();
        if !(min_eig > 0.0) {
            return Err(Error::InvalidFiber(format!("Im τ is not positive definite (min eigenvalue {min_eig:.3e})")));
        }
        if grid_size < 8 || grid_size % 2 != 0 {
            return Err(Error::Resolution("grid_size must be even, ≥ 8".into()));
        }
        let grid = Grid::new(n, grid_size);
        if phi_s.len() != grid.len || phi_s.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFiber("weight perturbation must be finite and sampled on the grid".into()));
        }
        let nonzero_degree = degree.iter().any(|&d| d != 0);
        if n == 2 && nonzero_degree {
            return Err(Error::UnsupportedRegime("abelian-surface fibers support only degree-zero bundles".into()));
        }
        let c = im_tau.scale(C64::new(0.0, 2.0)).inverse().expect("Im τ checked above");

        let phi_c: Field = phi_s.iter().map(|&v| C64::new(v, 0.0)).collect();
        let dphi_z: Vec<Field> = (0..n).map(|k| plain_dz(&grid, &tau, &c, k, &phi_c)).collect();
        let dphi_zb: Vec<Field> = (0..n).map(|k| plain_dzb(&grid, &tau, &c, k, &phi_c)).collect();

        let vol_factor = 2f64.powi(n as i32) * im_tau.det().re / grid.len as f64;
        let (metric, dv) = match kahler {
            KahlerChoice::ModelFlat => {
                let g = im_tau.inverse().unwrap().scale(C64::new(0.5, 0.0));
                let dv = vec![vol_factor * g.det().re; grid.len];
                (Metric::Constant(g), dv)
            }
            KahlerChoice::FromWeight => {
                if n != 1 || !nonzero_degree {
                    return Err(Error::InvalidFiber(
                        "the from-weight Kähler form needs an elliptic fiber with nonzero degree".into(),
                    ));
                }
                let d = degree[0] as f64;
                let t2 = im_tau.a[0].re;
                let hess = plain_dz(&grid, &tau, &c, 0, &dphi_zb[0]);
                let mut g = Vec::with_capacity(grid.len);
                for (i, h) in hess.iter().enumerate() {
                    let gi = PI * d.abs() / t2 + d.signum() * h.re;
                    if !(gi > 0.0) {
                        return Err(Error::DegenerateMetric {
                            index: i,
                            detail: format!("fiber metric coefficient {gi:.3e} is not positive"),
                        });
                    }
                    g.push(gi);
                }
                let dv = g.iter().map(|&gi| vol_factor * gi).collect();
                (Metric::Scalar(g), dv)
            }
        };
        Ok(FiberModel {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            n,
            tau,
            im_tau,
            grid,
            degree,
            phi_s,
            kahler,
            metric,
            dv,
            dphi_z,
            dphi_zb,
            c,
        })
    }

    /// Model elliptic fiber with τ, degree d and zero perturbation.
    pub fn elliptic(tau: C64, grid_size: usize, d: i32, kahler: KahlerChoice) -> Result<Self> {
        let len = grid_size * grid_size;
        Self::new(SMat::scalar(tau), grid_size, vec![d], vec![0.0; len], kahler)
    }

    pub fn len(&self) -> usize {
        self.grid.len
    }

    pub fn is_empty(&self) -> bool {
        self.grid.len == 0
    }

    pub fn size(&self) -> usize {
        self.grid.size
    }

    pub fn d(&self) -> i32 {
        self.degree[0]
    }

    pub fn volume(&self) -> f64 {
        self.dv.iter().sum()
    }

    /// Whether ∂∂̄φ restricted to the fiber vanishes (degree zero, φ_s constant).
    pub fn is_fiber_flat(&self) -> bool {
        let scale = self.phi_s.iter().map(|v| v.abs()).fold(1.0, f64::max);
        self.degree.iter().all(|&d| d == 0) && self.phi_s.iter().all(|v| (v - self.phi_s[0]).abs() <= 1e-12 * scale)
    }

    pub fn metric_at(&self, idx: usize) -> SMat {
        match &self.metric {
            Metric::Constant(g) => g.clone(),
            Metric::Scalar(g) => SMat::scalar(C64::new(g[idx], 0.0)),
        }
    }

    pub fn components(&self, p: usize, q: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut out = Vec::new();
        for i in combinations(self.n, p) {
            for j in combinations(self.n, q) {
                out.push((i.clone(), j));
            }
        }
        out
    }

    pub fn component_count(&self, p: usize, q: usize) -> usize {
        binomial(self.n, p) * binomial(self.n, q)
    }

    /// Quadrature weight for (p,q)-forms.
    pub fn weight(&self, p: usize, q: usize) -> Weight {
        let comps = self.components(p, q);
        let k = comps.len();
        match &self.metric {
            Metric::Constant(g) => {
                let ginv = g.inverse().expect("metric is positive definite");
                let mut mat = SMat::zeros(k);
                for (a, (ia, ja)) in comps.iter().enumerate() {
                    for (b, (ib, jb)) in comps.iter().enumerate() {
                        let holo = ginv.minor(ia, ib);
                        let anti = ginv.minor(ja, jb).conj();
                        mat.set(a, b, holo * anti);
                    }
                }
                let inv = mat.conj().inverse().expect("component metric is positive definite");
                Weight { field: self.dv.clone(), mat, mat_lower_inv: inv }
            }
            Metric::Scalar(g) => {
                let field = self.dv.iter().zip(g).map(|(dv, gi)| dv * gi.powi(-((p + q) as i32))).collect();
                Weight { field, mat: SMat::identity(k), mat_lower_inv: SMat::identity(k) }
            }
        }
    }

    /// Predicted harmonic dimension of (p,q)-forms from Riemann–Roch and the
    /// Betti numbers of the torus.
    pub fn predicted_harmonic_dim(&self, p: usize, q: usize) -> usize {
        if self.degree.iter().all(|&d| d == 0) {
            return binomial(self.n, p) * binomial(self.n, q);
        }
        let d = self.degree[0];
        let m = d.unsigned_abs() as usize;
        match (d > 0, q) {
            (true, 0) => m,
            (false, 1) => m,
            _ => 0,
        }
    }
}

/// Periodic spectral ∂/∂z_k of a scalar field, no connection terms.
pub(crate) fn plain_dz(grid: &Grid, tau: &SMat, c: &SMat, k: usize, f: &[C64]) -> Field {
    let n = tau.n;
    let dx: Vec<Field> = (0..n).map(|b| grid.deriv(f, b)).collect();
    let dy: Vec<Field> = (0..n).map(|a| grid.deriv(f, n + a)).collect();
    let mut out = vec![c0(); grid.len];
    for a in 0..n {
        let cka = c.get(k, a);
        for i in 0..grid.len {
            let mut s = dy[a][i];
            for b in 0..n {
                s -= tau.get(a, b).conj() * dx[b][i];
            }
            out[i] += cka * s;
        }
    }
    out
}

pub(crate) fn plain_dzb(grid: &Grid, tau: &SMat, c: &SMat, k: usize, f: &[C64]) -> Field {
    let n = tau.n;
    let dx: Vec<Field> = (0..n).map(|b| grid.deriv(f, b)).collect();
    let dy: Vec<Field> = (0..n).map(|a| grid.deriv(f, n + a)).collect();
    let mut out = vec![c0(); grid.len];
    for a in 0..n {
        let cka = c.get(k, a);
        for i in 0..grid.len {
            let mut s = -dy[a][i];
            for b in 0..n {
                s += tau.get(a, b) * dx[b][i];
            }
            out[i] += cka * s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_fibers() {
        let e = FiberModel::elliptic(C64::new(0.0, -1.0), 16, 0, KahlerChoice::ModelFlat).unwrap_err();
        assert!(matches!(e, Error::InvalidFiber(_)));
        let e = FiberModel::elliptic(C64::new(0.0, 1.0), 7, 0, KahlerChoice::ModelFlat).unwrap_err();
        assert!(e.to_string().contains("grid_size must be even, ≥ 8"));
        let e = FiberModel::elliptic(C64::new(0.0, 1.0), 16, 0, KahlerChoice::FromWeight).unwrap_err();
        assert!(matches!(e, Error::InvalidFiber(_)));
    }

    #[test]
    fn volumes() {
        let f = FiberModel::elliptic(C64::new(0.3, 1.7), 16, -1, KahlerChoice::ModelFlat).unwrap();
        assert!((f.volume() - 1.0).abs() < 1e-14);
        let f = FiberModel::elliptic(C64::new(0.3, 1.7), 16, -2, KahlerChoice::FromWeight).unwrap();
        assert!((f.volume() - 4.0 * PI).abs() < 1e-12);
    }
}
