use super::{Field, FiberModel, Form, Weight};
use crate::error::{Error, Result};
use crate::linalg::DMat;
use crate::par;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Degree zero with fiber-constant weight: diagonal in Fourier modes.
    Fourier,
    /// Elliptic fiber with nonzero degree: covariant pseudo-spectral
    /// derivatives in the Landau gauge, dense eigensolves.
    Twisted,
}

/// U(1) parallel transport exp(-i∫A) along each positively oriented grid edge.
#[derive(Clone, Debug)]
pub struct LinkPhases {
    /// links[axis][point]: edge from `point` to its neighbour along `axis`
    pub links: Vec<Vec<C64>>,
}

#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub fiber: Arc<FiberModel>,
    pub backend: Backend,
    pub link_phases: LinkPhases,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

impl OperatorSet {
    pub fn new(fiber: Arc<FiberModel>) -> Result<Self> {
        let backend = if fiber.degree.iter().all(|&d| d == 0) {
            if !fiber.is_fiber_flat() {
                return Err(Error::UnsupportedRegime(
                    "degree-zero bundles need a fiber-constant weight (the fiberwise curvature must vanish)".into(),
                ));
            }
            Backend::Fourier
        } else {
            Backend::Twisted
        };
        let link_phases = LinkPhases::new(&fiber);
        Ok(OperatorSet { fiber, backend, link_phases })
    }

    fn twisted(&self) -> bool {
        self.backend == Backend::Twisted
    }

    /// Covariant derivative along the real coordinate x_a.
    pub fn d_x(&self, a: usize, f: &[C64]) -> Field {
        let fm = &self.fiber;
        let mut out = fm.grid.deriv(f, a);
        if self.twisted() {
            let d = fm.d() as f64;
            let n = fm.size();
            for (i, v) in out.iter_mut().enumerate() {
                let y = (i / n) as f64 / n as f64;
                *v += C64::new(0.0, 2.0 * PI * d * (y - 0.5)) * f[i];
            }
        }
        out
    }

    /// Derivative along y_a. In the twisted frame each column is conjugated
    /// to a periodic function, differentiated spectrally with the frequency
    /// window centred on zero, and conjugated back.
    pub fn d_y(&self, a: usize, f: &[C64]) -> Field {
        let fm = &self.fiber;
        if !self.twisted() {
            return fm.grid.deriv(f, fm.n + a);
        }
        let n = fm.size();
        let nf = n as f64;
        let d = fm.d() as f64;
        let mut out = vec![zero(); fm.len()];
        let mut buf = vec![zero(); n];
        for j in 0..n {
            let q = -d * j as f64 / nf;
            for l in 0..n {
                let y = l as f64 / nf;
                buf[l] = f[j + l * n] * C64::from_polar(1.0, -2.0 * PI * q * y);
            }
            fm.grid.fft_line(&mut buf, true);
            for (b, v) in buf.iter_mut().enumerate() {
                let m = if 2 * b >= n { b as f64 - nf } else { b as f64 };
                let mut fr = m + q;
                fr -= (fr / nf).round() * nf;
                let mult = if (fr.abs() - 0.5 * nf).abs() < 1e-9 { 0.0 } else { 2.0 * PI * fr };
                *v *= C64::new(0.0, mult / nf);
            }
            fm.grid.fft_line(&mut buf, false);
            for l in 0..n {
                let y = l as f64 / nf;
                out[j + l * n] = buf[l] * C64::from_polar(1.0, 2.0 * PI * q * y);
            }
        }
        out
    }

    /// ∇_{z̄_k} = Σ_a c_{ka} (Σ_b τ_{ab} D_{x_b} − D_{y_a}) + ∂_{z̄_k}φ_s / 2
    pub fn nabla_bar(&self, k: usize, f: &[C64]) -> Field {
        let fm = &self.fiber;
        let n = fm.n;
        let dx: Vec<Field> = (0..n).map(|b| self.d_x(b, f)).collect();
        let dy: Vec<Field> = (0..n).map(|a| self.d_y(a, f)).collect();
        let mut out: Field = (0..fm.len()).map(|i| 0.5 * fm.dphi_zb[k][i] * f[i]).collect();
        for a in 0..n {
            let cka = fm.c.get(k, a);
            for i in 0..fm.len() {
                let mut s = -dy[a][i];
                for b in 0..n {
                    s += fm.tau.get(a, b) * dx[b][i];
                }
                out[i] += cka * s;
            }
        }
        out
    }

    /// ∇_{z_k} = Σ_a c_{ka} (D_{y_a} − Σ_b τ̄_{ab} D_{x_b}) − ∂_{z_k}φ_s / 2
    pub fn nabla(&self, k: usize, f: &[C64]) -> Field {
        let fm = &self.fiber;
        let n = fm.n;
        let dx: Vec<Field> = (0..n).map(|b| self.d_x(b, f)).collect();
        let dy: Vec<Field> = (0..n).map(|a| self.d_y(a, f)).collect();
        let mut out: Field = (0..fm.len()).map(|i| -0.5 * fm.dphi_z[k][i] * f[i]).collect();
        for a in 0..n {
            let cka = fm.c.get(k, a);
            for i in 0..fm.len() {
                let mut s = dy[a][i];
                for b in 0..n {
                    s -= fm.tau.get(a, b).conj() * dx[b][i];
                }
                out[i] += cka * s;
            }
        }
        out
    }

    fn check(&self, u: &Form) -> Result<()> {
        if u.bundle != self.fiber.id {
            return Err(Error::Stale("form belongs to a different fiber".into()));
        }
        Ok(())
    }

    /// Apply Σ_k (op_k f) e_k ∧ · where e_k = dz̄_k (anti) or dz_k.
    fn raise(&self, u: &Form, anti: bool, op: &dyn Fn(usize, &[C64]) -> Field) -> Form {
        let fm = &self.fiber;
        let n = fm.n;
        let (p, q) = (u.p, u.q);
        let (np, nq) = if anti { (p, q + 1) } else { (p + 1, q) };
        let mut out = Form::zeros(fm, np, nq);
        let src = fm.components(p, q);
        let dst = fm.components(np, nq);
        for (ci, (i, j)) in src.iter().enumerate() {
            for k in 0..n {
                let (set, other) = if anti { (j, i) } else { (i, j) };
                if set.contains(&k) {
                    continue;
                }
                let below = set.iter().filter(|&&s| s < k).count();
                let shift = if anti { p } else { 0 };
                let sign = if (below + shift) % 2 == 0 { 1.0 } else { -1.0 };
                let mut nset = set.clone();
                nset.push(k);
                nset.sort_unstable();
                let key = if anti { (other.clone(), nset) } else { (nset, other.clone()) };
                let di = dst.iter().position(|c| *c == key).unwrap();
                let d = op(k, &u.comps[ci]);
                for (o, v) in out.comps[di].iter_mut().zip(d) {
                    *o += sign * v;
                }
            }
        }
        out
    }

    /// Plain (unweighted) adjoint of `raise`.
    fn lower_plain(&self, b: &Form, anti: bool, op_adj: &dyn Fn(usize, &[C64]) -> Field) -> Form {
        let fm = &self.fiber;
        let n = fm.n;
        let (p, q) = if anti { (b.p, b.q - 1) } else { (b.p - 1, b.q) };
        let mut out = Form::zeros(fm, p, q);
        let src = fm.components(p, q);
        let dst = fm.components(b.p, b.q);
        for (ci, (i, j)) in src.iter().enumerate() {
            for k in 0..n {
                let (set, other) = if anti { (j, i) } else { (i, j) };
                if set.contains(&k) {
                    continue;
                }
                let below = set.iter().filter(|&&s| s < k).count();
                let shift = if anti { p } else { 0 };
                let sign = if (below + shift) % 2 == 0 { 1.0 } else { -1.0 };
                let mut nset = set.clone();
                nset.push(k);
                nset.sort_unstable();
                let key = if anti { (other.clone(), nset) } else { (nset, other.clone()) };
                let di = dst.iter().position(|c| *c == key).unwrap();
                let d = op_adj(k, &b.comps[di]);
                for (o, v) in out.comps[ci].iter_mut().zip(d) {
                    *o += sign * v;
                }
            }
        }
        out
    }

    fn lower_index(w: &Weight, u: &Form) -> Form {
        let mut out = u.clone();
        let k = u.comps.len();
        for i in 0..w.field.len() {
            for a in 0..k {
                let mut s = zero();
                for b in 0..k {
                    s += w.mat.get(a, b).conj() * u.comps[b][i];
                }
                out.comps[a][i] = s * w.field[i];
            }
        }
        out
    }

    fn raise_index(w: &Weight, u: &Form) -> Form {
        let mut out = u.clone();
        let k = u.comps.len();
        for i in 0..w.field.len() {
            for a in 0..k {
                let mut s = zero();
                for b in 0..k {
                    s += w.mat_lower_inv.get(a, b) * u.comps[b][i];
                }
                out.comps[a][i] = s / w.field[i];
            }
        }
        out
    }

    pub fn dbar(&self, u: &Form) -> Result<Form> {
        self.check(u)?;
        if u.q >= self.fiber.n {
            return Ok(Form::zeros(&self.fiber, u.p, u.q));
        }
        Ok(self.raise(u, true, &|k, f| self.nabla_bar(k, f)))
    }

    pub fn del_phi(&self, u: &Form) -> Result<Form> {
        self.check(u)?;
        if u.p >= self.fiber.n {
            return Ok(Form::zeros(&self.fiber, u.p, u.q));
        }
        Ok(self.raise(u, false, &|k, f| self.nabla(k, f)))
    }

    /// Weighted adjoint of ∂̄: (p,q) → (p,q−1).
    pub fn dbar_adj(&self, u: &Form) -> Result<Form> {
        self.check(u)?;
        if u.q == 0 {
            return Err(Error::Shape("∂̄* needs q ≥ 1".into()));
        }
        let fm = &self.fiber;
        let low = Self::lower_index(&fm.weight(u.p, u.q), u);
        let g = self.lower_plain(&low, true, &|k, f| {
            self.nabla(k, f).into_iter().map(|v| -v).collect()
        });
        Ok(Self::raise_index(&fm.weight(u.p, u.q - 1), &g))
    }

    /// Weighted adjoint of ∂^φ: (p,q) → (p−1,q).
    pub fn del_phi_adj(&self, u: &Form) -> Result<Form> {
        self.check(u)?;
        if u.p == 0 {
            return Err(Error::Shape("∂^φ* needs p ≥ 1".into()));
        }
        let fm = &self.fiber;
        let low = Self::lower_index(&fm.weight(u.p, u.q), u);
        let g = self.lower_plain(&low, false, &|k, f| {
            self.nabla_bar(k, f).into_iter().map(|v| -v).collect()
        });
        Ok(Self::raise_index(&fm.weight(u.p - 1, u.q), &g))
    }

    /// □'' = ∂̄∂̄* + ∂̄*∂̄
    pub fn box_dbar(&self, u: &Form) -> Result<Form> {
        let n = self.fiber.n;
        let mut out = Form::zeros(&self.fiber, u.p, u.q);
        if u.q > 0 {
            out = out.add(&self.dbar(&self.dbar_adj(u)?)?);
        }
        if u.q < n {
            out = out.add(&self.dbar_adj(&self.dbar(u)?)?);
        }
        Ok(out)
    }

    /// □' = ∂^φ∂^φ* + ∂^φ*∂^φ
    pub fn box_del(&self, u: &Form) -> Result<Form> {
        let n = self.fiber.n;
        let mut out = Form::zeros(&self.fiber, u.p, u.q);
        if u.p > 0 {
            out = out.add(&self.del_phi(&self.del_phi_adj(u)?)?);
        }
        if u.p < n {
            out = out.add(&self.del_phi_adj(&self.del_phi(u)?)?);
        }
        Ok(out)
    }

    /// Dense matrix of W^{1/2} □'' W^{-1/2} on (p,q)-forms of an elliptic
    /// fiber (one component per point), Hermitian by construction.
    pub fn dense_box(&self, p: usize, q: usize) -> Result<DMat> {
        self.dense_weighted(p, q, &|u| self.box_dbar(u))
    }

    /// Dense matrix of W^{1/2} A W^{-1/2} for an operator A preserving (p,q).
    /// Self-adjoint operators give Hermitian matrices.
    pub fn dense_weighted(&self, p: usize, q: usize, op: &(dyn Fn(&Form) -> Result<Form> + Sync)) -> Result<DMat> {
        let fm = &self.fiber;
        if fm.n != 1 {
            return Err(Error::UnsupportedRegime("dense assembly is only used on elliptic fibers".into()));
        }
        let w = fm.weight(p, q);
        let sq: Vec<f64> = w.field.iter().map(|v| v.sqrt()).collect();
        let len = fm.len();
        let cols: Vec<Result<Field>> = par::map_range(len, |c| {
            let mut e = vec![zero(); len];
            e[c] = C64::new(1.0 / sq[c], 0.0);
            let u = Form::scalar(fm, p, q, e)?;
            let b = op(&u)?;
            if b.p != p || b.q != q {
                return Err(Error::Shape("dense assembly needs a bidegree-preserving operator".into()));
            }
            Ok(b.comps[0].iter().zip(&sq).map(|(v, s)| v * s).collect())
        });
        let cols: Vec<Field> = cols.into_iter().collect::<Result<_>>()?;
        Ok(crate::linalg::from_columns(len, &cols))
    }
}

impl LinkPhases {
    fn new(fm: &FiberModel) -> Self {
        let dims = 2 * fm.n;
        let mut links = vec![vec![C64::new(1.0, 0.0); fm.len()]; dims];
        if fm.n == 1 && fm.d() != 0 {
            let n = fm.size();
            let h = 1.0 / n as f64;
            let d = fm.d() as f64;
            for i in 0..fm.len() {
                let (j, l) = (i % n, i / n);
                let y = l as f64 * h;
                links[0][i] = C64::from_polar(1.0, 2.0 * PI * d * (y - 0.5) * h);
                if l == n - 1 {
                    links[1][i] = C64::from_polar(1.0, -2.0 * PI * d * j as f64 * h);
                }
            }
        }
        LinkPhases { links }
    }

    /// Total curvature flux ∫dA through the (x_a, y_a) torus factor, averaged
    /// over the transverse slices.
    pub fn flux(&self, fm: &FiberModel, a: usize) -> f64 {
        let n = fm.size();
        let (ax, ay) = (a, fm.n + a);
        let (sx, sy) = (fm.grid.stride(ax), fm.grid.stride(ay));
        let step = |i: usize, s: usize| {
            let c = (i / s) % n;
            if c == n - 1 {
                i + s - n * s
            } else {
                i + s
            }
        };
        let mut total = 0.0;
        for i in 0..fm.len() {
            let ix = step(i, sx);
            let iy = step(i, sy);
            let hol = self.links[ax][i] * self.links[ay][ix] * self.links[ax][iy].conj() * self.links[ay][i].conj();
            total -= hol.arg();
        }
        total / (fm.len() / (n * n)) as f64
    }
}

