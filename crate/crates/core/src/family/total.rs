//! Forms on the total space near one fiber, in the coframe
//! θ_1..θ_n, dt, θ̄_1..θ̄_n, dt̄ with θ = dz − τ'y dt. Generator k is bit k of
//! the mask in that order; coefficients are fields on the fiber grid.

use crate::error::{Error, Result};
use crate::fiber::{wedge_sign, Field, FiberModel, Form, OperatorSet};
use crate::small::SMat;
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

#[derive(Clone, Copy, Debug)]
pub struct Gens {
    pub n: usize,
}

impl Gens {
    pub fn theta(&self, j: usize) -> u32 {
        j as u32
    }
    pub fn dt(&self) -> u32 {
        self.n as u32
    }
    pub fn theta_bar(&self, j: usize) -> u32 {
        (self.n + 1 + j) as u32
    }
    pub fn dtb(&self) -> u32 {
        (2 * self.n + 1) as u32
    }
    fn base_bits(&self) -> u32 {
        (1 << self.dt()) | (1 << self.dtb())
    }
    /// Fiber form mask (holomorphic bits 0..n, antiholomorphic n..2n) of a
    /// total mask without base generators.
    fn to_fiber(&self, m: u32) -> u32 {
        let holo = m & ((1 << self.n) - 1);
        let anti = (m >> (self.n + 1)) & ((1 << self.n) - 1);
        holo | (anti << self.n)
    }
    fn from_fiber(&self, m: u32) -> u32 {
        let holo = m & ((1 << self.n) - 1);
        let anti = (m >> self.n) & ((1 << self.n) - 1);
        holo | (anti << (self.n + 1))
    }
}

/// A vector at each fiber point, as coefficients on the dual frame.
pub struct TotalVector {
    pub coeffs: Vec<(u32, Field)>,
}

#[derive(Clone, Debug)]
pub struct TotalForm {
    pub gens: Gens,
    pub len: usize,
    pub terms: BTreeMap<u32, Field>,
}

impl TotalForm {
    pub fn zeros(n: usize, len: usize) -> Self {
        TotalForm { gens: Gens { n }, len, terms: BTreeMap::new() }
    }

    pub fn add_term(&mut self, mask: u32, s: C64, f: &[C64]) {
        let e = self.terms.entry(mask).or_insert_with(|| vec![zero(); f.len()]);
        for (o, v) in e.iter_mut().zip(f) {
            *o += s * v;
        }
    }

    fn add_term_field(&mut self, mask: u32, s: C64, f: &[C64], g: &[C64]) {
        let e = self.terms.entry(mask).or_insert_with(|| vec![zero(); f.len()]);
        for ((o, a), b) in e.iter_mut().zip(f).zip(g) {
            *o += s * a * b;
        }
    }

    /// The fiber form u read as Σ u_IJ θ_I∧θ̄_J.
    pub fn from_fiber(fm: &FiberModel, u: &Form) -> Self {
        let gens = Gens { n: fm.n };
        let mut out = TotalForm::zeros(fm.n, fm.len());
        for (c, (i, j)) in fm.components(u.p, u.q).iter().enumerate() {
            let m = gens.from_fiber(crate::fiber::form_mask(fm.n, i, j));
            out.add_term(m, C64::new(1.0, 0.0), &u.comps[c]);
        }
        out
    }

    pub fn scale_add(&self, s: C64, o: &TotalForm) -> TotalForm {
        let mut out = self.clone();
        for (m, f) in &o.terms {
            out.add_term(*m, s, f);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().flatten().fold(0.0, |a, c| a.max(c.norm()))
    }

    /// Left wedge with a single generator.
    pub fn wedge_gen_left(&self, g: u32) -> TotalForm {
        let mut out = TotalForm::zeros(self.gens.n, self.len);
        for (m, f) in &self.terms {
            let s = wedge_sign(1 << g, *m);
            if s != 0.0 {
                out.add_term(m | (1 << g), C64::new(s, 0.0), f);
            }
        }
        out
    }

    /// Interior product ι_X.
    pub fn interior(&self, x: &TotalVector) -> TotalForm {
        let mut out = TotalForm::zeros(self.gens.n, self.len);
        for (m, f) in &self.terms {
            for (g, xf) in &x.coeffs {
                if m & (1 << g) == 0 {
                    continue;
                }
                let below = (m & ((1u32 << g) - 1)).count_ones();
                let s = if below % 2 == 0 { 1.0 } else { -1.0 };
                out.add_term_field(m & !(1 << g), C64::new(s, 0.0), f, xf);
            }
        }
        out
    }

    /// Restriction to the fiber as a (p,q)-form.
    pub fn restrict(&self, fm: &FiberModel, p: usize, q: usize) -> Form {
        let mut out = Form::zeros(fm, p, q);
        let comps: Vec<u32> =
            fm.components(p, q).iter().map(|(i, j)| self.gens.from_fiber(crate::fiber::form_mask(fm.n, i, j))).collect();
        for (m, f) in &self.terms {
            if m & self.gens.base_bits() != 0 {
                continue;
            }
            if let Some(c) = comps.iter().position(|x| x == m) {
                for (o, v) in out.comps[c].iter_mut().zip(f) {
                    *o += v;
                }
            }
        }
        out
    }

    /// Fiber form α in the terms g∧α with g = dt or dt̄ and no other base
    /// generator; terms with both dt and dt̄ are dropped.
    pub fn base_coefficient(&self, fm: &FiberModel, g: u32, p: usize, q: usize) -> Result<Form> {
        let other = self.gens.base_bits() & !(1 << g);
        let mut rest = TotalForm::zeros(self.gens.n, self.len);
        for (m, f) in &self.terms {
            if m & (1 << g) == 0 || m & other != 0 {
                continue;
            }
            let r = m & !(1 << g);
            let s = wedge_sign(1 << g, r);
            rest.add_term(r, C64::new(s, 0.0), f);
        }
        for m in rest.terms.keys() {
            let f = self.gens.to_fiber(*m);
            let (hp, hq) = ((f & ((1 << fm.n) - 1)).count_ones() as usize, (f >> fm.n).count_ones() as usize);
            if (hp, hq) != (p, q) && rest.terms[m].iter().any(|v| v.norm() > 0.0) {
                return Err(Error::Shape(format!("base coefficient has a ({hp},{hq}) part, expected ({p},{q})")));
            }
        }
        Ok(rest.restrict(fm, p, q))
    }

    /// Terms without base generators.
    pub fn vertical_part(&self) -> TotalForm {
        let mut out = TotalForm::zeros(self.gens.n, self.len);
        for (m, f) in &self.terms {
            if m & self.gens.base_bits() == 0 {
                out.terms.insert(*m, f.clone());
            }
        }
        out
    }
}

/// Horizontal lift V = E_t + Σ v_j ∂_{θ_j} and its conjugate as dual-frame vectors.
pub fn lift_vectors(gens: Gens, v: &[Field]) -> (TotalVector, TotalVector) {
    let len = v[0].len();
    let one = vec![C64::new(1.0, 0.0); len];
    let mut a = vec![(gens.dt(), one.clone())];
    let mut b = vec![(gens.dtb(), one)];
    for (j, f) in v.iter().enumerate() {
        a.push((gens.theta(j), f.clone()));
        b.push((gens.theta_bar(j), f.iter().map(|c| c.conj()).collect()));
    }
    (TotalVector { coeffs: a }, TotalVector { coeffs: b })
}

/// P_v(θ) = (V̄∧V)⌟(dt∧dt̄∧θ).
pub fn vertical_projection(theta: &TotalForm, v: &[Field]) -> Result<TotalForm> {
    if v.len() != theta.gens.n || v.iter().any(|f| f.len() != theta.len) {
        return Err(Error::Shape("lift does not match the form".into()));
    }
    let (vv, vb) = lift_vectors(theta.gens, v);
    let w = theta.wedge_gen_left(theta.gens.dtb()).wedge_gen_left(theta.gens.dt());
    Ok(w.interior(&vv).interior(&vb))
}

/// Coefficient fields of a total form with their base derivatives E_t, E_t̄ at
/// fixed fiber coordinates.
#[derive(Clone, Debug)]
pub struct StencilForm {
    pub center: TotalForm,
    pub d_t: TotalForm,
    pub d_tb: TotalForm,
}

/// Geometry of the coframe at the stencil center.
#[derive(Clone, Debug)]
pub struct CenterFrame {
    /// τ'(t0)(2i Im τ)^{-1} and conj(τ')(2i Im τ)^{-1}
    pub tc: SMat,
    pub tbc: SMat,
    /// E_t φ_s and E_t̄ φ_s on the fiber grid
    pub dphi_t: Field,
    pub dphi_tb: Field,
}

impl CenterFrame {
    pub fn new(tau_p: &SMat, c: &SMat, dphi_t: Field, dphi_tb: Field) -> Self {
        CenterFrame { tc: tau_p.mul(c), tbc: tau_p.conj().mul(c), dphi_t, dphi_tb }
    }

    /// ∂̄θ_j = −Σ (τ'c)_{jl} dt∧θ̄_l, ∂̄θ̄_j = −Σ (τ̄'c)_{jl} dt̄∧θ̄_l,
    /// ∂θ_j = Σ (τ'c)_{jl} dt∧θ_l, ∂θ̄_j = Σ (τ̄'c)_{jl} dt̄∧θ_l.
    fn gen_derivative(&self, gens: Gens, g: u32, antiholo: bool) -> Vec<(u32, C64)> {
        let n = gens.n;
        let (j, m, base) = if (g as usize) < n {
            (g as usize, &self.tc, gens.dt())
        } else if g >= gens.theta_bar(0) && g < gens.dtb() {
            (g as usize - n - 1, &self.tbc, gens.dtb())
        } else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for l in 0..n {
            let coef = m.get(j, l);
            if coef == zero() {
                continue;
            }
            let (target, s) = if antiholo { (gens.theta_bar(l), -1.0) } else { (gens.theta(l), 1.0) };
            // stored as the sorted product of the two generators
            let order = wedge_sign(1 << base, 1 << target);
            out.push(((1 << base) | (1 << target), s * order * coef));
        }
        out
    }
}

fn leibniz(out: &mut TotalForm, fr: &CenterFrame, m: u32, c: &[C64], antiholo: bool) {
    let gens = out.gens;
    let mut below = 0u32;
    for g in 0..(2 * gens.n as u32 + 2) {
        if m & (1 << g) == 0 {
            continue;
        }
        let sign = if (m & below).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        let left = m & below;
        let right = m & !below & !(1 << g);
        for (piece, coef) in fr.gen_derivative(gens, g, antiholo) {
            let s1 = wedge_sign(left, piece);
            if s1 == 0.0 {
                continue;
            }
            let s2 = wedge_sign(left | piece, right);
            if s2 == 0.0 {
                continue;
            }
            out.add_term(left | piece | right, sign * s1 * s2 * coef, c);
        }
        below |= 1 << g;
    }
}

fn base_term(out: &mut TotalForm, sf: &StencilForm, g: u32, holo: bool, dphi: &[C64]) {
    let deriv = if holo { &sf.d_t } else { &sf.d_tb };
    let sgn = if holo { -0.5 } else { 0.5 };
    let mut keys: Vec<u32> = sf.center.terms.keys().chain(deriv.terms.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    for m in keys {
        let s = wedge_sign(1 << g, m);
        if s == 0.0 {
            continue;
        }
        let mut f = deriv.terms.get(&m).cloned().unwrap_or_else(|| vec![zero(); sf.center.len]);
        if let Some(c) = sf.center.terms.get(&m) {
            for ((o, cv), d) in f.iter_mut().zip(c).zip(dphi) {
                *o += sgn * d * cv;
            }
        }
        out.add_term(m | (1 << g), C64::new(s, 0.0), &f);
    }
}

/// ∂̄ of a total-space form at the stencil center. Base derivatives carry the
/// Chern connection term E_t̄φ_s/2 of the unitary frame.
pub fn dbar_center(ops: &OperatorSet, fr: &CenterFrame, sf: &StencilForm) -> TotalForm {
    let gens = sf.center.gens;
    let mut out = TotalForm::zeros(gens.n, sf.center.len);
    for (m, c) in &sf.center.terms {
        for k in 0..gens.n {
            let g = gens.theta_bar(k);
            let s = wedge_sign(1 << g, *m);
            if s != 0.0 {
                out.add_term(m | (1 << g), C64::new(s, 0.0), &ops.nabla_bar(k, c));
            }
        }
        leibniz(&mut out, fr, *m, c, true);
    }
    base_term(&mut out, sf, gens.dtb(), false, &fr.dphi_tb);
    out
}

/// ∂^φ = e^φ ∂ e^{-φ} of a total-space form at the stencil center.
pub fn del_center(ops: &OperatorSet, fr: &CenterFrame, sf: &StencilForm) -> TotalForm {
    let gens = sf.center.gens;
    let mut out = TotalForm::zeros(gens.n, sf.center.len);
    for (m, c) in &sf.center.terms {
        for k in 0..gens.n {
            let g = gens.theta(k);
            let s = wedge_sign(1 << g, *m);
            if s != 0.0 {
                out.add_term(m | (1 << g), C64::new(s, 0.0), &ops.nabla(k, c));
            }
        }
        leibniz(&mut out, fr, *m, c, false);
    }
    base_term(&mut out, sf, gens.dt(), true, &fr.dphi_t);
    out
}

/// Centered differences from forms at t0 ± h and t0 ± ih.
pub fn stencil_form(center: TotalForm, east: &TotalForm, west: &TotalForm, north: &TotalForm, south: &TotalForm, h: f64) -> StencilForm {
    let gens = center.gens;
    let len = center.len;
    let mut d_t = TotalForm::zeros(gens.n, len);
    let mut d_tb = TotalForm::zeros(gens.n, len);
    let mut keys: Vec<u32> = [east, west, north, south].iter().flat_map(|f| f.terms.keys().copied()).collect();
    keys.sort_unstable();
    keys.dedup();
    let z = vec![zero(); len];
    for m in keys {
        let get = |f: &TotalForm| f.terms.get(&m).cloned().unwrap_or_else(|| z.clone());
        let (e, w, nn, s) = (get(east), get(west), get(north), get(south));
        let mut a = Vec::with_capacity(len);
        let mut b = Vec::with_capacity(len);
        for i in 0..len {
            let dx = (e[i] - w[i]) / (2.0 * h);
            let dy = (nn[i] - s[i]) / (2.0 * h);
            a.push(0.5 * (dx - C64::i() * dy));
            b.push(0.5 * (dx + C64::i() * dy));
        }
        d_t.terms.insert(m, a);
        d_tb.terms.insert(m, b);
    }
    StencilForm { center, d_t, d_tb }
}

impl StencilForm {
    /// (4 F(h/2) − F(h)) / 3 on the derivative parts.
    pub fn richardson(coarse: &StencilForm, fine: &StencilForm) -> StencilForm {
        StencilForm {
            center: fine.center.clone(),
            d_t: fine.d_t.combine(4.0 / 3.0, &coarse.d_t, -1.0 / 3.0),
            d_tb: fine.d_tb.combine(4.0 / 3.0, &coarse.d_tb, -1.0 / 3.0),
        }
    }
}

impl TotalForm {
    /// a·self + b·o
    pub fn combine(&self, a: f64, o: &TotalForm, b: f64) -> TotalForm {
        let mut out = TotalForm::zeros(self.gens.n, self.len);
        for (m, f) in &self.terms {
            out.add_term(*m, C64::new(a, 0.0), f);
        }
        for (m, f) in &o.terms {
            out.add_term(*m, C64::new(b, 0.0), f);
        }
        out
    }

    /// max over masks of the largest coefficient difference
    pub fn max_diff(&self, o: &TotalForm) -> f64 {
        self.combine(1.0, o, -1.0).max_abs()
    }
}
