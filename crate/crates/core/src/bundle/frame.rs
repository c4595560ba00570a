use crate::error::{Error, Result};
use crate::family::{deform_decompose, DeformDecomposition, FamilyPoint, FamilyStencil, PointSet};
use crate::fiber::{harmonic_project, inner, lefschetz_decompose, norm2, Form, Regime};
use crate::linalg::{small_inverse, small_min_eig, small_mul, small_zeros, Small};
use std::sync::Arc;

/// Relative size below which a Gram-Schmidt residual counts as dependent.
const DEPENDENCE_TOL: f64 = 1e-6;

/// A frame of the Hodge bundle H^{p,q} (or its primitive part) on a stencil.
///
/// The frame at base point t is the harmonic (primitive) projection of a
/// fixed set of seed forms on the center fiber. The seeds are the center's
/// own frame, so the family is smooth in t and carries no phase ambiguity.
#[derive(Clone, Debug)]
pub struct HodgeFrame {
    pub p: usize,
    pub q: usize,
    pub rank: usize,
    pub primitive: bool,
    pub stencil: Arc<FamilyStencil>,
    pub seeds: Vec<Form>,
    pub vectors: PointSet<Vec<Form>>,
}

fn project(pt: &FamilyPoint, seed: &Form, primitive: bool) -> Result<Form> {
    let u = pt.adopt(seed)?;
    if primitive {
        Ok(lefschetz_decompose(&u, &pt.ops, &pt.cache)?.0)
    } else {
        harmonic_project(&u, &pt.ops, &pt.cache)
    }
}

pub(crate) fn gram_of(pt: &FamilyPoint, forms: &[Form]) -> Result<Small> {
    let fm = &pt.ops.fiber;
    let r = forms.len();
    let mut g = small_zeros(r, r);
    for a in 0..r {
        for b in a..r {
            let v = inner(fm, &forms[a], &forms[b])?;
            g[a][b] = v;
            g[b][a] = v.conj();
        }
        g[a][a].im = 0.0;
    }
    Ok(g)
}

/// Orthonormalize, dropping vectors that are dependent on earlier ones.
fn gram_schmidt(pt: &FamilyPoint, forms: Vec<Form>) -> Result<Vec<Form>> {
    let fm = &pt.ops.fiber;
    let scale = forms.iter().map(|f| norm2(fm, f)).fold(0.0, f64::max).sqrt();
    let mut out: Vec<Form> = Vec::new();
    for mut f in forms {
        for e in &out {
            let c = inner(fm, &f, e)?;
            f = f.axpy(-c, e);
        }
        let nf = norm2(fm, &f).sqrt();
        if nf > DEPENDENCE_TOL * scale {
            out.push(f.scale((1.0 / nf).into()));
        }
    }
    Ok(out)
}

impl HodgeFrame {
    /// Frame spanned by the projections of the given center forms.
    pub fn from_seeds(stencil: Arc<FamilyStencil>, seeds: Vec<Form>, primitive: bool) -> Result<Self> {
        let first = seeds.first().ok_or_else(|| Error::Precondition("a frame needs at least one seed form".into()))?;
        let (p, q) = (first.p, first.q);
        if seeds.iter().any(|s| (s.p, s.q) != (p, q)) {
            return Err(Error::Shape("frame seeds have different bidegrees".into()));
        }
        if primitive && stencil.scn.regime != Regime::Flat {
            return Err(Error::UnsupportedRegime("primitive subbundles are built in the flat regime".into()));
        }
        let vectors = stencil.points.try_map(|pt| seeds.iter().map(|s| project(pt, s, primitive)).collect::<Result<Vec<Form>>>())?;
        let rank = seeds.len();
        let cfm = &stencil.center().ops.fiber;
        let top = seeds.iter().map(|s| norm2(cfm, s)).fold(0.0, f64::max);
        for (pt, vs) in stencil.points.iter().zip(vectors.iter()) {
            let g = gram_of(pt, vs)?;
            let low = small_min_eig(&g)?;
            if !(low > 1e-8 * top) {
                return Err(Error::RankJump(format!(
                    "frame degenerates at t = {:.6}{:+.6}i (Gram eigenvalue ratio {:.3e})",
                    pt.t.re,
                    pt.t.im,
                    low / top.max(1e-300)
                )));
            }
        }
        Ok(HodgeFrame { p, q, rank, primitive, stencil, seeds, vectors })
    }

    /// Frame given explicitly at every stencil point, e.g. harmonic parts of
    /// cup products. `seeds` are the center vectors.
    pub fn from_vectors(stencil: Arc<FamilyStencil>, vectors: PointSet<Vec<Form>>) -> Result<Self> {
        let seeds = vectors.center.clone();
        let first = seeds.first().ok_or_else(|| Error::Precondition("a frame needs at least one vector".into()))?;
        let (p, q) = (first.p, first.q);
        let rank = seeds.len();
        if vectors.iter().any(|vs| vs.len() != rank || vs.iter().any(|f| (f.p, f.q) != (p, q))) {
            return Err(Error::Shape("frame vectors differ in count or bidegree across the stencil".into()));
        }
        Ok(HodgeFrame { p, q, rank, primitive: false, stencil, seeds, vectors })
    }

    /// Vector a at every stencil point.
    pub fn section(&self, a: usize) -> PointSet<Form> {
        PointSet {
            center: self.vectors.center[a].clone(),
            coarse: self.vectors.coarse.iter().map(|v| v[a].clone()).collect(),
            fine: self.vectors.fine.iter().map(|v| v[a].clone()).collect(),
        }
    }

    pub fn center(&self) -> &[Form] {
        &self.vectors.center
    }

    /// η, ν, μ, ξ for every frame vector.
    pub fn decompose(&self) -> Result<Vec<DeformDecomposition>> {
        (0..self.rank).map(|a| deform_decompose(&self.stencil, &self.section(a))).collect()
    }
}

/// Frame of H^{p,q} from the center eigenbasis, or of its primitive part.
pub fn build_frame(stencil: Arc<FamilyStencil>, p: usize, q: usize, primitive: bool) -> Result<HodgeFrame> {
    let n = stencil.scn.n();
    if p + q > n {
        return Err(Error::Shape(format!("bidegree ({p},{q}) exceeds the fiber dimension {n}")));
    }
    let center = stencil.center();
    let dim = center.cache.spectrum(p, q)?.harmonic_dim;
    for pt in stencil.points.iter() {
        let d = pt.cache.spectrum(p, q)?.harmonic_dim;
        if d != dim {
            return Err(Error::RankJump(format!(
                "h^{{{p},{q}}} is {dim} at the center and {d} at t = {:.6}{:+.6}i",
                pt.t.re, pt.t.im
            )));
        }
    }
    if dim == 0 {
        return Err(Error::Precondition(format!("H^{{{p},{q}}} vanishes on this family")));
    }
    let mut seeds = (0..dim).map(|k| center.cache.eigenform(p, q, k)).collect::<Result<Vec<_>>>()?;
    if primitive {
        seeds = seeds
            .iter()
            .map(|s| Ok(lefschetz_decompose(s, &center.ops, &center.cache)?.0))
            .collect::<Result<Vec<_>>>()?;
        seeds = gram_schmidt(center, seeds)?;
        if seeds.is_empty() {
            return Err(Error::Precondition(format!("the primitive part of H^{{{p},{q}}} vanishes")));
        }
    }
    HodgeFrame::from_seeds(stencil, seeds, primitive)
}

/// Gram matrices ⟨e_a, e_b⟩ at every stencil point.
pub fn gram_matrix(frame: &HodgeFrame) -> Result<PointSet<Small>> {
    let pairs = frame.stencil.points.zip(&frame.vectors);
    pairs.try_map(|(pt, vs)| gram_of(pt, vs))
}

/// Connection coefficients at the stencil center, in the convention
/// D''e_a = Σ dbar[a][c] e_c dt̄ and D'e_a = Σ del[a][c] e_c dt.
#[derive(Clone, Debug)]
pub struct ConnectionData {
    pub gram: Small,
    pub dbar: Small,
    pub del: Small,
}

fn coefficients(pt: &FamilyPoint, frame: &[Form], gram_inv: &Small, x: &[&Form]) -> Result<Small> {
    let fm = &pt.ops.fiber;
    let r = frame.len();
    let mut m = small_zeros(r, r);
    for a in 0..r {
        for d in 0..r {
            m[a][d] = inner(fm, x[a], &frame[d])?;
        }
    }
    Ok(small_mul(&m, gram_inv))
}

pub fn connection(frame: &HodgeFrame, decs: &[DeformDecomposition]) -> Result<ConnectionData> {
    if decs.len() != frame.rank {
        return Err(Error::Shape("one decomposition per frame vector expected".into()));
    }
    let pt = frame.stencil.center();
    let gram = gram_of(pt, frame.center())?;
    let inv = small_inverse(&gram)?;
    let nus: Vec<&Form> = decs.iter().map(|d| &d.nu).collect();
    let mus: Vec<&Form> = decs.iter().map(|d| &d.mu).collect();
    let dbar = coefficients(pt, frame.center(), &inv, &nus)?;
    let del = coefficients(pt, frame.center(), &inv, &mus)?;
    Ok(ConnectionData { gram, dbar, del })
}
