use super::frame::{connection, ConnectionData, HodgeFrame};
use super::oracle::{curvature_fd_oracle, FdCurvature, OracleMeta};
use crate::error::{Error, Result};
use crate::family::{geodesic_curvature, DeformDecomposition, FdMeta};
use crate::fiber::{green_shift, harmonic_project, inner, primitive_test, top_pairing, Form, Regime};
use crate::linalg::{small_add, small_adjoint, small_max_abs, small_zeros, Small};
use num_complex::Complex64 as C64;
use serde::Serialize;

const PRIMITIVE_TOL: f64 = 1e-8;

/// Terms of the curvature formula for one frame vector.
#[derive(Clone, Debug, Serialize)]
pub struct VectorTerms {
    pub index: usize,
    pub norm2: f64,
    pub term_mu: f64,
    pub term_xi: f64,
    pub term_eta: f64,
    pub term_nu: f64,
    pub term_comega: f64,
    pub term_mu_alt: Option<f64>,
    pub analytic_total: f64,
    pub fd_total: f64,
}

/// ⟨Θ_{v v̄} u, u⟩ by the analytic formula and by the Gram oracle.
///
/// Top-level terms are traces over the frame; `analytic_block` and `fd_block`
/// hold ⟨Θ e_a, e_b⟩.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureReport {
    pub regime: &'static str,
    pub p: usize,
    pub q: usize,
    pub rank: usize,
    pub primitive: bool,
    pub direction: [f64; 2],
    pub term_mu: f64,
    pub term_xi: f64,
    pub term_eta: f64,
    pub term_nu: f64,
    pub term_comega: f64,
    pub analytic_total: f64,
    pub fd_total: f64,
    pub residual_abs: f64,
    pub residual_rel: f64,
    /// largest Σ|term| over frame vectors; the size of what cancels when the
    /// total vanishes
    pub term_scale: f64,
    pub hermitian_defect: f64,
    pub dbar_norm: f64,
    pub decomposition: FdMeta,
    pub oracle: OracleMeta,
    pub vectors: Vec<VectorTerms>,
    #[serde(skip)]
    pub analytic_block: Small,
    #[serde(skip)]
    pub fd_block: Small,
}

impl CurvatureReport {
    pub fn analytic_block_max(&self) -> f64 {
        small_max_abs(&self.analytic_block)
    }
}

pub fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Negative => "negative",
        Regime::Positive => "positive",
        Regime::Flat => "flat",
    }
}

/// Per-pair sesquilinear term matrices, before the direction factor.
#[derive(Clone, Debug)]
pub struct TermBlocks {
    pub mu: Small,
    pub xi: Small,
    pub eta: Small,
    pub nu: Small,
    pub comega: Small,
    pub mu_alt: Option<Small>,
}

impl TermBlocks {
    pub fn total(&self) -> Small {
        let one = C64::new(1.0, 0.0);
        let s = small_add(&self.mu, &self.xi, one);
        let s = small_add(&s, &self.eta, one);
        let s = small_add(&s, &self.nu, one);
        small_add(&s, &self.comega, one)
    }
}

fn perp(f: &Form, frame: &HodgeFrame) -> Result<Form> {
    let pt = frame.stencil.center();
    Ok(f.sub(&harmonic_project(f, &pt.ops, &pt.cache)?))
}

fn harm(f: &Form, frame: &HodgeFrame) -> Result<Form> {
    let pt = frame.stencil.center();
    harmonic_project(f, &pt.ops, &pt.cache)
}

/// Matrix s·⟨L x_a, y_b⟩ with L = (□'' + λ)^{-1} or the identity.
fn pair_block(frame: &HodgeFrame, xs: &[Option<Form>], shift: Option<f64>, s: f64) -> Result<Small> {
    let pt = frame.stencil.center();
    let fm = &pt.ops.fiber;
    let r = xs.len();
    let mut m = small_zeros(r, r);
    let Some(first) = xs.iter().flatten().next() else {
        return Ok(m);
    };
    let zero = Form::zeros(fm, first.p, first.q);
    let xs: Vec<&Form> = xs.iter().map(|x| x.as_ref().unwrap_or(&zero)).collect();
    let lx = xs
        .iter()
        .map(|x| match shift {
            Some(l) => green_shift(x, l, &pt.ops, &pt.cache),
            None => Ok((*x).clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    for a in 0..r {
        for b in 0..r {
            m[a][b] = s * inner(fm, &lx[a], xs[b])?;
        }
    }
    Ok(m)
}

fn map_opt(xs: &[Option<Form>], f: impl Fn(&Form) -> Result<Form>) -> Result<Vec<Option<Form>>> {
    xs.iter().map(|x| x.as_ref().map(&f).transpose()).collect()
}

/// Sign · (−1)^q c_n ∫ c(Ω) e_a ∧ ē_b e^{-φ}, with c(Ω) sampled on the center fiber.
fn comega_block(frame: &HodgeFrame, s: f64) -> Result<Small> {
    let st = &frame.stencil;
    let pt = st.center();
    let fm = &pt.ops.fiber;
    let cg = geodesic_curvature(&st.scn, fm, pt.t)?;
    let cg: Vec<C64> = cg.into_iter().map(|v| C64::new(v, 0.0)).collect();
    let us = frame.center();
    let r = us.len();
    let mut m = small_zeros(r, r);
    for a in 0..r {
        let cu = us[a].mul_field(&cg);
        for b in 0..r {
            m[a][b] = s * top_pairing(fm, &cu, &us[b])?;
        }
    }
    Ok(m)
}

fn require(frame: &HodgeFrame, want: Regime) -> Result<()> {
    let got = frame.stencil.scn.regime;
    if got != want {
        return Err(Error::UnsupportedRegime(format!(
            "{} curvature formula applied to a {} scenario",
            regime_name(want),
            regime_name(got)
        )));
    }
    Ok(())
}

/// Terms of the negative-regime formula:
/// −⟨(□''+1)^{-1}μ⊥, μ⊥⟩ − ⟨(□''+1)^{-1}ξ, ξ⟩ + ⟨η_h, η_h⟩ − (−1)^q c_n ∫ c(Ω) u∧ū e^{-φ}.
pub fn terms_negative(frame: &HodgeFrame, decs: &[DeformDecomposition]) -> Result<TermBlocks> {
    require(frame, Regime::Negative)?;
    let mus: Vec<Option<Form>> = decs.iter().map(|d| Some(d.mu.clone())).collect();
    let xis: Vec<Option<Form>> = decs.iter().map(|d| d.xi.clone()).collect();
    let etas: Vec<Option<Form>> = decs.iter().map(|d| d.eta.clone()).collect();
    let mu_perp = map_opt(&mus, |f| perp(f, frame))?;
    let eta_perp = map_opt(&etas, |f| perp(f, frame))?;
    let eta_h = map_opt(&etas, |f| harm(f, frame))?;
    let r = frame.rank;
    // the alternative needs □'' > 1 on the orthogonal complement
    let mu_alt = match pair_block(frame, &eta_perp, Some(-1.0), -1.0) {
        Ok(m) => Some(m),
        Err(Error::IllPosed { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(TermBlocks {
        mu: pair_block(frame, &mu_perp, Some(1.0), -1.0)?,
        xi: pair_block(frame, &xis, Some(1.0), -1.0)?,
        eta: pair_block(frame, &eta_h, None, 1.0)?,
        nu: small_zeros(r, r),
        comega: comega_block(frame, -1.0)?,
        mu_alt,
    })
}

/// Terms of the positive-regime formula:
/// ⟨(□''+1)^{-1}η, η⟩ + ⟨(□''+1)^{-1}ν⊥, ν⊥⟩ − ⟨ξ_h, ξ_h⟩ + (−1)^q c_n ∫ c(Ω) u∧ū e^{-φ}.
///
/// ν⊥ is used so the value does not depend on the frame being holomorphic;
/// for a holomorphic frame ν is exact and ν = ν⊥.
pub fn terms_positive(frame: &HodgeFrame, decs: &[DeformDecomposition]) -> Result<TermBlocks> {
    require(frame, Regime::Positive)?;
    let nus: Vec<Option<Form>> = decs.iter().map(|d| Some(d.nu.clone())).collect();
    let xis: Vec<Option<Form>> = decs.iter().map(|d| d.xi.clone()).collect();
    let etas: Vec<Option<Form>> = decs.iter().map(|d| d.eta.clone()).collect();
    let nu_perp = map_opt(&nus, |f| perp(f, frame))?;
    let xi_h = map_opt(&xis, |f| harm(f, frame))?;
    let r = frame.rank;
    Ok(TermBlocks {
        mu: small_zeros(r, r),
        xi: pair_block(frame, &xi_h, None, -1.0)?,
        eta: pair_block(frame, &etas, Some(1.0), 1.0)?,
        nu: pair_block(frame, &nu_perp, Some(1.0), 1.0)?,
        comega: comega_block(frame, 1.0)?,
        mu_alt: None,
    })
}

/// Terms of the flat-regime formula ⟨η_h, η_h⟩ − ⟨ξ_h, ξ_h⟩ + C(φ)⟨u, u⟩,
/// with C(φ) = ∂_t∂_t̄φ averaged over the center fiber.
pub fn terms_flat(frame: &HodgeFrame, decs: &[DeformDecomposition]) -> Result<TermBlocks> {
    require(frame, Regime::Flat)?;
    let st = &frame.stencil;
    let pt = st.center();
    let fm = &pt.ops.fiber;
    for (a, u) in frame.center().iter().enumerate() {
        let defect = primitive_test(u, &pt.ops)?;
        if defect > PRIMITIVE_TOL {
            return Err(Error::Precondition(format!("frame vector {a} is not primitive (‖ω∧u‖/‖u‖ = {defect:.3e})")));
        }
    }
    let xis: Vec<Option<Form>> = decs.iter().map(|d| d.xi.clone()).collect();
    let etas: Vec<Option<Form>> = decs.iter().map(|d| d.eta.clone()).collect();
    let xi_h = map_opt(&xis, |f| harm(f, frame))?;
    let eta_h = map_opt(&etas, |f| harm(f, frame))?;
    let (cphi, _, _) = st.scn.base_curvature(pt.t);
    let r = frame.rank;
    let us = frame.center();
    let mut comega = small_zeros(r, r);
    for a in 0..r {
        for b in 0..r {
            comega[a][b] = cphi * inner(fm, &us[a], &us[b])?;
        }
    }
    Ok(TermBlocks {
        mu: small_zeros(r, r),
        xi: pair_block(frame, &xi_h, None, -1.0)?,
        eta: pair_block(frame, &eta_h, None, 1.0)?,
        nu: small_zeros(r, r),
        comega,
        mu_alt: None,
    })
}

pub fn analytic_terms(frame: &HodgeFrame, decs: &[DeformDecomposition]) -> Result<TermBlocks> {
    match frame.stencil.scn.regime {
        Regime::Negative => terms_negative(frame, decs),
        Regime::Positive => terms_positive(frame, decs),
        Regime::Flat => terms_flat(frame, decs),
    }
}

fn hermitian_defect(m: &Small) -> f64 {
    small_max_abs(&small_add(m, &small_adjoint(m), C64::new(-1.0, 0.0)))
}

fn assemble(frame: &HodgeFrame, decs: &[DeformDecomposition], terms: TermBlocks, conn: &ConnectionData, fd: FdCurvature, direction: C64) -> CurvatureReport {
    let w = direction.norm_sqr();
    let r = frame.rank;
    let total = terms.total();
    let diag = |m: &Small, a: usize| w * m[a][a].re;
    let vectors: Vec<VectorTerms> = (0..r)
        .map(|a| {
            let (mu, xi, eta, nu, co) = (
                diag(&terms.mu, a),
                diag(&terms.xi, a),
                diag(&terms.eta, a),
                diag(&terms.nu, a),
                diag(&terms.comega, a),
            );
            VectorTerms {
                index: a,
                norm2: conn.gram[a][a].re,
                term_mu: mu,
                term_xi: xi,
                term_eta: eta,
                term_nu: nu,
                term_comega: co,
                term_mu_alt: terms.mu_alt.as_ref().map(|m| diag(m, a)),
                analytic_total: mu + xi + eta + nu + co,
                fd_total: diag(&fd.block, a),
            }
        })
        .collect();
    let sum = |f: &dyn Fn(&VectorTerms) -> f64| vectors.iter().map(f).sum::<f64>();
    let (term_mu, term_xi, term_eta, term_nu, term_comega) = (
        sum(&|v| v.term_mu),
        sum(&|v| v.term_xi),
        sum(&|v| v.term_eta),
        sum(&|v| v.term_nu),
        sum(&|v| v.term_comega),
    );
    let analytic_total = term_mu + term_xi + term_eta + term_nu + term_comega;
    let term_scale = vectors
        .iter()
        .map(|v| v.term_mu.abs() + v.term_xi.abs() + v.term_eta.abs() + v.term_nu.abs() + v.term_comega.abs())
        .fold(0.0, f64::max);
    let scale_c = C64::new(w, 0.0);
    let ab: Small = total.iter().map(|row| row.iter().map(|v| v * scale_c).collect()).collect();
    let fb: Small = fd.block.iter().map(|row| row.iter().map(|v| v * scale_c).collect()).collect();
    let residual_abs = small_max_abs(&small_add(&ab, &fb, C64::new(-1.0, 0.0)));
    let gram_scale = w * small_max_abs(&conn.gram);
    let residual_rel = residual_abs / small_max_abs(&fb).max(small_max_abs(&ab)).max(1e-9 * gram_scale).max(1e-300);
    CurvatureReport {
        regime: regime_name(frame.stencil.scn.regime),
        p: frame.p,
        q: frame.q,
        rank: r,
        primitive: frame.primitive,
        direction: [direction.re, direction.im],
        term_mu,
        term_xi,
        term_eta,
        term_nu,
        term_comega,
        analytic_total,
        fd_total: sum(&|v| v.fd_total),
        residual_abs,
        residual_rel,
        term_scale,
        hermitian_defect: hermitian_defect(&ab).max(hermitian_defect(&fb)),
        dbar_norm: small_max_abs(&conn.dbar),
        decomposition: decs[0].meta.clone(),
        oracle: fd.meta,
        vectors,
        analytic_block: ab,
        fd_block: fb,
    }
}

fn report(frame: &HodgeFrame, direction: C64, want: Option<Regime>) -> Result<CurvatureReport> {
    if let Some(r) = want {
        require(frame, r)?;
    }
    let decs = frame.decompose()?;
    let conn = connection(frame, &decs)?;
    let terms = analytic_terms(frame, &decs)?;
    let fd = curvature_fd_oracle(frame, &conn)?;
    Ok(assemble(frame, &decs, terms, &conn, fd, direction))
}

pub fn curvature_negative(frame: &HodgeFrame, direction: C64) -> Result<CurvatureReport> {
    report(frame, direction, Some(Regime::Negative))
}

pub fn curvature_positive(frame: &HodgeFrame, direction: C64) -> Result<CurvatureReport> {
    report(frame, direction, Some(Regime::Positive))
}

pub fn curvature_flat(frame: &HodgeFrame, direction: C64) -> Result<CurvatureReport> {
    report(frame, direction, Some(Regime::Flat))
}

/// Curvature report with the formula matching the scenario's regime.
pub fn curvature(frame: &HodgeFrame, direction: C64) -> Result<CurvatureReport> {
    report(frame, direction, None)
}
