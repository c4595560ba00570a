use super::curvature::{curvature, CurvatureReport};
use super::frame::{build_frame, HodgeFrame};
use crate::error::{Error, Result};
use crate::family::{FamilyScenario, FamilyStencil};
use crate::fiber::{norm2, FiberModel, Form};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::sync::Arc;

/// ∫ u ∧ v for an L-valued (0,1)-form u and an L*-valued (1,0)-form v on the
/// same elliptic fiber. Unitary frames of L and L* pair to 1, so the
/// integrand is the product of components times dz̄∧dz = 2i dA.
pub fn serre_pairing(fl: &FiberModel, u: &Form, fd: &FiberModel, v: &Form) -> Result<C64> {
    if fl.n != 1 || fd.n != 1 || (u.p, u.q) != (0, 1) || (v.p, v.q) != (1, 0) {
        return Err(Error::Shape("the pairing is between (0,1)- and (1,0)-forms on elliptic fibers".into()));
    }
    if fl.d() != -fd.d() || fl.size() != fd.size() || (fl.tau.a[0] - fd.tau.a[0]).norm() > 1e-14 {
        return Err(Error::Precondition("the two fibers must carry dual bundles on the same torus".into()));
    }
    let da = fl.im_tau.a[0].re / fl.len() as f64;
    let s: C64 = u.comps[0].iter().zip(&v.comps[0]).map(|(a, b)| a * b).sum();
    Ok(C64::new(0.0, 2.0) * s * da)
}

#[derive(Clone, Debug, Serialize)]
pub struct SerreReport {
    /// ⟨Θu,u⟩/‖u‖² on H^{0,1}(L)
    pub theta_l: f64,
    /// ⟨Θv,v⟩/‖v‖² on H^{1,0}(L*)
    pub theta_dual: f64,
    /// |θ_l + θ_dual| / max(|θ_l|, |θ_dual|)
    pub residual_rel: f64,
    /// |∫u∧v| / (‖u‖‖v‖), 1 when the pairing is an isometry
    pub pairing_ratio: f64,
    pub fd_residual_rel: f64,
}

/// Compares curvature of H^{0,1}(L) and H^{1,0}(L*) for rank-one scenarios.
pub fn serre_duality_check(neg: &FamilyScenario, pos: &FamilyScenario, h: f64) -> Result<SerreReport> {
    let sn = Arc::new(FamilyStencil::new(neg, h)?);
    let sp = Arc::new(FamilyStencil::new(pos, h)?);
    let fn_ = build_frame(sn.clone(), 0, 1, false)?;
    let fp = build_frame(sp.clone(), 1, 0, false)?;
    if fn_.rank != 1 || fp.rank != 1 {
        return Err(Error::Precondition("the duality check is written for rank-one bundles".into()));
    }
    let one = C64::new(1.0, 0.0);
    let rn = curvature(&fn_, one)?;
    let rp = curvature(&fp, one)?;
    serre_from_reports((&fn_, &rn), (&fp, &rp))
}

/// Duality check from frames and unit-direction reports already computed for
/// H^{0,1}(L) and H^{1,0}(L*).
pub fn serre_from_reports(neg: (&HodgeFrame, &CurvatureReport), pos: (&HodgeFrame, &CurvatureReport)) -> Result<SerreReport> {
    let ((fn_, rn), (fp, rp)) = (neg, pos);
    if fn_.rank != 1 || fp.rank != 1 || (fn_.p, fn_.q) != (0, 1) || (fp.p, fp.q) != (1, 0) {
        return Err(Error::Precondition("the duality check pairs rank-one H^{0,1}(L) with H^{1,0}(L*)".into()));
    }
    let (sn, sp) = (&fn_.stencil, &fp.stencil);
    let (fl, fd) = (&sn.center().ops.fiber, &sp.center().ops.fiber);
    let (u, v) = (&fn_.center()[0], &fp.center()[0]);
    let (nu, nv) = (norm2(fl, u), norm2(fd, v));
    let pair = serre_pairing(fl, u, fd, v)?;
    let theta_l = rn.analytic_total / nu;
    let theta_dual = rp.analytic_total / nv;
    let fl_fd = rn.fd_total / nu;
    let fd_fd = rp.fd_total / nv;
    let rel = |a: f64, b: f64| (a + b).abs() / a.abs().max(b.abs()).max(1e-300);
    Ok(SerreReport {
        theta_l,
        theta_dual,
        residual_rel: rel(theta_l, theta_dual),
        pairing_ratio: pair.norm() / (nu * nv).sqrt(),
        fd_residual_rel: rel(fl_fd, fd_fd),
    })
}
