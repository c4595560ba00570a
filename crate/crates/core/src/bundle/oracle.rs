use super::frame::{connection, gram_matrix, ConnectionData, HodgeFrame};
use crate::error::{Error, Result};
use crate::family::{FamilyStencil, ARMS, FD_CONSISTENCY};
use crate::linalg::{small_add, small_adjoint, small_identity, small_inverse, small_max_abs, small_mul, small_scale, Small};
use crate::par;
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::sync::Arc;

#[derive(Clone, Debug, Serialize)]
pub struct OracleMeta {
    pub h: f64,
    /// relative change of ∂∂̄S between h and h/2
    pub fd_change: f64,
    /// ‖D''‖ of the uncorrected frame at the center
    pub dbar_norm: f64,
}

/// Curvature block ⟨Θ e_a, e_b⟩ from finite differences of Gram matrices.
#[derive(Clone, Debug)]
pub struct FdCurvature {
    pub block: Small,
    /// ∂_t S and ∂_t∂_t̄ S of the corrected frame at the center
    pub gram_dt: Small,
    pub gram_ddbar: Small,
    pub meta: OracleMeta,
}

/// ∂_t A of the D'' matrix, from frames on stencils centered at the arms.
fn dbar_derivative(frame: &HodgeFrame) -> Result<Small> {
    let st = &frame.stencil;
    let h = st.h;
    let t0 = st.center().t;
    let arms: Vec<C64> = ARMS.to_vec();
    let mats = par::try_map(&arms, |a| {
        let sub = Arc::new(FamilyStencil::at(&st.scn, t0 + a * h, h)?);
        let fr = HodgeFrame::from_seeds(sub, frame.seeds.clone(), frame.primitive)?;
        let decs = fr.decompose()?;
        Ok::<_, Error>(connection(&fr, &decs)?.dbar)
    })?;
    let dx = small_add(&mats[0], &mats[1], C64::new(-1.0, 0.0));
    let dy = small_add(&mats[2], &mats[3], C64::new(-1.0, 0.0));
    Ok(small_scale(&small_add(&dx, &dy, C64::new(0.0, -1.0)), C64::new(1.0 / (4.0 * h), 0.0)))
}

/// ∂_t S and ∂_t∂_t̄ S at step k from the center and four arms.
fn derivatives(c: &Small, arms: &[Small], k: f64) -> (Small, Small) {
    let m1 = C64::new(-1.0, 0.0);
    let dx = small_add(&arms[0], &arms[1], m1);
    let dy = small_add(&arms[2], &arms[3], m1);
    let dt = small_scale(&small_add(&dx, &dy, C64::new(0.0, -1.0)), C64::new(1.0 / (4.0 * k), 0.0));
    let mut lap = small_scale(c, C64::new(-4.0, 0.0));
    for a in arms {
        lap = small_add(&lap, a, C64::new(1.0, 0.0));
    }
    (dt, small_scale(&lap, C64::new(0.25 / (k * k), 0.0)))
}

fn richardson(coarse: &Small, fine: &Small) -> Small {
    small_add(&small_scale(fine, C64::new(4.0 / 3.0, 0.0)), coarse, C64::new(-1.0 / 3.0, 0.0))
}

/// Θ = ∂S S^{-1} ∂̄S − ∂∂̄S for the Gram matrix S of a frame made holomorphic
/// to second order at the center: s = G e with G(δ) = I − A δ̄ − (∂_t A) |δ|².
pub fn curvature_fd_oracle(frame: &HodgeFrame, conn: &ConnectionData) -> Result<FdCurvature> {
    let st = &frame.stencil;
    let h = st.h;
    let r = frame.rank;
    let a0 = conn.dbar.clone();
    let a1 = dbar_derivative(frame)?;
    let grams = gram_matrix(frame)?;
    let gauge = |delta: C64, s: &Small| {
        let mut g = small_identity(r);
        g = small_add(&g, &a0, -delta.conj());
        g = small_add(&g, &a1, C64::new(-delta.norm_sqr(), 0.0));
        small_mul(&small_mul(&g, s), &small_adjoint(&g))
    };
    let coarse: Vec<Small> = ARMS.iter().zip(&grams.coarse).map(|(a, s)| gauge(a * h, s)).collect();
    let fine: Vec<Small> = ARMS.iter().zip(&grams.fine).map(|(a, s)| gauge(a * (h / 2.0), s)).collect();
    let s0 = grams.center.clone();
    let (dt_c, ddb_c) = derivatives(&s0, &coarse, h);
    let (dt_f, ddb_f) = derivatives(&s0, &fine, h / 2.0);
    let scale = small_max_abs(&ddb_f).max(small_max_abs(&dt_f)).max(1e-8 * small_max_abs(&s0));
    let change = small_max_abs(&small_add(&ddb_c, &ddb_f, C64::new(-1.0, 0.0))) / scale;
    if change > FD_CONSISTENCY {
        return Err(Error::Resolution(format!(
            "Gram second derivatives change by {change:.3e} between h = {h:.3e} and h/2"
        )));
    }
    let dt = richardson(&dt_c, &dt_f);
    let ddb = richardson(&ddb_c, &ddb_f);
    let first = small_mul(&small_mul(&dt, &small_inverse(&s0)?), &small_adjoint(&dt));
    let block = small_add(&first, &ddb, C64::new(-1.0, 0.0));
    let meta = OracleMeta { h, fd_change: change, dbar_norm: small_max_abs(&a0) };
    Ok(FdCurvature { block, gram_dt: dt, gram_ddbar: ddb, meta })
}
