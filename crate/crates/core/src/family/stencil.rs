use super::geometry::{horizontal_lift, kodaira_spencer, FiberVectorField, KodairaSpencerForm};
use super::scenario::FamilyScenario;
use super::total::{dbar_center, del_center, stencil_form, vertical_projection, CenterFrame, StencilForm, TotalForm};
use crate::error::{Error, Result};
use crate::fiber::{norm2, Form, OperatorSet, SpectralCache};
use crate::par;
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::sync::Arc;

/// Base offsets of the four arms of a centered stencil, in units of the step.
pub const ARMS: [C64; 4] = [C64 { re: 1.0, im: 0.0 }, C64 { re: -1.0, im: 0.0 }, C64 { re: 0.0, im: 1.0 }, C64 { re: 0.0, im: -1.0 }];

/// Relative change of the FD derivatives between steps h and h/2 above which
/// the stencil counts as unresolved.
pub const FD_CONSISTENCY: f64 = 5e-2;

/// Fiber data at one base point.
#[derive(Clone, Debug)]
pub struct FamilyPoint {
    pub t: C64,
    pub ops: OperatorSet,
    pub cache: Arc<SpectralCache>,
    pub lift: FiberVectorField,
}

impl FamilyPoint {
    pub fn new(scn: &FamilyScenario, t: C64) -> Result<Self> {
        let fm = scn.fiber_arc(t)?;
        let ops = OperatorSet::new(fm.clone())?;
        let cache = Arc::new(SpectralCache::new(&ops));
        let lift = horizontal_lift(scn, &fm, t)?;
        Ok(FamilyPoint { t, ops, cache, lift })
    }

    pub fn kodaira_spencer(&self, scn: &FamilyScenario) -> KodairaSpencerForm {
        kodaira_spencer(scn, &self.ops.fiber, &self.lift)
    }

    /// Re-home a form given on another fiber of the same grid.
    pub fn adopt(&self, u: &Form) -> Result<Form> {
        Form::from_components(&self.ops.fiber, u.p, u.q, u.comps.clone())
    }
}

/// Values at the center and on the arms at steps h (coarse) and h/2 (fine).
#[derive(Clone, Debug)]
pub struct PointSet<T> {
    pub center: T,
    pub coarse: Vec<T>,
    pub fine: Vec<T>,
}

impl<T> PointSet<T> {
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        std::iter::once(&self.center).chain(self.coarse.iter()).chain(self.fine.iter())
    }

    pub fn try_map<U: Send>(&self, f: impl Fn(&T) -> Result<U> + Sync + Send) -> Result<PointSet<U>>
    where
        T: Sync,
    {
        let all: Vec<&T> = self.iter().collect();
        let mut out = par::try_map(&all, |x| f(x))?.into_iter();
        let center = out.next().unwrap();
        let coarse = out.by_ref().take(4).collect();
        let fine = out.collect();
        Ok(PointSet { center, coarse, fine })
    }

    pub fn zip<'a, U>(&'a self, o: &'a PointSet<U>) -> PointSet<(&'a T, &'a U)> {
        PointSet {
            center: (&self.center, &o.center),
            coarse: self.coarse.iter().zip(&o.coarse).collect(),
            fine: self.fine.iter().zip(&o.fine).collect(),
        }
    }
}

/// Fibers on a centered square stencil of step h around t0, with the arms
/// repeated at h/2 for Richardson extrapolation.
#[derive(Clone, Debug)]
pub struct FamilyStencil {
    pub scn: FamilyScenario,
    pub h: f64,
    pub points: PointSet<FamilyPoint>,
    pub frame: CenterFrame,
}

impl FamilyStencil {
    pub fn new(scn: &FamilyScenario, h: f64) -> Result<Self> {
        Self::at(scn, scn.t0, h)
    }

    pub fn at(scn: &FamilyScenario, t0: C64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::ConfigValue { field: "step".into(), message: "must be positive".into() });
        }
        let ts = PointSet {
            center: t0,
            coarse: ARMS.iter().map(|a| t0 + a * h).collect(),
            fine: ARMS.iter().map(|a| t0 + a * (h / 2.0)).collect(),
        };
        let points = ts.try_map(|&t| FamilyPoint::new(scn, t))?;
        let fm = &points.center.ops.fiber;
        let (dphi_t, dphi_tb) = scn.dphi_s_base(t0);
        let frame = CenterFrame::new(&scn.period.derivative(t0), &fm.c, dphi_t, dphi_tb);
        Ok(FamilyStencil { scn: scn.clone(), h, points, frame })
    }

    pub fn center(&self) -> &FamilyPoint {
        &self.points.center
    }

    /// Vertical representatives û_t = P_v(u_t) of a family of fiber forms.
    pub fn vertical_family(&self, u: &PointSet<Form>) -> Result<PointSet<TotalForm>> {
        let pairs = self.points.zip(u);
        pairs.try_map(|(pt, f)| {
            let fm = &pt.ops.fiber;
            vertical_projection(&TotalForm::from_fiber(fm, f), &pt.lift.adapted)
        })
    }

    fn stencil_forms(&self, uh: &PointSet<TotalForm>) -> (StencilForm, StencilForm) {
        let c = &uh.coarse;
        let f = &uh.fine;
        let coarse = stencil_form(uh.center.clone(), &c[0], &c[1], &c[2], &c[3], self.h);
        let fine = stencil_form(uh.center.clone(), &f[0], &f[1], &f[2], &f[3], self.h / 2.0);
        (coarse, fine)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FdMeta {
    pub h: f64,
    /// ‖X(h) − X(h/2)‖ / scale over ν and μ, before extrapolation
    pub fd_change: f64,
    pub richardson: bool,
}

/// η, ν, μ, ξ of a harmonic family at the stencil center. `None` marks a
/// piece that vanishes for bidegree reasons.
#[derive(Clone, Debug)]
pub struct DeformDecomposition {
    pub p: usize,
    pub q: usize,
    pub eta: Option<Form>,
    pub nu: Form,
    pub mu: Form,
    pub xi: Option<Form>,
    pub meta: FdMeta,
}

fn pieces(st: &FamilyStencil, sf: &StencilForm, p: usize, q: usize) -> Result<(Option<Form>, Form, Form, Option<Form>)> {
    let pt = st.center();
    let fm = &pt.ops.fiber;
    let n = fm.n;
    let g = sf.center.gens;
    let db = dbar_center(&pt.ops, &st.frame, sf);
    let dp = del_center(&pt.ops, &st.frame, sf);
    let eta = if p >= 1 && q < n { Some(db.base_coefficient(fm, g.dt(), p - 1, q + 1)?) } else { None };
    let nu = db.base_coefficient(fm, g.dtb(), p, q)?;
    let mu = dp.base_coefficient(fm, g.dt(), p, q)?;
    let xi = if q >= 1 && p < n { Some(dp.base_coefficient(fm, g.dtb(), p + 1, q - 1)?) } else { None };
    Ok((eta, nu, mu, xi))
}

/// Decompose ∂̄û = dt∧η + dt̄∧ν and ∂^φû = dt∧μ + dt̄∧ξ on the center fiber.
pub fn deform_decompose(st: &FamilyStencil, u: &PointSet<Form>) -> Result<DeformDecomposition> {
    let (p, q) = (u.center.p, u.center.q);
    if u.iter().any(|f| (f.p, f.q) != (p, q)) {
        return Err(Error::Shape("family members have different bidegrees".into()));
    }
    let uh = st.vertical_family(u)?;
    let (coarse, fine) = st.stencil_forms(&uh);
    let fm = &st.center().ops.fiber;
    let (_, nu_c, mu_c, _) = pieces(st, &coarse, p, q)?;
    let (_, nu_f, mu_f, _) = pieces(st, &fine, p, q)?;
    let rich = StencilForm::richardson(&coarse, &fine);
    let (eta, nu, mu, xi) = pieces(st, &rich, p, q)?;
    let scale = norm2(fm, &u.center).sqrt().max(norm2(fm, &nu).sqrt()).max(norm2(fm, &mu).sqrt()).max(1e-300);
    let change = norm2(fm, &nu_c.sub(&nu_f)).sqrt().max(norm2(fm, &mu_c.sub(&mu_f)).sqrt()) / scale;
    if change > FD_CONSISTENCY {
        return Err(Error::Resolution(format!(
            "base step {:.3e} too coarse: derivatives change by {change:.3e} between h and h/2",
            st.h
        )));
    }
    Ok(DeformDecomposition { p, q, eta, nu, mu, xi, meta: FdMeta { h: st.h, fd_change: change, richardson: true } })
}
