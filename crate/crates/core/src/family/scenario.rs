use crate::error::{Error, Result};
use crate::expr::{parse_weight_expression, Bindings, Expr};
use crate::fiber::{FiberModel, KahlerChoice, Regime};
use crate::jet::Jet;
use crate::small::SMat;
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// No catalog entry: complex tori never have ample canonical bundle.
    CanonicallyPolarized,
    CalabiYau,
    /// A line bundle of nonzero degree on the fibers.
    LineBundle,
}

/// Analytic period map t ↦ τ(t).
#[derive(Clone, Debug)]
pub enum PeriodMap {
    /// τ(t) = τ0 + t·τ1
    Linear { tau0: SMat, tau1: SMat },
    /// τ(t) = −i log(t)/(2π), single-valued on a slit neighbourhood of the stencil
    LogDegenerate,
}

impl PeriodMap {
    pub fn n(&self) -> usize {
        match self {
            PeriodMap::Linear { tau0, .. } => tau0.n,
            PeriodMap::LogDegenerate => 1,
        }
    }

    pub fn eval(&self, t: C64) -> SMat {
        match self {
            PeriodMap::Linear { tau0, tau1 } => {
                let mut out = tau0.clone();
                for (o, b) in out.a.iter_mut().zip(&tau1.a) {
                    *o += t * b;
                }
                out
            }
            PeriodMap::LogDegenerate => SMat::scalar(-C64::i() * t.ln() / (2.0 * PI)),
        }
    }

    /// dτ/dt
    pub fn derivative(&self, t: C64) -> SMat {
        match self {
            PeriodMap::Linear { tau1, .. } => tau1.clone(),
            PeriodMap::LogDegenerate => SMat::scalar(-C64::i() / (2.0 * PI * t)),
        }
    }

    /// Entries of τ as jets in the variable `t`, row major.
    pub fn jet(&self, t: &Jet) -> Vec<Jet> {
        match self {
            PeriodMap::Linear { tau0, tau1 } => tau0
                .a
                .iter()
                .zip(&tau1.a)
                .map(|(&a, &b)| *t * b + Jet::constant(t.nv, a))
                .collect(),
            PeriodMap::LogDegenerate => vec![t.ln().scale(-C64::i() / (2.0 * PI))],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub kind: FamilyKind,
    pub regime: &'static str,
    pub period_map: &'static str,
    pub weight: &'static str,
    pub degree: i32,
    pub description: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        id: "isotrivial-flat",
        kind: FamilyKind::CalabiYau,
        regime: "flat",
        period_map: "tau = 0.2 + 1.1i",
        weight: "0",
        degree: 0,
        description: "constant elliptic curve, trivial bundle; every curvature vanishes",
    },
    CatalogEntry {
        id: "elliptic-cy",
        kind: FamilyKind::CalabiYau,
        regime: "flat",
        period_map: "tau = t",
        weight: "log(2 im t)",
        degree: 0,
        description: "Legendre-type elliptic family with the anticanonical bundle and its m-Bergman weight",
    },
    CatalogEntry {
        id: "elliptic-neg-d1",
        kind: FamilyKind::LineBundle,
        regime: "negative",
        period_map: "tau = t",
        weight: "model(d=-1) - 0.5|t|^2 + 0.05 cos(2 pi im z / im t) re t",
        degree: -1,
        description: "degree -1 bundle with fiberwise negative weight; curvature of H^{0,1}",
    },
    CatalogEntry {
        id: "elliptic-pos-d1",
        kind: FamilyKind::LineBundle,
        regime: "positive",
        period_map: "tau = t",
        weight: "model(d=1) + 0.5|t|^2 - 0.05 cos(2 pi im z / im t) re t",
        degree: 1,
        description: "dual of elliptic-neg-d1; curvature of H^{1,0}",
    },
    CatalogEntry {
        id: "abelian-surface-flat",
        kind: FamilyKind::CalabiYau,
        regime: "flat",
        period_map: "tau = [[t, 0.25], [0.25, 1.2i + 0.5t]]",
        weight: "0",
        degree: 0,
        description: "abelian surfaces, trivial bundle; Griffiths curvature of primitive H^{1,1}",
    },
    CatalogEntry {
        id: "elliptic-degenerate",
        kind: FamilyKind::CalabiYau,
        regime: "flat",
        period_map: "tau = -i log(t) / (2 pi)",
        weight: "log(2 im tau)",
        degree: 0,
        description: "elliptic curves degenerating at t = 0 (probe only)",
    },
];

pub fn catalog_entry(id: &str) -> Result<&'static CatalogEntry> {
    CATALOG.iter().find(|e| e.id == id).ok_or_else(|| Error::ScenarioNotFound(id.to_string()))
}

/// A family of tori X_t with a line bundle (L, e^{-φ}) over a small base disc.
///
/// On elliptic fibers the weight is φ = 2πd(Im z − Im τ/2)²/Im τ + φ_s(z,t),
/// the first term being the weight of the Landau frame used by the fiber
/// module; φ_s must be periodic on every fiber.
#[derive(Clone, Debug)]
pub struct FamilyScenario {
    pub id: String,
    pub kind: FamilyKind,
    pub regime: Regime,
    pub period: PeriodMap,
    pub degree: i32,
    /// φ_s as an expression in z, t (elliptic fibers only)
    pub extra: Expr,
    pub perturbation: Option<Expr>,
    pub t0: C64,
    pub grid_size: usize,
}

fn parse(text: &str) -> Expr {
    parse_weight_expression(text).expect("catalog expressions parse")
}

impl FamilyScenario {
    pub fn from_catalog(id: &str, grid_size: usize) -> Result<Self> {
        let e = catalog_entry(id)?;
        let lin = |t0: C64, t1: C64| PeriodMap::Linear { tau0: SMat::scalar(t0), tau1: SMat::scalar(t1) };
        let c = C64::new;
        let (regime, period, extra, t0) = match id {
            "isotrivial-flat" => (Regime::Flat, lin(c(0.2, 1.1), c(0.0, 0.0)), Expr::zero(), c(0.1, 0.9)),
            "elliptic-cy" => (Regime::Flat, lin(c(0.0, 0.0), c(1.0, 0.0)), parse("log(2*im(t))"), c(0.15, 1.0)),
            "elliptic-neg-d1" => (
                Regime::Negative,
                lin(c(0.0, 0.0), c(1.0, 0.0)),
                parse("-0.5*abs2(t) + 0.05*cos(2*pi*im(z)/im(t))*re(t)"),
                c(0.15, 1.0),
            ),
            "elliptic-pos-d1" => (
                Regime::Positive,
                lin(c(0.0, 0.0), c(1.0, 0.0)),
                parse("0.5*abs2(t) - 0.05*cos(2*pi*im(z)/im(t))*re(t)"),
                c(0.15, 1.0),
            ),
            "abelian-surface-flat" => {
                let tau0 = SMat::from_rows(&[&[c(0.0, 0.0), c(0.25, 0.0)], &[c(0.25, 0.0), c(0.0, 1.2)]]);
                let tau1 = SMat::from_rows(&[&[c(1.0, 0.0), c(0.0, 0.0)], &[c(0.0, 0.0), c(0.5, 0.0)]]);
                (Regime::Flat, PeriodMap::Linear { tau0, tau1 }, Expr::zero(), c(0.3, 1.0))
            }
            "elliptic-degenerate" => (
                Regime::Flat,
                PeriodMap::LogDegenerate,
                parse("log(-log(abs2(t))/(2*pi))"),
                c(0.05, 0.0),
            ),
            _ => unreachable!("catalog ids are matched above"),
        };
        Ok(FamilyScenario {
            id: id.to_string(),
            kind: e.kind,
            regime,
            period,
            degree: e.degree,
            extra,
            perturbation: None,
            t0,
            grid_size,
        })
    }

    pub fn n(&self) -> usize {
        self.period.n()
    }

    /// Add a weight perturbation. It must be periodic on the fibers and, for
    /// degree-zero bundles, constant along them.
    pub fn with_perturbation(mut self, p: Expr) -> Result<Self> {
        if p.is_zero_constant() {
            self.perturbation = None;
            return Ok(self);
        }
        if self.n() != 1 {
            return Err(Error::UnsupportedRegime("weight perturbations are supported on elliptic fibers only".into()));
        }
        self.perturbation = Some(p);
        self.check_periodic()?;
        Ok(self)
    }

    pub fn with_t0(mut self, t0: C64) -> Self {
        self.t0 = t0;
        self
    }

    pub fn tau(&self, t: C64) -> SMat {
        self.period.eval(t)
    }

    /// φ_s(z, t) as a complex value (imaginary part zero for valid input).
    pub fn phi_s(&self, z: C64, t: C64) -> f64 {
        let mut v = self.extra.eval_at(z, t).re;
        if let Some(p) = &self.perturbation {
            v += p.eval_at(z, t).re;
        }
        v
    }

    fn phi_s_jet(&self, z: Jet, t: Jet) -> Jet {
        let b = Bindings::jets(z, t);
        let mut v = self.extra.eval(&b).re();
        if let Some(p) = &self.perturbation {
            v = v + p.eval(&b).re();
        }
        v
    }

    /// Full weight φ(z, t) as a jet, elliptic fibers.
    pub fn phi_jet(&self, z: Jet, t: Jet) -> Jet {
        let tau = self.period.jet(&t)[0];
        let t2 = tau.im();
        let y = z.im() - t2 * 0.5;
        let model = y * y / t2 * (2.0 * PI * self.degree as f64);
        model + self.phi_s_jet(z, t)
    }

    /// Sample φ_s on the fiber grid at base point t.
    pub fn phi_s_grid(&self, t: C64) -> Vec<f64> {
        let n = self.n();
        let len = self.grid_size.pow(2 * n as u32);
        if n != 1 {
            return vec![0.0; len];
        }
        let tau = self.tau(t).a[0];
        let g = crate::grid::Grid::new(1, self.grid_size);
        (0..len)
            .map(|i| {
                let (x, y) = g.point(i);
                self.phi_s(C64::new(x[0], 0.0) + tau * y[0], t)
            })
            .collect()
    }

    /// E_t φ_s and E_t̄ φ_s: base derivatives at fixed fiber coordinates (x, y).
    pub fn dphi_s_base(&self, t: C64) -> (Vec<C64>, Vec<C64>) {
        let n = self.n();
        let len = self.grid_size.pow(2 * n as u32);
        if n != 1 {
            return (vec![C64::new(0.0, 0.0); len], vec![C64::new(0.0, 0.0); len]);
        }
        let g = crate::grid::Grid::new(1, self.grid_size);
        let tj = Jet::complex_var(2, 0, t);
        let tau = self.period.jet(&tj)[0];
        let mut dt = Vec::with_capacity(len);
        let mut dtb = Vec::with_capacity(len);
        for i in 0..len {
            let (x, y) = g.point(i);
            let z = tau * y[0] + x[0];
            let v = self.phi_s_jet(z, tj);
            dt.push(v.d_holo(0));
            dtb.push(v.d_anti(0));
        }
        (dt, dtb)
    }

    pub fn kahler(&self) -> KahlerChoice {
        match self.regime {
            Regime::Flat => KahlerChoice::ModelFlat,
            _ => KahlerChoice::FromWeight,
        }
    }

    pub fn fiber_at(&self, t: C64) -> Result<FiberModel> {
        let n = self.n();
        let tau = self.tau(t);
        let degree = if n == 1 { vec![self.degree] } else { vec![0; n] };
        FiberModel::new(tau, self.grid_size, degree, self.phi_s_grid(t), self.kahler())
    }

    pub fn fiber_arc(&self, t: C64) -> Result<Arc<FiberModel>> {
        self.fiber_at(t).map(Arc::new)
    }

    /// φ_s must be invariant under z → z+1 and z → z+τ(t).
    pub fn check_periodic(&self) -> Result<()> {
        if self.n() != 1 {
            return Ok(());
        }
        let h = 0.05;
        for &dt in &[C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(0.0, h), C64::new(-h, -h)] {
            let t = self.t0 + dt;
            let tau = self.tau(t).a[0];
            for k in 0..7 {
                let z = C64::new(0.13 * k as f64, 0.0) + tau * (0.11 * k as f64 + 0.05);
                let v = self.phi_s(z, t);
                let scale = v.abs().max(1.0);
                for shift in [C64::new(1.0, 0.0), tau] {
                    let w = self.phi_s(z + shift, t);
                    if !w.is_finite() || (w - v).abs() > 1e-10 * scale {
                        return Err(Error::InvalidFiber(format!(
                            "weight perturbation is not periodic on the fiber at t = {t}: {v:.6e} vs {w:.6e}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Fiberwise complex Hessian ∂²φ/∂z∂z̄ of the full weight on the center
    /// fiber grid (elliptic) or identically zero (flat abelian surfaces).
    pub fn fiber_hessian(&self, t: C64) -> Vec<f64> {
        let n = self.n();
        let len = self.grid_size.pow(2 * n as u32);
        if n != 1 {
            return vec![0.0; len];
        }
        let g = crate::grid::Grid::new(1, self.grid_size);
        let tau = self.tau(t).a[0];
        (0..len)
            .map(|i| {
                let (x, y) = g.point(i);
                let z = C64::new(x[0], 0.0) + tau * y[0];
                let j = self.phi_jet(Jet::complex_var(4, 0, z), Jet::complex_var(4, 2, t));
                j.d_holo_anti(0, 0).re
            })
            .collect()
    }

    /// Check the regime against the sign of the fiberwise Hessian at t0.
    pub fn check_regime(&self) -> Result<()> {
        let tau = self.tau(self.t0);
        if !(tau.im().hermitian_min_eig() > 0.0) {
            return Err(Error::InvalidFiber(format!("Im τ is not positive definite at t = {}", self.t0)));
        }
        if self.n() == 2 && (self.perturbation.is_some() || self.degree != 0) {
            return Err(Error::UnsupportedRegime("abelian-surface families carry the trivial bundle".into()));
        }
        let h = self.fiber_hessian(self.t0);
        let lo = h.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ok = match self.regime {
            Regime::Negative => hi < 0.0,
            Regime::Positive => lo > 0.0,
            Regime::Flat => lo.abs().max(hi.abs()) <= 1e-10,
        };
        if !ok {
            return Err(Error::UnsupportedRegime(format!(
                "fiberwise Hessian of φ ranges over [{lo:.3e}, {hi:.3e}], inconsistent with the {:?} regime",
                self.regime
            )));
        }
        Ok(())
    }

    /// C(φ) = ∂²φ/∂t∂t̄ for fiberwise flat weights, with its spread over the
    /// center fiber and the largest mixed derivative |∂²φ/∂t∂z̄|. Both vanish
    /// when ∂∂̄φ is pulled back from the base.
    pub fn base_curvature(&self, t: C64) -> (f64, f64, f64) {
        if self.n() != 1 {
            return (0.0, 0.0, 0.0);
        }
        let g = crate::grid::Grid::new(1, self.grid_size);
        let tau = self.tau(t).a[0];
        let mut vals = Vec::with_capacity(g.len);
        let mut mixed = 0.0f64;
        for i in 0..g.len {
            let (x, y) = g.point(i);
            let z = C64::new(x[0], 0.0) + tau * y[0];
            let j = self.phi_jet(Jet::complex_var(4, 0, z), Jet::complex_var(4, 2, t));
            vals.push(j.d_holo_anti(2, 2).re);
            mixed = mixed.max(j.d_holo_anti(2, 0).norm());
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let spread = vals.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        (mean, spread, mixed)
    }
}
