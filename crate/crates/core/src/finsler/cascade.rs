use crate::error::{Error, Result};
use crate::family::{cup_product, horizontal_lift, kodaira_spencer, FamilyKind, FamilyScenario};
use crate::fiber::{harmonic_project, norm2, Form, OperatorSet, Regime, SpectralCache};
use crate::par;
use num_complex::Complex64 as C64;
use serde::Serialize;

/// ‖u^q‖ below this fraction of ‖u⁰‖ counts as vanishing.
pub const VANISHING: f64 = 1e-10;

/// Square sample grid on the base, `size` points per side.
#[derive(Clone, Debug, Serialize)]
pub struct BaseGrid {
    pub center: [f64; 2],
    pub half_width: f64,
    pub size: usize,
}

impl BaseGrid {
    pub fn new(center: C64, half_width: f64, size: usize) -> Result<Self> {
        if size < 3 || !(half_width > 0.0) {
            return Err(Error::ConfigValue { field: "base_grid".into(), message: "needs ≥ 3 points and a positive extent".into() });
        }
        Ok(BaseGrid { center: [center.re, center.im], half_width, size })
    }

    /// Extent used when a run does not specify one.
    pub fn default_for(scn: &FamilyScenario, size: usize) -> Result<Self> {
        let w = match scn.id.as_str() {
            "elliptic-degenerate" => 0.02,
            "abelian-surface-flat" => 0.3,
            _ => 0.5,
        };
        BaseGrid::new(scn.t0, w, size)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.size - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.size * self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Sample (i, j) with i along Re t and j along Im t, flattened as j*size + i.
    pub fn point(&self, idx: usize) -> C64 {
        let (i, j) = (idx % self.size, idx / self.size);
        let s = self.spacing();
        C64::new(self.center[0] - self.half_width + s * i as f64, self.center[1] - self.half_width + s * j as f64)
    }

    pub fn contains(&self, t: C64) -> bool {
        let tol = 1e-12 * self.half_width;
        (t.re - self.center[0]).abs() <= self.half_width + tol && (t.im - self.center[1]).abs() <= self.half_width + tol
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        let (i, j) = (idx % self.size, idx / self.size);
        i > 0 && j > 0 && i + 1 < self.size && j + 1 < self.size
    }

    /// ∂_t∂_t̄ f = Δf/4 by the 5-point Laplacian at interior samples.
    pub fn ddbar(&self, f: &[f64]) -> Vec<Option<f64>> {
        let s = self.spacing();
        let n = self.size;
        (0..self.len())
            .map(|k| {
                if !self.is_interior(k) {
                    return None;
                }
                let v = [f[k + 1], f[k - 1], f[k + n], f[k - n]];
                if v.iter().chain(std::iter::once(&f[k])).any(|x| !x.is_finite()) {
                    return None;
                }
                Some((v.iter().sum::<f64>() - 4.0 * f[k]) / (4.0 * s * s))
            })
            .collect()
    }
}

/// Cascade u⁰, u¹ = (κ∪u⁰)_h, … on one fiber.
#[derive(Clone, Debug)]
pub struct CascadePoint {
    pub t: C64,
    pub sections: Vec<Form>,
    /// φ_q = log(‖u^q‖²/‖u⁰‖²) for the nonvanishing u^q
    pub phi: Vec<f64>,
    /// ‖(κ̄∪u^q)_h‖² − ‖u^q‖⁴/‖u^{q−1}‖² in units of ‖u⁰‖², for q = 1..
    pub to_yeung: Vec<f64>,
}

impl CascadePoint {
    pub fn length(&self) -> usize {
        self.phi.len() - 1
    }

    /// φ_q, −∞ beyond the last nonvanishing section.
    pub fn phi_at(&self, q: usize) -> f64 {
        self.phi.get(q).copied().unwrap_or(f64::NEG_INFINITY)
    }
}

fn check_cascade_scenario(scn: &FamilyScenario) -> Result<()> {
    if scn.kind != FamilyKind::CalabiYau {
        return Err(Error::UnsupportedRegime(format!(
            "the cascade starts from the normalized holomorphic n-form; scenario {} is not a Calabi–Yau family",
            scn.id
        )));
    }
    if scn.regime != Regime::Flat {
        return Err(Error::UnsupportedRegime("Calabi–Yau cascades need a fiberwise flat weight".into()));
    }
    Ok(())
}

/// Run the cascade on the fiber over t.
///
/// u⁰ is the coordinate form dz_1∧…∧dz_n, which extends holomorphically in t;
/// dividing every norm by ‖u⁰‖² is the m-Bergman normalization, so φ_0 = 0.
pub fn cascade_at(scn: &FamilyScenario, t: C64, m_max: usize) -> Result<CascadePoint> {
    check_cascade_scenario(scn)?;
    let fm = scn.fiber_arc(t)?;
    let n = fm.n;
    let ops = OperatorSet::new(fm.clone())?;
    let cache = SpectralCache::new(&ops);
    let lift = horizontal_lift(scn, &fm, t)?;
    let ks = kodaira_spencer(scn, &fm, &lift);
    let u0 = Form::scalar(&fm, n, 0, vec![C64::new(1.0, 0.0); fm.len()])?;
    let n0 = norm2(&fm, &u0);
    let mut sections = vec![u0];
    let mut norms = vec![1.0];
    let mut to_yeung = Vec::new();
    for _ in 1..=m_max.min(n) {
        let prev = sections.last().unwrap();
        let w = cup_product(&fm, &ks, prev, false)?;
        let u = harmonic_project(&w, &ops, &cache)?;
        let nu = norm2(&fm, &u) / n0;
        if nu.sqrt() < VANISHING {
            break;
        }
        sections.push(u);
        norms.push(nu);
    }
    for q in 1..sections.len() {
        let xi = cup_product(&fm, &ks, &sections[q], true)?;
        let xh = harmonic_project(&xi, &ops, &cache)?;
        to_yeung.push(norm2(&fm, &xh) / n0 - norms[q] * norms[q] / norms[q - 1]);
    }
    Ok(CascadePoint { t, sections, phi: norms.iter().map(|v| v.ln()).collect(), to_yeung })
}

#[derive(Clone, Debug)]
pub struct CascadeState {
    pub scenario: String,
    pub kind: FamilyKind,
    pub grid: BaseGrid,
    pub points: Vec<CascadePoint>,
    /// largest q with u^q not identically zero over the grid
    pub m: usize,
    pub warnings: Vec<String>,
}

impl CascadeState {
    /// φ_q over the grid.
    pub fn phi(&self, q: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.phi_at(q)).collect()
    }
}

pub fn run_cascade(scn: &FamilyScenario, grid: &BaseGrid, m_max: usize) -> Result<CascadeState> {
    check_cascade_scenario(scn)?;
    let idx: Vec<usize> = (0..grid.len()).collect();
    let points = par::try_map(&idx, |&k| cascade_at(scn, grid.point(k), m_max))?;
    let m = points.iter().map(|p| p.length()).max().unwrap_or(0);
    let mut warnings = Vec::new();
    if m == 0 {
        warnings.push(format!("{}: u¹ vanishes on every fiber, the family is isotrivial on the sampled base", scn.id));
    } else if points.iter().any(|p| p.length() < m) {
        warnings.push(format!("{}: u^{m} vanishes at some samples", scn.id));
    }
    Ok(CascadeState { scenario: scn.id.clone(), kind: scn.kind, grid: grid.clone(), points, m, warnings })
}

/// Residual fields of i∂∂̄φ_q ≥ e^{φ_q−φ_{q−1}} − e^{φ_{q+1}−φ_q}.
#[derive(Clone, Debug, Serialize)]
pub struct CascadeCheck {
    pub q: usize,
    /// FD ∂∂̄φ_q minus the right-hand side at interior samples
    pub residual: Vec<Option<f64>>,
    pub min_residual: f64,
    pub fraction_ok: f64,
    pub interior: usize,
}

pub const CASCADE_TOL: f64 = 1e-4;

/// `tol` is the allowed negative residual; CASCADE_TOL is the usual choice.
pub fn cascade_curvature_check(state: &CascadeState, tol: f64) -> Vec<CascadeCheck> {
    let g = &state.grid;
    (1..=state.m)
        .map(|q| {
            let lhs = g.ddbar(&state.phi(q));
            let residual: Vec<Option<f64>> = lhs
                .iter()
                .zip(&state.points)
                .map(|(l, p)| {
                    let l = (*l)?;
                    let (a, b, c) = (p.phi_at(q - 1), p.phi_at(q), p.phi_at(q + 1));
                    if !b.is_finite() {
                        return None;
                    }
                    Some(l - ((b - a).exp() - (c - b).exp()))
                })
                .collect();
            let vals: Vec<f64> = residual.iter().flatten().copied().collect();
            let ok = vals.iter().filter(|&&v| v >= -tol).count();
            CascadeCheck {
                q,
                min_residual: vals.iter().copied().fold(f64::INFINITY, f64::min),
                fraction_ok: if vals.is_empty() { 1.0 } else { ok as f64 / vals.len() as f64 },
                interior: vals.len(),
                residual,
            }
        })
        .collect()
}

/// To–Yeung residuals at one sample, one per q ≥ 1 with u^{q−1} ≠ 0.
pub fn to_yeung_check(scn: &FamilyScenario, t: C64, m_max: usize) -> Result<Vec<f64>> {
    Ok(cascade_at(scn, t, m_max)?.to_yeung)
}
