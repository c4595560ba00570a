use super::cascade::{cascade_at, CascadeState};
use crate::error::{Error, Result};
use crate::family::FamilyScenario;
use crate::par;
use num_complex::Complex64 as C64;
use serde::Serialize;

/// Finsler weight Φ = c Σ q φ_q on the base grid.
///
/// `hsc` is the curvature −∂∂̄Φ/e^Φ of the conformal metric e^Φ|dt|², and
/// `bound` the guaranteed upper bound −c e^{−c a_1 φ_0}.
#[derive(Clone, Debug, Serialize)]
pub struct FinslerMetric {
    pub m: usize,
    pub c: f64,
    /// a_1 .. a_m
    pub a: Vec<f64>,
    pub phi_big: Vec<f64>,
    pub bound: Vec<f64>,
    pub hsc: Vec<Option<f64>>,
    /// largest hsc − bound over interior samples
    pub max_excess: f64,
    /// smallest c e^{−c a_1 φ_0} over the grid
    pub curvature_constant: f64,
}

/// c = 1/Σ_{k≤m} k² and a_q = c(m + (m−1) + … + q), so Σ a_q = 1.
pub fn finsler_coefficients(m: usize) -> (f64, Vec<f64>) {
    let c = 1.0 / (1..=m).map(|k| (k * k) as f64).sum::<f64>();
    let a = (1..=m).map(|q| c * (q..=m).sum::<usize>() as f64).collect();
    (c, a)
}

pub fn finsler_weight(phi: &[f64], m: usize, c: f64) -> f64 {
    c * (1..=m).map(|q| q as f64 * phi.get(q).copied().unwrap_or(f64::NEG_INFINITY)).sum::<f64>()
}

pub fn build_finsler(state: &CascadeState) -> Result<FinslerMetric> {
    let m = state.m;
    if m == 0 {
        return Err(Error::NoMetric(format!("{}: the cascade has length zero", state.scenario)));
    }
    if let Some(p) = state.points.iter().find(|p| p.length() < m) {
        return Err(Error::NoMetric(format!("u^{m} vanishes at t = {}", p.t)));
    }
    let (c, a) = finsler_coefficients(m);
    let phi_big: Vec<f64> = state.points.iter().map(|p| finsler_weight(&p.phi, m, c)).collect();
    let bound: Vec<f64> = state.points.iter().map(|p| -c * (-c * a[0] * p.phi[0]).exp()).collect();
    let dd = state.grid.ddbar(&phi_big);
    let hsc: Vec<Option<f64>> = dd.iter().zip(&phi_big).map(|(d, f)| d.map(|d| -d / f.exp())).collect();
    let max_excess = hsc
        .iter()
        .zip(&bound)
        .filter_map(|(h, b)| h.map(|h| h - b))
        .fold(f64::NEG_INFINITY, f64::max);
    let curvature_constant = bound.iter().map(|b| -b).fold(f64::INFINITY, f64::min);
    Ok(FinslerMetric { m, c, a, phi_big, bound, hsc, max_excess, curvature_constant })
}

/// Σ a_q e^{φ_q−φ_{q−1}} − e^{Σ a_q(φ_q−φ_{q−1})}, nonnegative by convexity.
pub fn convexity_gap(phi: &[f64], a: &[f64]) -> f64 {
    let d: Vec<f64> = (1..=a.len()).map(|q| phi[q] - phi[q - 1]).collect();
    let lhs: f64 = a.iter().zip(&d).map(|(a, d)| a * d.exp()).sum();
    let rhs = a.iter().zip(&d).map(|(a, d)| a * d).sum::<f64>().exp();
    lhs - rhs
}

/// Holomorphic test disc γ: D → base.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DiscMap {
    /// γ(z) = center + radius·z
    Affine { center: [f64; 2], radius: f64 },
    /// γ(z) = center + radius·(z − a)/(1 − ā z)
    Mobius { center: [f64; 2], radius: f64, a: [f64; 2] },
}

impl DiscMap {
    /// γ(z) and γ'(z)
    pub fn eval(&self, z: C64) -> (C64, C64) {
        match *self {
            DiscMap::Affine { center, radius } => (C64::new(center[0], center[1]) + radius * z, C64::new(radius, 0.0)),
            DiscMap::Mobius { center, radius, a } => {
                let a = C64::new(a[0], a[1]);
                let den = C64::new(1.0, 0.0) - a.conj() * z;
                let w = (z - a) / den;
                let dw = (C64::new(1.0, 0.0) - a.norm_sqr()) / (den * den);
                (C64::new(center[0], center[1]) + radius * w, radius * dw)
            }
        }
    }
}

/// Sample points of the open unit disc: the origin and rings at fixed radii.
pub fn disc_samples() -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0)];
    for &r in &[0.3, 0.6, 0.85] {
        for k in 0..8 {
            out.push(C64::from_polar(r, std::f64::consts::PI * k as f64 / 4.0));
        }
    }
    out
}

/// Density (2/C)/(1−|z|²)² of the disc metric with curvature −C.
pub fn comparison_density(curvature: f64, z: C64) -> f64 {
    let s = 1.0 - z.norm_sqr();
    2.0 / (curvature * s * s)
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscCheck {
    pub disc: DiscMap,
    /// largest γ*g / comparison over the samples
    pub max_ratio: f64,
    pub pass: bool,
}

/// Ahlfors–Schwarz: a conformal metric with curvature ≤ −C pulls back under
/// any holomorphic disc below the comparison metric.
pub fn ahlfors_schwarz(
    density: &(dyn Fn(C64) -> Result<f64> + Sync),
    curvature: f64,
    disc: &DiscMap,
    contains: &(dyn Fn(C64) -> bool + Sync),
    tol: f64,
) -> Result<DiscCheck> {
    let zs = disc_samples();
    for z in &zs {
        let (w, _) = disc.eval(*z);
        if !contains(w) {
            return Err(Error::Coverage(format!("test disc leaves the sampled base at γ({z}) = {w}")));
        }
    }
    let ratios = par::try_map(&zs, |z| {
        let (w, dw) = disc.eval(*z);
        Ok::<_, Error>(density(w)? * dw.norm_sqr() / comparison_density(curvature, *z))
    })?;
    let max_ratio = ratios.into_iter().fold(0.0, f64::max);
    Ok(DiscCheck { disc: *disc, max_ratio, pass: max_ratio <= 1.0 + tol })
}

/// Lower bound k(t, v) ≥ constant·e^{Φ(t)/2}|v| for the Kobayashi–Royden
/// pseudometric, with per-disc Ahlfors–Schwarz checks.
#[derive(Clone, Debug, Serialize)]
pub struct KobayashiReport {
    pub constant: f64,
    pub curvature: f64,
    pub checks: Vec<DiscCheck>,
}

pub fn kobayashi_bound(
    scn: &FamilyScenario,
    state: &CascadeState,
    metric: &FinslerMetric,
    discs: &[DiscMap],
    tol: f64,
) -> Result<KobayashiReport> {
    let cst = metric.curvature_constant;
    if !(cst > 0.0) {
        return Err(Error::NoMetric("curvature bound is not negative".into()));
    }
    let m = metric.m;
    let c = metric.c;
    let density = |t: C64| {
        let p = cascade_at(scn, t, m)?;
        if p.length() < m {
            return Err(Error::NoMetric(format!("u^{m} vanishes at t = {t}")));
        }
        Ok(finsler_weight(&p.phi, m, c).exp())
    };
    let grid = &state.grid;
    let contains = |t: C64| grid.contains(t);
    let checks = discs.iter().map(|d| ahlfors_schwarz(&density, cst, d, &contains, tol)).collect::<Result<Vec<_>>>()?;
    Ok(KobayashiReport { constant: (cst / 2.0).sqrt(), curvature: cst, checks })
}

/// Discs used by default: an affine disc filling most of the grid and a
/// Möbius-reparametrized one.
pub fn default_discs(state: &CascadeState) -> Vec<DiscMap> {
    let g = &state.grid;
    let r = 0.9 * g.half_width;
    vec![
        DiscMap::Affine { center: g.center, radius: r },
        DiscMap::Mobius { center: g.center, radius: 0.5 * r, a: [0.3, -0.2] },
    ]
}
