use super::cascade::{cascade_at, BaseGrid};
use crate::error::{Error, Result};
use crate::family::{FamilyKind, FamilyScenario};
use crate::fiber::{OperatorSet, SpectralCache};
use crate::par;
use num_complex::Complex64 as C64;
use serde::Serialize;

/// Relative m-Bergman weight φ_{X/Y} of a Calabi–Yau family, sampled at the
/// first fiber grid point over every base sample.
#[derive(Clone, Debug, Serialize)]
pub struct BergmanCy {
    pub phi: Vec<f64>,
    /// largest |c_n∫u∧ū e^{φ} − 1|
    pub normalization_defect: f64,
    /// largest oscillation of φ_{X/Y} along a fiber
    pub z_variation: f64,
    /// FD ∂_t∂_t̄ φ_{X/Y} at interior samples
    pub hessian: Vec<Option<f64>>,
    pub min_hessian: f64,
}

struct FiberBergman {
    phi0: f64,
    defect: f64,
    spread: f64,
}

/// On one fiber: f = u/u(z_0) for the harmonic (n,0)-form u, then
/// e^{φ_{X/Y}} = |f|²/(c_n∫f∧f̄). For the trivial bundle f is the coordinate form.
fn bergman_fiber(scn: &FamilyScenario, t: C64) -> Result<FiberBergman> {
    let mut flat = scn.clone();
    flat.extra = crate::expr::Expr::zero();
    flat.perturbation = None;
    let fm = flat.fiber_arc(t)?;
    let n = fm.n;
    let ops = OperatorSet::new(fm.clone())?;
    let cache = SpectralCache::new(&ops);
    let sp = cache.spectrum(n, 0)?;
    if sp.harmonic_dim != 1 {
        return Err(Error::Precondition(format!("h^{{{n},0}} = {} on a Calabi–Yau fiber", sp.harmonic_dim)));
    }
    let u = cache.eigenform(n, 0, 0)?;
    let f0 = u.comps[0][0];
    let f: Vec<C64> = u.comps[0].iter().map(|v| v / f0).collect();
    // c_n dz∧dz̄ = 2^n dλ with dλ = det Im τ dx dy
    let dv = 2f64.powi(n as i32) * fm.tau.im().det().re / fm.len() as f64;
    let total: f64 = f.iter().map(|v| v.norm_sqr()).sum::<f64>() * dv;
    let phi: Vec<f64> = f.iter().map(|v| v.norm_sqr().ln() - total.ln()).collect();
    let check: f64 = f.iter().zip(&phi).map(|(v, p)| v.norm_sqr() * p.exp()).sum::<f64>() * dv;
    let lo = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(FiberBergman { phi0: phi[0], defect: (check - 1.0).abs(), spread: hi - lo })
}

pub fn bergman_cy(scn: &FamilyScenario, grid: &BaseGrid) -> Result<BergmanCy> {
    if scn.kind != FamilyKind::CalabiYau {
        return Err(Error::UnsupportedRegime(format!("{} is not a Calabi–Yau family", scn.id)));
    }
    let idx: Vec<usize> = (0..grid.len()).collect();
    let fibers = par::try_map(&idx, |&k| bergman_fiber(scn, grid.point(k)))?;
    let phi: Vec<f64> = fibers.iter().map(|f| f.phi0).collect();
    let hessian = grid.ddbar(&phi);
    Ok(BergmanCy {
        normalization_defect: fibers.iter().map(|f| f.defect).fold(0.0, f64::max),
        z_variation: fibers.iter().map(|f| f.spread).fold(0.0, f64::max),
        min_hessian: hessian.iter().flatten().copied().fold(f64::INFINITY, f64::min),
        hessian,
        phi,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub t_re: f64,
    pub t_im: f64,
    pub radius: f64,
    pub q: usize,
    pub phi_q: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DegenerationTrace {
    pub rows: Vec<TraceRow>,
    pub warnings: Vec<String>,
}

/// φ_q along the ray t = r e^{iθ} toward a degeneration point at the origin.
/// Radii where a fiber cannot be built are skipped with a warning.
pub fn degeneration_probe(scn: &FamilyScenario, radii: &[f64], angle: f64, m_max: usize) -> Result<DegenerationTrace> {
    let res = par::map(radii, |&r| (r, cascade_at(scn, C64::from_polar(r, angle), m_max)));
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (r, p) in res {
        match p {
            Ok(p) => {
                for (q, v) in p.phi.iter().enumerate() {
                    rows.push(TraceRow { t_re: p.t.re, t_im: p.t.im, radius: r, q, phi_q: *v });
                }
            }
            Err(e @ (Error::UnsupportedRegime(_) | Error::ScenarioNotFound(_))) => return Err(e),
            Err(e) => warnings.push(format!("radius {r}: {e}")),
        }
    }
    Ok(DegenerationTrace { rows, warnings })
}
