use super::config::RunConfig;
use crate::bundle::{build_frame, curvature};
use crate::error::{Error, Result};
use crate::family::FamilyStencil;
use crate::fiber::{green_identity, OperatorSet, PairBuilder, Regime, SpectralCache};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use serde::Serialize;
use std::sync::Arc;

/// Residuals below this are at the rounding floor and carry no order.
const FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SweepParam {
    N,
    H,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepLevel {
    pub value: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepTable {
    pub scenario: String,
    pub param: SweepParam,
    pub metric: &'static str,
    pub levels: Vec<SweepLevel>,
    /// fitted p in residual ∝ h^p (h sweep) or N^{-p} (N sweep)
    pub order: Option<f64>,
    pub r2: Option<f64>,
    pub monotone: bool,
    pub at_floor: bool,
}

/// Least-squares slope and R² of log y against log x.
pub fn fit_order(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, y)| **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, r2))
}

fn curvature_residual(cfg: &RunConfig, h: f64) -> Result<f64> {
    let scn = cfg.build_scenario(&cfg.scenario)?;
    let st = Arc::new(FamilyStencil::new(&scn, h)?);
    let (p, q, prim) = match (scn.n(), scn.regime) {
        (2, _) => (1, 1, true),
        (_, Regime::Negative) => (0, 1, false),
        _ => (1, 0, false),
    };
    let frame = build_frame(st, p, q, prim)?;
    Ok(curvature(&frame, C64::new(1.0, 0.0))?.residual_abs)
}

fn green_residual(cfg: &RunConfig, n: usize) -> Result<f64> {
    let mut c = cfg.clone();
    c.grid_size = n;
    let scn = c.build_scenario(&c.scenario)?;
    if scn.n() != 1 {
        return Err(Error::UnsupportedRegime("grid sweeps run the Green identity on elliptic fibers".into()));
    }
    let ops = OperatorSet::new(scn.fiber_arc(scn.t0)?)?;
    let cache = SpectralCache::new(&ops);
    let pb = PairBuilder::new(&ops)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    for _ in 0..cfg.pairs.min(5) {
        let (g, f) = pb.pair(3, &mut rng)?;
        worst = worst.max(green_identity(&ops, &cache, &g, &f)?.residual);
    }
    Ok(worst)
}

/// Refine h (halving down to cfg.h) or N (doubling up to cfg.grid_size).
///
/// The h sweep measures |analytic − FD| curvature, the N sweep the largest
/// Green-identity residual over random pairs.
pub fn convergence_sweep(cfg: &RunConfig, param: SweepParam, levels: usize) -> Result<SweepTable> {
    if levels < 3 {
        return Err(Error::Precondition(format!("a convergence sweep needs ≥ 3 levels, got {levels}")));
    }
    if cfg.scenario == "all" {
        return Err(Error::ConfigValue { field: "scenario".into(), message: "sweeps run on a single scenario".into() });
    }
    let scale = |i: usize| 2f64.powi((levels - 1 - i) as i32);
    let (metric, values): (&'static str, Vec<f64>) = match param {
        SweepParam::H => ("curvature residual_abs", (0..levels).map(|i| cfg.h * scale(i)).collect()),
        SweepParam::N => {
            let ns: Vec<f64> = (0..levels).map(|i| cfg.grid_size as f64 / scale(i)).collect();
            if ns.iter().any(|&n| n < 8.0 || n.fract() != 0.0 || (n as usize) % 2 != 0) {
                return Err(Error::ConfigValue {
                    field: "grid_size".into(),
                    message: format!("{levels} levels from N = {} reach a grid that is not even and ≥ 8", cfg.grid_size),
                });
            }
            ("green identity residual", ns)
        }
    };
    let mut out = Vec::new();
    for &v in &values {
        let residual = match param {
            SweepParam::H => curvature_residual(cfg, v)?,
            SweepParam::N => green_residual(cfg, v as usize)?,
        };
        out.push(SweepLevel { value: v, residual });
    }
    let res: Vec<f64> = out.iter().map(|l| l.residual).collect();
    let at_floor = res.iter().all(|r| *r < FLOOR);
    // h decreases for H sweeps, N increases for N sweeps: both should shrink
    // residuals; differences below the floor are rounding noise
    let monotone = res.windows(2).all(|w| w[1] <= w[0].max(FLOOR));
    let (order, r2) = if at_floor {
        (None, None)
    } else {
        let keep: Vec<usize> = (0..levels).filter(|&i| res[i] >= FLOOR).collect();
        let xs: Vec<f64> = keep.iter().map(|&i| values[i]).collect();
        let ys: Vec<f64> = keep.iter().map(|&i| res[i]).collect();
        match fit_order(&xs, &ys) {
            Some((s, r2)) => (Some(if param == SweepParam::N { -s } else { s }), Some(r2)),
            None => (None, None),
        }
    };
    Ok(SweepTable { scenario: cfg.scenario.clone(), param, metric, levels: out, order, r2, monotone, at_floor })
}
