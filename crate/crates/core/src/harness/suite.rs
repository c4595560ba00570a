use super::config::RunConfig;
use super::plot;
use crate::bundle::{build_frame, curvature, serre_from_reports, CurvatureReport, HodgeFrame, SerreReport};
use crate::error::{Error, Result};
use crate::expr::parse_weight_expression;
use crate::family::{FamilyKind, FamilyPoint, FamilyScenario, FamilyStencil, PeriodMap};
use crate::fiber::{green_identity, OperatorSet, PairBuilder, Regime, SpectralCache};
use crate::finsler::{
    bergman_cy, build_finsler, cascade_curvature_check, default_discs, degeneration_probe, kobayashi_bound, run_cascade,
    BaseGrid, BergmanCy, CascadeCheck, DiscCheck, TraceRow,
};
use crate::small::binomial;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use serde::Serialize;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Identities,
    Curvature,
    Finsler,
    Degeneration,
    All,
}

impl FromStr for Pipeline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identities" => Pipeline::Identities,
            "curvature" => Pipeline::Curvature,
            "finsler" => Pipeline::Finsler,
            "degeneration" => Pipeline::Degeneration,
            "all" => Pipeline::All,
            _ => return Err(Error::ConfigValue { field: "pipeline".into(), message: format!("unknown pipeline `{s}`") }),
        })
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pipeline::Identities => "identities",
            Pipeline::Curvature => "curvature",
            Pipeline::Finsler => "finsler",
            Pipeline::Degeneration => "degeneration",
            Pipeline::All => "all",
        };
        f.write_str(s)
    }
}

/// Analytic blocks below this fraction of the term scale count as cancelling.
const CANCELLING: f64 = 1e-10;

/// One asserted tolerance: `value relation bound`.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: &'static str,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, relation: "<=", bound, pass: value <= bound }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, relation: ">=", bound, pass: value >= bound }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HarmonicRow {
    pub p: usize,
    pub q: usize,
    pub harmonic_dim: usize,
    pub predicted: usize,
    pub gap_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentitiesSummary {
    pub pairs: usize,
    pub green_max_residual: Option<f64>,
    pub green_minus_max_residual: Option<f64>,
    pub harmonic: Vec<HarmonicRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectionValue {
    pub direction: [f64; 2],
    pub analytic: f64,
    pub fd: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureSummary {
    pub reports: Vec<CurvatureReport>,
    pub directions: Vec<DirectionValue>,
    pub serre: Option<SerreReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FinslerSummary {
    pub m: usize,
    pub c: Option<f64>,
    pub a_q: Vec<f64>,
    pub curvature_bound: Option<f64>,
    pub max_curvature: Option<f64>,
    pub kobayashi_constant: Option<f64>,
    pub discs: Vec<DiscCheck>,
    pub cascade: Vec<CascadeCheck>,
    pub to_yeung_min: Option<f64>,
    pub bergman: BergmanSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct BergmanSummary {
    pub normalization_defect: f64,
    pub z_variation: f64,
    pub min_hessian: f64,
    pub max_abs_hessian: f64,
}

impl From<&BergmanCy> for BergmanSummary {
    fn from(b: &BergmanCy) -> Self {
        BergmanSummary {
            normalization_defect: b.normalization_defect,
            z_variation: b.z_variation,
            min_hessian: b.min_hessian,
            max_abs_hessian: b.hessian.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DegenerationSummary {
    pub angle: f64,
    pub rows: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        let kind = format!("{e:?}");
        let kind = kind.split(['(', ' ', '{']).next().unwrap_or("Error").to_string();
        ErrorReport { kind, message: e.to_string(), exit_code: e.exit_code() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub kind: FamilyKind,
    pub regime: &'static str,
    pub grid_size: usize,
    pub t0: [f64; 2],
    pub checks: Vec<Check>,
    pub identities: Option<IdentitiesSummary>,
    pub curvature: Option<CurvatureSummary>,
    pub finsler: Option<FinslerSummary>,
    pub degeneration: Option<DegenerationSummary>,
    pub skipped: Vec<String>,
    pub warnings: Vec<String>,
    pub error: Option<ErrorReport>,
}

impl ScenarioSummary {
    pub fn pass(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub schema: u32,
    pub pipeline: Pipeline,
    pub parallel: bool,
    pub config: RunConfig,
    pub scenarios: Vec<ScenarioSummary>,
    pub pass: bool,
    pub exit_code: i32,
}

/// Rows destined for CSV files, kept out of the JSON summary.
#[derive(Default)]
struct Tables {
    curvature: Vec<CurvatureRow>,
    cascade: Vec<CascadeRow>,
    spectrum: Vec<SpectrumRow>,
    degeneration: Vec<(String, TraceRow)>,
}

#[derive(Serialize)]
struct CurvatureRow {
    scenario: String,
    p: usize,
    q: usize,
    primitive: bool,
    direction_re: f64,
    direction_im: f64,
    term_mu: f64,
    term_xi: f64,
    term_eta: f64,
    term_nu: f64,
    term_comega: f64,
    analytic_total: f64,
    fd_total: f64,
    residual_abs: f64,
    residual_rel: f64,
}

#[derive(Serialize)]
struct CascadeRow {
    scenario: String,
    t_re: f64,
    t_im: f64,
    q: usize,
    phi_q: f64,
}

#[derive(Serialize)]
struct SpectrumRow {
    scenario: String,
    bidegree: String,
    index: usize,
    eigenvalue: f64,
}

/// Result of a run: the summary plus per-scenario wall times (not serialized,
/// so summaries stay byte-identical between runs).
pub struct RunOutcome {
    pub summary: Summary,
    pub timings: Vec<(String, Duration)>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    scn: FamilyScenario,
    out: ScenarioSummary,
    tables: &'a mut Tables,
    isotrivial: bool,
    /// run more than one pipeline or scenario: inapplicable steps are skipped
    lenient: bool,
}

impl Ctx<'_> {
    fn check(&mut self, c: Check) {
        self.out.checks.push(c);
    }

    fn id(&self) -> String {
        self.scn.id.clone()
    }
}

fn is_isotrivial(scn: &FamilyScenario) -> Result<bool> {
    let pt = FamilyPoint::new(scn, scn.t0)?;
    let ks = pt.kodaira_spencer(scn);
    let (_, _, mixed) = scn.base_curvature(scn.t0);
    Ok(ks.max_abs() == 0.0 && mixed == 0.0 && scn.regime == Regime::Flat)
}

fn identities(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let fm = ctx.scn.fiber_arc(ctx.scn.t0)?;
    let n = fm.n;
    let ops = OperatorSet::new(fm.clone())?;
    let cache = SpectralCache::new(&ops);
    let mut harmonic = Vec::new();
    for p in 0..=n {
        for q in 0..=n {
            let s = cache.spectrum(p, q)?;
            let predicted = fm.predicted_harmonic_dim(p, q);
            for (bidegree, index, eigenvalue) in cache.spectrum_rows(p, q, 12)? {
                ctx.tables.spectrum.push(SpectrumRow { scenario: ctx.id(), bidegree, index, eigenvalue });
            }
            ctx.check(Check::at_most(format!("harmonic_dim({p},{q}) - predicted"), s.harmonic_dim.abs_diff(predicted) as f64, 0.0));
            if s.harmonic_dim > 0 {
                ctx.check(Check::at_least(format!("gap_ratio({p},{q})"), s.gap_ratio, cfg.tol.gap_ratio));
            }
            harmonic.push(HarmonicRow { p, q, harmonic_dim: s.harmonic_dim, predicted, gap_ratio: s.gap_ratio });
        }
    }
    let mut summary = IdentitiesSummary { pairs: 0, green_max_residual: None, green_minus_max_residual: None, harmonic };
    if n == 1 {
        let pb = PairBuilder::new(&ops)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut worst = 0.0f64;
        let mut worst_minus: Option<f64> = None;
        for _ in 0..cfg.pairs {
            let (g, f) = pb.pair(3, &mut rng)?;
            let c = green_identity(&ops, &cache, &g, &f)?;
            worst = worst.max(c.residual);
            if let Some(r) = c.residual_minus {
                worst_minus = Some(worst_minus.unwrap_or(0.0).max(r));
            }
        }
        let (name, tol) = match Regime::of(&ops) {
            Regime::Flat => ("flat_norm_equality", cfg.tol.flat),
            _ => ("green_identity", cfg.tol.green),
        };
        ctx.check(Check::at_most(name, worst, tol));
        summary.pairs = cfg.pairs;
        summary.green_max_residual = Some(worst);
        summary.green_minus_max_residual = worst_minus;
    } else {
        ctx.out.skipped.push("identities: Green-identity pairs are built on elliptic fibers only".into());
    }
    ctx.out.identities = Some(summary);
    Ok(())
}

/// Bidegrees whose curvature the pipeline reports, with the primitive flag.
fn curvature_targets(scn: &FamilyScenario) -> Vec<(usize, usize, bool)> {
    match (scn.n(), scn.regime) {
        (2, _) => vec![(1, 1, true)],
        (_, Regime::Negative) => vec![(0, 1, false)],
        (_, Regime::Positive) => vec![(1, 0, false)],
        (_, Regime::Flat) => vec![(1, 0, false), (0, 1, false)],
    }
}

/// Directions v_k = r_k e^{2πik/K} with r_k spread over [0.5, 1.5].
pub fn test_directions(k: usize) -> Vec<C64> {
    (0..k)
        .map(|j| {
            let r = if k == 1 { 1.0 } else { 0.5 + j as f64 / (k - 1) as f64 };
            C64::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / k as f64)
        })
        .collect()
}

/// Stencil step for a scenario: the configured h, capped at |t0|/80 when the
/// period map degenerates at t = 0.
pub fn stencil_step(scn: &FamilyScenario, h: f64) -> f64 {
    match scn.period {
        PeriodMap::LogDegenerate => h.min(scn.t0.norm() / 80.0),
        PeriodMap::Linear { .. } => h,
    }
}

fn serre_partner(cfg: &RunConfig, scn: &FamilyScenario) -> Result<Option<FamilyScenario>> {
    let partner = match scn.id.as_str() {
        "elliptic-neg-d1" => "elliptic-pos-d1",
        "elliptic-pos-d1" => "elliptic-neg-d1",
        _ => return Ok(None),
    };
    // the pairing is checked on rank-one Hodge bundles
    if scn.degree.abs() != 1 {
        return Ok(None);
    }
    let mut other = FamilyScenario::from_catalog(partner, scn.grid_size)?;
    if let Some((text, _)) = &cfg.perturbation {
        // the dual bundle carries the weight −φ
        other = other.with_perturbation(parse_weight_expression(&format!("-({text})"))?)?;
    }
    Ok(Some(other))
}

fn curvature_pipeline(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let h = stencil_step(&ctx.scn, cfg.h);
    if h != cfg.h {
        ctx.out.warnings.push(format!("stencil step reduced to {h:.3e} near the degeneration point"));
    }
    let st = Arc::new(FamilyStencil::new(&ctx.scn, h)?);
    let mut own: Option<(HodgeFrame, CurvatureReport)> = None;
    let one = C64::new(1.0, 0.0);
    let mut summary = CurvatureSummary { reports: Vec::new(), directions: Vec::new(), serre: None };
    for (p, q, primitive) in curvature_targets(&ctx.scn) {
        let frame = match build_frame(st.clone(), p, q, primitive) {
            Ok(f) => f,
            Err(Error::Precondition(m)) if ctx.lenient => {
                ctx.out.skipped.push(format!("curvature ({p},{q}): {m}"));
                continue;
            }
            Err(e) => return Err(e),
        };
        let rep = curvature(&frame, one)?;
        let label = format!("({p},{q}){}", if primitive { " primitive" } else { "" });
        if ctx.isotrivial {
            ctx.check(Check::at_most(format!("|analytic curvature| {label}"), rep.analytic_total.abs(), cfg.tol.isotrivial));
            ctx.check(Check::at_most(format!("|fd curvature| {label}"), rep.fd_total.abs(), cfg.tol.isotrivial));
        } else if rep.analytic_block_max() <= CANCELLING * rep.term_scale {
            // the terms cancel exactly (a flat section): 0/0 has no relative size,
            // so the residual is measured against the cancelling terms
            let rel = rep.residual_abs / rep.term_scale;
            ctx.check(Check::at_most(format!("curvature residual / term scale {label}"), rel, cfg.tol.curvature));
        } else {
            ctx.check(Check::at_most(format!("curvature residual_rel {label}"), rep.residual_rel, cfg.tol.curvature));
        }
        if ctx.scn.regime == Regime::Flat && ctx.scn.base_curvature(ctx.scn.t0).0 == 0.0 {
            ctx.check(Check::at_most(format!("|term_comega| with C(φ) = 0 {label}"), rep.term_comega.abs(), 0.0));
        }
        // Θ_{vv̄} = |v|² Θ_{tt̄} on a one-dimensional base
        for v in test_directions(cfg.directions) {
            let s = v.norm_sqr();
            let d = DirectionValue { direction: [v.re, v.im], analytic: s * rep.analytic_total, fd: s * rep.fd_total };
            ctx.tables.curvature.push(CurvatureRow {
                scenario: ctx.id(),
                p,
                q,
                primitive,
                direction_re: v.re,
                direction_im: v.im,
                term_mu: s * rep.term_mu,
                term_xi: s * rep.term_xi,
                term_eta: s * rep.term_eta,
                term_nu: s * rep.term_nu,
                term_comega: s * rep.term_comega,
                analytic_total: d.analytic,
                fd_total: d.fd,
                residual_abs: s * rep.residual_abs,
                residual_rel: rep.residual_rel,
            });
            summary.directions.push(d);
        }
        match ctx.scn.regime {
            Regime::Negative => {
                let worst = summary.directions.iter().map(|d| d.analytic).fold(f64::NEG_INFINITY, f64::max);
                ctx.check(Check::at_most(format!("max analytic curvature over directions {label}"), worst, cfg.tol.sign));
            }
            Regime::Positive => {
                let worst = summary.directions.iter().map(|d| d.analytic).fold(f64::INFINITY, f64::min);
                ctx.check(Check::at_least(format!("min analytic curvature over directions {label}"), worst, -cfg.tol.sign));
            }
            Regime::Flat => {}
        }
        if own.is_none() && frame.rank == 1 {
            own = Some((frame, rep.clone()));
        }
        summary.reports.push(rep);
    }
    if let (Some(other), Some((frame, rep))) = (serre_partner(cfg, &ctx.scn)?, own) {
        let (p, q) = if other.regime == Regime::Positive { (1, 0) } else { (0, 1) };
        let ofr = build_frame(Arc::new(FamilyStencil::new(&other, h)?), p, q, false)?;
        let orep = curvature(&ofr, one)?;
        let s = if other.regime == Regime::Positive {
            serre_from_reports((&frame, &rep), (&ofr, &orep))?
        } else {
            serre_from_reports((&ofr, &orep), (&frame, &rep))?
        };
        ctx.check(Check::at_most("serre duality residual_rel", s.residual_rel, cfg.tol.serre));
        summary.serre = Some(s);
    }
    ctx.out.curvature = Some(summary);
    Ok(())
}

fn finsler_pipeline(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let scn = &ctx.scn;
    let grid = match cfg.base_extent {
        Some(w) => BaseGrid::new(scn.t0, w, cfg.base_grid)?,
        None => BaseGrid::default_for(scn, cfg.base_grid)?,
    };
    let state = run_cascade(scn, &grid, cfg.cascade_depth)?;
    ctx.out.warnings.extend(state.warnings.iter().cloned());
    for p in &state.points {
        for (q, v) in p.phi.iter().enumerate() {
            ctx.tables.cascade.push(CascadeRow { scenario: scn.id.clone(), t_re: p.t.re, t_im: p.t.im, q, phi_q: *v });
        }
    }
    let checks = cascade_curvature_check(&state, cfg.tol.cascade);
    for c in &checks {
        ctx.out.checks.push(Check::at_least(
            format!("cascade inequality q={}: fraction of interior samples with residual ≥ −{:e}", c.q, cfg.tol.cascade),
            c.fraction_ok,
            0.99,
        ));
    }
    // To–Yeung: the q-th residual lives in H^{n−q+1,q−1}
    let n = scn.n();
    let mut ty_min: Option<f64> = None;
    for q in 1..=state.m {
        let vals: Vec<f64> = state.points.iter().filter_map(|p| p.to_yeung.get(q - 1).copied()).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        ty_min = Some(ty_min.map_or(lo, |v: f64| v.min(lo)));
        ctx.out.checks.push(Check::at_least(format!("to-yeung residual q={q}"), lo, -cfg.tol.to_yeung));
        if binomial(n, n - q + 1) * binomial(n, q - 1) == 1 {
            let hi = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
            ctx.out.checks.push(Check::at_most(format!("to-yeung equality q={q} (rank one)"), hi, cfg.tol.to_yeung_equality));
        }
    }
    let b = bergman_cy(scn, &grid)?;
    ctx.out.checks.push(Check::at_most("bergman normalization defect", b.normalization_defect, cfg.tol.bergman_flatness));
    ctx.out.checks.push(Check::at_most("bergman fiberwise z-variation", b.z_variation, cfg.tol.bergman_flatness));
    ctx.out.checks.push(Check::at_least("bergman min Hessian", b.min_hessian, -cfg.tol.bergman_hessian));
    let bergman = BergmanSummary::from(&b);
    let mut summary = FinslerSummary {
        m: state.m,
        c: None,
        a_q: Vec::new(),
        curvature_bound: None,
        max_curvature: None,
        kobayashi_constant: None,
        discs: Vec::new(),
        cascade: checks,
        to_yeung_min: ty_min,
        bergman,
    };
    if ctx.isotrivial {
        ctx.out.checks.push(Check::at_most("cascade length on an isotrivial family", state.m as f64, 0.0));
        ctx.out.checks.push(Check::at_most("|bergman Hessian| on an isotrivial family", summary.bergman.max_abs_hessian, cfg.tol.isotrivial));
    }
    if state.m == 0 {
        ctx.out.warnings.push(format!("{}: cascade has length zero, no Finsler metric", scn.id));
    } else {
        let fm = build_finsler(&state)?;
        // bound −c e^{−c a_1 φ_0}; the pointwise bounds are stored with the metric
        ctx.out.checks.push(Check::at_most("finsler curvature minus bound", fm.max_excess, cfg.tol.finsler));
        let k = kobayashi_bound(scn, &state, &fm, &default_discs(&state), cfg.tol.kobayashi)?;
        ctx.out.checks.push(Check::at_least("kobayashi constant", k.constant, f64::MIN_POSITIVE));
        for (i, d) in k.checks.iter().enumerate() {
            ctx.out.checks.push(Check::at_most(format!("ahlfors-schwarz ratio disc {i}"), d.max_ratio, 1.0 + cfg.tol.kobayashi));
        }
        summary.c = Some(fm.c);
        summary.a_q = fm.a.clone();
        summary.curvature_bound = Some(-fm.curvature_constant);
        summary.max_curvature = fm.hsc.iter().flatten().copied().reduce(f64::max);
        summary.kobayashi_constant = Some(k.constant);
        summary.discs = k.checks;
        if cfg.plots {
            ctx.out.warnings.extend(plot_cascade(cfg, scn, &state.phi(1), &grid).err().map(|e| e.to_string()));
        }
    }
    ctx.out.finsler = Some(summary);
    Ok(())
}

fn plot_cascade(cfg: &RunConfig, scn: &FamilyScenario, phi1: &[f64], grid: &BaseGrid) -> Result<()> {
    // φ_1 along the vertical line through the center
    let i = grid.size / 2;
    let pts: Vec<(f64, f64)> = (0..grid.size).map(|j| (grid.point(j * grid.size + i).im, phi1[j * grid.size + i])).collect();
    let svg = plot::line_plot(&format!("{}: φ_1 along Re t = {:.3}", scn.id, grid.center[0]), "Im t", "φ_1", &[("φ_1", pts)], false);
    std::fs::write(cfg.out.join(format!("{}-phi1.svg", scn.id)), svg)?;
    Ok(())
}

fn degeneration_pipeline(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let scn = &ctx.scn;
    let angle = scn.t0.arg();
    let tr = degeneration_probe(scn, &cfg.radii, angle, cfg.cascade_depth)?;
    ctx.out.warnings.extend(tr.warnings.iter().cloned());
    if ctx.isotrivial {
        let v: Vec<f64> = tr.rows.iter().filter(|r| r.q == 0).map(|r| r.phi_q).collect();
        let spread = v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min);
        ctx.out.checks.push(Check::at_most("isotrivial trace spread", spread.max(0.0), cfg.tol.isotrivial));
        let longest = tr.rows.iter().map(|r| r.q).max().unwrap_or(0);
        ctx.out.checks.push(Check::at_most("isotrivial trace length", longest as f64, 0.0));
    }
    if cfg.plots {
        let mut series = Vec::new();
        let top = tr.rows.iter().map(|r| r.q).max().unwrap_or(0);
        for q in 0..=top {
            let pts: Vec<(f64, f64)> = tr.rows.iter().filter(|r| r.q == q).map(|r| (r.radius.ln(), r.phi_q)).collect();
            series.push((format!("φ_{q}"), pts));
        }
        let s: Vec<(&str, Vec<(f64, f64)>)> = series.iter().map(|(n, p)| (n.as_str(), p.clone())).collect();
        let svg = plot::line_plot(&format!("{}: φ_q along arg t = {angle:.3}", scn.id), "log r", "φ_q", &s, false);
        std::fs::write(cfg.out.join(format!("{}-degeneration.svg", scn.id)), svg)?;
    }
    ctx.out.degeneration = Some(DegenerationSummary { angle, rows: tr.rows.len() });
    let id = scn.id.clone();
    ctx.tables.degeneration.extend(tr.rows.into_iter().map(|r| (id.clone(), r)));
    Ok(())
}

fn applicable(p: Pipeline, scn: &FamilyScenario) -> Option<String> {
    match p {
        Pipeline::Finsler | Pipeline::Degeneration if scn.kind != FamilyKind::CalabiYau => {
            Some(format!("{p}: needs a Calabi–Yau family, {} is a line-bundle family", scn.id))
        }
        _ => None,
    }
}

fn run_scenario(cfg: &RunConfig, pipeline: Pipeline, id: &str, tables: &mut Tables) -> Result<ScenarioSummary> {
    let scn = cfg.build_scenario(id)?;
    let out = ScenarioSummary {
        scenario: scn.id.clone(),
        kind: scn.kind,
        regime: crate::bundle::regime_name(scn.regime),
        grid_size: scn.grid_size,
        t0: [scn.t0.re, scn.t0.im],
        checks: Vec::new(),
        identities: None,
        curvature: None,
        finsler: None,
        degeneration: None,
        skipped: Vec::new(),
        warnings: Vec::new(),
        error: None,
    };
    let lenient = pipeline == Pipeline::All || cfg.scenario == "all";
    let isotrivial = is_isotrivial(&scn)?;
    let mut ctx = Ctx { cfg, scn, out, tables, isotrivial, lenient };
    let steps: Vec<Pipeline> = match pipeline {
        Pipeline::All => vec![Pipeline::Identities, Pipeline::Curvature, Pipeline::Finsler, Pipeline::Degeneration],
        p => vec![p],
    };
    for step in steps {
        if let Some(reason) = applicable(step, &ctx.scn) {
            if lenient {
                ctx.out.skipped.push(reason);
                continue;
            }
            return Err(Error::UnsupportedRegime(reason));
        }
        let r = match step {
            Pipeline::Identities => identities(&mut ctx),
            Pipeline::Curvature => curvature_pipeline(&mut ctx),
            Pipeline::Finsler => finsler_pipeline(&mut ctx),
            Pipeline::Degeneration => degeneration_pipeline(&mut ctx),
            Pipeline::All => unreachable!(),
        };
        if let Err(e) = r {
            ctx.out.error = Some(ErrorReport::from(&e));
            break;
        }
    }
    Ok(ctx.out)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if rows.is_empty() {
        w.write_record(header).map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Run the pipeline on every configured scenario and write the artifacts
/// into `cfg.out`. Module errors are recorded per scenario; the exit code is
/// 0 when every check passes, 1 on a failed tolerance and 3 on a module error.
pub fn run_suite(cfg: &RunConfig, pipeline: Pipeline) -> Result<RunOutcome> {
    std::fs::create_dir_all(&cfg.out)?;
    let mut tables = Tables::default();
    let mut scenarios = Vec::new();
    let mut timings = Vec::new();
    for id in cfg.scenario_ids() {
        let start = Instant::now();
        let s = match run_scenario(cfg, pipeline, &id, &mut tables) {
            Ok(s) => s,
            Err(e @ (Error::ScenarioNotFound(_) | Error::ConfigValue { .. } | Error::Syntax { .. })) => return Err(e),
            Err(e) => {
                let mut s = failed_summary(&id, cfg);
                s.error = Some(ErrorReport::from(&e));
                s
            }
        };
        timings.push((id, start.elapsed()));
        scenarios.push(s);
    }
    let errored = scenarios.iter().any(|s| s.error.is_some());
    let pass = scenarios.iter().all(|s| s.pass());
    let exit_code = if errored { 3 } else if pass { 0 } else { 1 };
    let summary = Summary { schema: 1, pipeline, parallel: crate::par::is_parallel(), config: cfg.clone(), scenarios, pass, exit_code };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(cfg.out.join("summary.json"), json + "\n")?;
    write_csv(
        &cfg.out.join("curvature.csv"),
        &tables.curvature,
        &[
            "scenario", "p", "q", "primitive", "direction_re", "direction_im", "term_mu", "term_xi", "term_eta", "term_nu",
            "term_comega", "analytic_total", "fd_total", "residual_abs", "residual_rel",
        ],
    )?;
    write_csv(&cfg.out.join("cascade.csv"), &tables.cascade, &["scenario", "t_re", "t_im", "q", "phi_q"])?;
    write_csv(&cfg.out.join("spectrum.csv"), &tables.spectrum, &["scenario", "bidegree", "index", "eigenvalue"])?;
    let deg: Vec<CascadeRow> = tables
        .degeneration
        .into_iter()
        .map(|(s, r)| CascadeRow { scenario: s, t_re: r.t_re, t_im: r.t_im, q: r.q, phi_q: r.phi_q })
        .collect();
    write_csv(&cfg.out.join("degeneration.csv"), &deg, &["scenario", "t_re", "t_im", "q", "phi_q"])?;
    Ok(RunOutcome { summary, timings })
}

fn failed_summary(id: &str, cfg: &RunConfig) -> ScenarioSummary {
    let (kind, regime, t0, n) = match FamilyScenario::from_catalog(id, cfg.grid_size) {
        Ok(s) => (s.kind, crate::bundle::regime_name(s.regime), [s.t0.re, s.t0.im], s.grid_size),
        Err(_) => (FamilyKind::CalabiYau, "unknown", [0.0, 0.0], cfg.grid_size),
    };
    ScenarioSummary {
        scenario: id.to_string(),
        kind,
        regime,
        grid_size: n,
        t0,
        checks: Vec::new(),
        identities: None,
        curvature: None,
        finsler: None,
        degeneration: None,
        skipped: Vec::new(),
        warnings: Vec::new(),
        error: None,
    }
}
