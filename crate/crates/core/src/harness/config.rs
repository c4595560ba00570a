use crate::error::{Error, Result};
use crate::expr::{parse_weight_expression, Expr};
use crate::family::{catalog_entry, FamilyScenario};
use serde::Serialize;
use std::path::PathBuf;

/// Tolerances asserted by the pipelines; each can be overridden by key.
#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    pub green: f64,
    pub flat: f64,
    pub gap_ratio: f64,
    pub curvature: f64,
    pub sign: f64,
    pub serre: f64,
    pub isotrivial: f64,
    pub cascade: f64,
    pub to_yeung: f64,
    pub to_yeung_equality: f64,
    pub finsler: f64,
    pub kobayashi: f64,
    pub bergman_hessian: f64,
    pub bergman_flatness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            green: 1e-6,
            flat: 1e-8,
            gap_ratio: 1e3,
            curvature: 1e-2,
            sign: 1e-6,
            serre: 1e-3,
            isotrivial: 1e-8,
            cascade: 1e-4,
            to_yeung: 1e-8,
            to_yeung_equality: 1e-6,
            finsler: 1e-3,
            kobayashi: 1e-6,
            bergman_hessian: 1e-6,
            bergman_flatness: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    /// a catalog id, or "all" for every catalog entry
    pub scenario: String,
    pub grid_size: usize,
    /// fiber grid for abelian surfaces, whose grids hold N⁴ points
    pub surface_grid_size: usize,
    pub h: f64,
    pub base_grid: usize,
    /// half-width of the base grid; None uses the per-scenario default
    pub base_extent: Option<f64>,
    pub cascade_depth: usize,
    pub pairs: usize,
    pub directions: usize,
    /// overrides the line-bundle degree of an elliptic scenario
    pub degree: Option<i32>,
    #[serde(serialize_with = "ser_expr")]
    pub perturbation: Option<(String, Expr)>,
    pub radii: Vec<f64>,
    pub seed: u64,
    pub out: PathBuf,
    pub plots: bool,
    pub tol: Tolerances,
}

fn ser_expr<S: serde::Serializer>(e: &Option<(String, Expr)>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match e {
        Some((text, _)) => s.serialize_some(text),
        None => s.serialize_none(),
    }
}

impl RunConfig {
    pub fn new(scenario: &str) -> Self {
        RunConfig {
            scenario: scenario.to_string(),
            grid_size: 32,
            surface_grid_size: 8,
            h: 1e-2,
            base_grid: 21,
            base_extent: None,
            cascade_depth: 4,
            pairs: 20,
            directions: 9,
            degree: None,
            perturbation: None,
            radii: vec![0.2, 0.1, 0.05, 0.02, 0.01, 5e-3, 2e-3, 1e-3],
            seed: 1,
            out: PathBuf::from("hodgelab-out"),
            plots: false,
            tol: Tolerances::default(),
        }
    }

    /// Scenario ids this config runs.
    pub fn scenario_ids(&self) -> Vec<String> {
        if self.scenario == "all" {
            crate::family::CATALOG.iter().map(|e| e.id.to_string()).collect()
        } else {
            vec![self.scenario.clone()]
        }
    }

    /// Build the scenario with the configured grid and perturbation.
    pub fn build_scenario(&self, id: &str) -> Result<FamilyScenario> {
        let mut scn = FamilyScenario::from_catalog(id, self.grid_size)?;
        if scn.n() == 2 {
            scn.grid_size = self.surface_grid_size;
        }
        if let Some(d) = self.degree {
            let sign_ok = match scn.regime {
                crate::fiber::Regime::Negative => d < 0,
                crate::fiber::Regime::Positive => d > 0,
                crate::fiber::Regime::Flat => false,
            };
            if !sign_ok {
                return Err(Error::ConfigValue {
                    field: "degree".into(),
                    message: format!("degree {d} does not fit scenario {id}: negative families take d < 0, positive d > 0"),
                });
            }
            scn.degree = d;
        }
        if let Some((_, p)) = &self.perturbation {
            scn = scn.with_perturbation(p.clone())?;
        }
        scn.check_regime()?;
        Ok(scn)
    }

    fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| Err(Error::ConfigValue { field: field.into(), message: message.into() });
        if self.scenario != "all" {
            catalog_entry(&self.scenario)?;
        }
        for (field, n) in [("grid_size", self.grid_size), ("surface_grid_size", self.surface_grid_size)] {
            if n % 2 != 0 || n < 8 {
                return bad(field, &format!("{field} must be even, ≥ 8"));
            }
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("h", "h must be positive");
        }
        if self.base_grid < 3 {
            return bad("base_grid", "base_grid must be ≥ 3");
        }
        if let Some(w) = self.base_extent {
            if !(w > 0.0 && w.is_finite()) {
                return bad("base_extent", "base_extent must be positive");
            }
        }
        if self.pairs == 0 || self.directions == 0 {
            return bad("pairs", "pairs and directions must be ≥ 1");
        }
        if self.radii.iter().any(|r| !(*r > 0.0)) {
            return bad("radii", "radii must be positive");
        }
        let t = &self.tol;
        let all = [
            ("tol_green", t.green),
            ("tol_flat", t.flat),
            ("tol_gap_ratio", t.gap_ratio),
            ("tol_curvature", t.curvature),
            ("tol_sign", t.sign),
            ("tol_serre", t.serre),
            ("tol_isotrivial", t.isotrivial),
            ("tol_cascade", t.cascade),
            ("tol_to_yeung", t.to_yeung),
            ("tol_to_yeung_equality", t.to_yeung_equality),
            ("tol_finsler", t.finsler),
            ("tol_kobayashi", t.kobayashi),
            ("tol_bergman_hessian", t.bergman_hessian),
            ("tol_bergman_flatness", t.bergman_flatness),
        ];
        for (k, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return bad(k, "tolerances must be positive");
            }
        }
        Ok(())
    }
}

/// One `key = value` line after lexing.
struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
    value_col: usize,
    quoted: bool,
}

fn lex_line(line_no: usize, raw: &str) -> Result<Option<Entry<'_>>> {
    let err = |column: usize, message: &str| Error::ConfigParse { line: line_no, column, message: message.into() };
    // strip a comment outside quotes
    let mut in_q = false;
    let mut end = raw.len();
    for (i, ch) in raw.char_indices() {
        match ch {
            '"' => in_q = !in_q,
            '#' if !in_q => {
                end = i;
                break;
            }
            _ => {}
        }
    }
    let text = &raw[..end];
    if text.trim().is_empty() {
        return Ok(None);
    }
    let eq = text.find('=').ok_or_else(|| err(text.len() - text.trim_start().len() + 1, "expected `key = value`"))?;
    let key = text[..eq].trim();
    let key_col = text.len() - text.trim_start().len() + 1;
    if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(err(key_col, "keys are ASCII letters, digits and underscores"));
    }
    let rest = &text[eq + 1..];
    let value_col = eq + 2 + (rest.len() - rest.trim_start().len());
    let v = rest.trim();
    if v.is_empty() {
        return Err(err(value_col, "missing value"));
    }
    if let Some(inner) = v.strip_prefix('"') {
        let close = inner.find('"').ok_or_else(|| err(value_col, "unterminated string"))?;
        if !inner[close + 1..].trim().is_empty() {
            return Err(err(value_col + close + 2, "unexpected text after string"));
        }
        return Ok(Some(Entry { line: line_no, key, value: &inner[..close], value_col: value_col + 1, quoted: true }));
    }
    Ok(Some(Entry { line: line_no, key, value: v, value_col, quoted: false }))
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if let Some(e) = lex_line(i + 1, raw)? {
            entries.push(e);
        }
    }
    let Some(sc) = entries.iter().find(|e| e.key == "scenario") else {
        return Err(Error::ConfigValue { field: "scenario".into(), message: "missing required key".into() });
    };
    let mut cfg = RunConfig::new(sc.value);
    let mut seen = std::collections::HashSet::new();
    for e in &entries {
        let perr = |message: String| Error::ConfigParse { line: e.line, column: e.value_col, message };
        if !seen.insert(e.key) {
            return Err(Error::ConfigParse { line: e.line, column: 1, message: format!("duplicate key `{}`", e.key) });
        }
        let float = || e.value.parse::<f64>().map_err(|_| perr(format!("`{}` expects a number", e.key)));
        let uint = || e.value.parse::<usize>().map_err(|_| perr(format!("`{}` expects a nonnegative integer", e.key)));
        let t = &mut cfg.tol;
        match e.key {
            "scenario" => {}
            "grid_size" | "N" => cfg.grid_size = uint()?,
            "surface_grid_size" => cfg.surface_grid_size = uint()?,
            "h" => cfg.h = float()?,
            "base_grid" => cfg.base_grid = uint()?,
            "base_extent" => cfg.base_extent = Some(float()?),
            "cascade_depth" => cfg.cascade_depth = uint()?,
            "pairs" => cfg.pairs = uint()?,
            "directions" => cfg.directions = uint()?,
            "degree" => cfg.degree = Some(e.value.parse().map_err(|_| perr("`degree` expects an integer".into()))?),
            "seed" => cfg.seed = e.value.parse().map_err(|_| perr("`seed` expects an unsigned integer".into()))?,
            "out" => cfg.out = PathBuf::from(e.value),
            "plots" => {
                cfg.plots = match e.value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(perr("`plots` expects true or false".into())),
                }
            }
            "radii" => {
                cfg.radii = e
                    .value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| perr("`radii` expects a comma-separated list of numbers".into()))?
            }
            "perturbation" => {
                if !e.quoted {
                    return Err(perr("expression values must be quoted".into()));
                }
                let ex = parse_weight_expression(e.value).map_err(|err| match err {
                    Error::Syntax { position, message } => perr(format!("{message} (expression position {position})")),
                    Error::UnknownIdentifier { name, position } => {
                        perr(format!("unknown identifier '{name}' (expression position {position})"))
                    }
                    other => other,
                })?;
                cfg.perturbation = Some((e.value.to_string(), ex));
            }
            "tol_green" => t.green = float()?,
            "tol_flat" => t.flat = float()?,
            "tol_gap_ratio" => t.gap_ratio = float()?,
            "tol_curvature" => t.curvature = float()?,
            "tol_sign" => t.sign = float()?,
            "tol_serre" => t.serre = float()?,
            "tol_isotrivial" => t.isotrivial = float()?,
            "tol_cascade" => t.cascade = float()?,
            "tol_to_yeung" => t.to_yeung = float()?,
            "tol_to_yeung_equality" => t.to_yeung_equality = float()?,
            "tol_finsler" => t.finsler = float()?,
            "tol_kobayashi" => t.kobayashi = float()?,
            "tol_bergman_hessian" => t.bergman_hessian = float()?,
            "tol_bergman_flatness" => t.bergman_flatness = float()?,
            other => {
                return Err(Error::ConfigParse { line: e.line, column: 1, message: format!("unknown key `{other}`") });
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
