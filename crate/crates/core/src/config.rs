//! Run configuration: a flat `section.key = value` text format.
//!
//! ```text
//! # comments run to the end of the line
//! grid.L = 3
//! grid.N = 400
//! physics.gamma = 5
//! model.G1 = affine_truncated(1, 1)
//! initial.n1 = bump(-0.5, 0.6, 1), indicator(0.2, 0.4, 0.5)
//! time.snapshot_times = 0.5, 1, 2
//! ```
//!
//! Every key is optional; omitted keys take the defaults of
//! [`RunConfig::default`]. Unknown or repeated keys are errors.

use crate::error::{ConfigIssue, Error, Result};
use crate::fields::{DEFAULT_TOL_POS, DEFAULT_VAC_TOL};
use crate::initial_data::{ProfileShape, ProfileSpec, Species};
use crate::model::{FeasibilityReport, GrowthModel, GrowthTerm};
use crate::solver::{Scheme, SchemeConfig};
use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

pub const MIN_CELLS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub half_width: f64,
    pub cells: usize,
    pub t_end: f64,
    pub cfl: f64,
    pub dt_max: f64,
    /// Diagnostics cadence in steps.
    pub output_every: usize,
    pub snapshot_times: Vec<f64>,
    pub gamma: f64,
    pub epsilon: f64,
    pub scheme: Scheme,
    pub model: GrowthModel<f64>,
    pub profiles: Vec<ProfileSpec<f64>>,
    pub vac_tol: f64,
    pub tol_pos: f64,
    /// Absolute segregation tolerance; `None` means `1e-8` times the initial mass.
    pub seg_tol: Option<f64>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = Self::invasion_preset();
        cfg.output_dir = PathBuf::from("out");
        cfg
    }
}

impl RunConfig {
    /// Overlapping bumps under the invasion model (`F1 = 1 - p/3`).
    pub fn invasion_preset() -> Self {
        Self {
            half_width: 3.0,
            cells: 400,
            t_end: 5.0,
            cfl: 0.9,
            dt_max: 1e-3,
            output_every: 100,
            snapshot_times: vec![1.0, 2.5],
            gamma: 5.0,
            epsilon: 0.01,
            scheme: Scheme::Explicit,
            model: GrowthModel::invasion(),
            profiles: vec![
                ProfileSpec {
                    species: Species::One,
                    shape: ProfileShape::Bump { center: -0.3, width: 0.6, height: 0.5 },
                },
                ProfileSpec {
                    species: Species::Two,
                    shape: ProfileShape::Bump { center: 0.3, width: 0.6, height: 0.5 },
                },
            ],
            vac_tol: DEFAULT_VAC_TOL,
            tol_pos: DEFAULT_TOL_POS,
            seg_tol: None,
            newton_tol: 1e-11,
            newton_max_iter: 50,
            output_dir: PathBuf::from("out/invasion"),
            emit_plots: true,
        }
    }

    /// Two separated blocks without cross reactions and without regularisation.
    pub fn segregation_preset() -> Self {
        Self {
            half_width: 4.0,
            t_end: 2.0,
            epsilon: 0.0,
            snapshot_times: vec![0.5, 1.0],
            model: GrowthModel::segregated(),
            profiles: vec![
                ProfileSpec {
                    species: Species::One,
                    shape: ProfileShape::Indicator { x0: -1.0, x1: 0.0, height: 1.0 },
                },
                ProfileSpec { species: Species::Two, shape: ProfileShape::Indicator { x0: 0.5, x1: 1.5, height: 1.0 } },
            ],
            output_dir: PathBuf::from("out/segregation"),
            ..Self::invasion_preset()
        }
    }

    pub fn scheme_config(&self) -> SchemeConfig<f64> {
        SchemeConfig {
            scheme: self.scheme,
            cfl: self.cfl,
            dt_max: self.dt_max,
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
            vac_tol: self.vac_tol,
            tol_pos: self.tol_pos,
        }
    }

    pub fn feasibility(&self) -> FeasibilityReport {
        self.model.check_feasibility()
    }

    /// Range and feasibility checks; returns the feasibility report so its
    /// warnings can be passed on.
    pub fn validate(&self) -> Result<FeasibilityReport> {
        let mut issues = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                issues.push(ConfigIssue::general(msg));
            }
        };
        need(self.gamma > 1.0 && self.gamma.is_finite(), format!("gamma must exceed 1, got {}", self.gamma));
        need(self.cells >= MIN_CELLS, format!("grid.N must be at least {MIN_CELLS}, got {}", self.cells));
        need(
            self.half_width > 0.0 && self.half_width.is_finite(),
            format!("grid.L must be positive, got {}", self.half_width),
        );
        need(self.t_end >= 0.0 && self.t_end.is_finite(), format!("time.T must be >= 0, got {}", self.t_end));
        need(
            self.epsilon >= 0.0 && self.epsilon.is_finite(),
            format!("physics.epsilon must be >= 0, got {}", self.epsilon),
        );
        need(self.cfl > 0.0 && self.cfl <= 1.0, format!("time.cfl must lie in (0, 1], got {}", self.cfl));
        need(self.dt_max > 0.0, format!("time.dt_max must be positive, got {}", self.dt_max));
        need(self.output_every >= 1, "time.output_every must be at least 1".into());
        need(self.newton_tol > 0.0, format!("tolerances.newton_tol must be positive, got {}", self.newton_tol));
        need(self.newton_max_iter >= 1, "tolerances.newton_max_iter must be at least 1".into());
        need(self.vac_tol >= 0.0, format!("tolerances.vac_tol must be >= 0, got {}", self.vac_tol));
        need(self.tol_pos >= 0.0, format!("tolerances.tol_pos must be >= 0, got {}", self.tol_pos));
        if let Some(s) = self.seg_tol {
            need(s >= 0.0, format!("tolerances.seg_tol must be >= 0, got {s}"));
        }
        for &t in &self.snapshot_times {
            need(t >= 0.0 && t <= self.t_end, format!("snapshot time {t} outside [0, {}]", self.t_end));
        }
        let limit = 0.5 * self.half_width;
        for p in &self.profiles {
            if let Err(e) = p.shape.validate() {
                need(false, e.to_string());
            } else if let Some((a, b)) = p.shape.support() {
                need(
                    a > -limit && b < limit,
                    format!("{} must lie inside (-{limit}, {limit}); increase grid.L", p.shape),
                );
            }
        }
        if !issues.is_empty() {
            return Err(Error::Config(issues));
        }
        let report = self.feasibility();
        let failures: Vec<String> = report.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
        if !failures.is_empty() {
            return Err(Error::InfeasibleModel(failures.join("; ")));
        }
        Ok(report)
    }

    /// Canonical text form; parsing it reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let profiles = |sp: Species| {
            let v: Vec<String> =
                self.profiles.iter().filter(|p| p.species == sp).map(|p| shape_text(&p.shape)).collect();
            if v.is_empty() {
                "none".to_string()
            } else {
                v.join(", ")
            }
        };
        let _ = writeln!(s, "grid.L = {:?}", self.half_width);
        let _ = writeln!(s, "grid.N = {}", self.cells);
        let _ = writeln!(s, "time.T = {:?}", self.t_end);
        let _ = writeln!(s, "time.cfl = {:?}", self.cfl);
        let _ = writeln!(s, "time.dt_max = {:?}", self.dt_max);
        let _ = writeln!(s, "time.output_every = {}", self.output_every);
        let _ = writeln!(s, "time.snapshot_times = {}", list(&self.snapshot_times));
        let _ = writeln!(s, "physics.gamma = {:?}", self.gamma);
        let _ = writeln!(s, "physics.epsilon = {:?}", self.epsilon);
        let _ = writeln!(s, "physics.scheme = {}", self.scheme);
        for (k, t) in [("F1", &self.model.f1), ("F2", &self.model.f2), ("G1", &self.model.g1), ("G2", &self.model.g2)] {
            let _ = writeln!(s, "model.{k} = {}", term_text(t));
        }
        let _ = writeln!(s, "initial.n1 = {}", profiles(Species::One));
        let _ = writeln!(s, "initial.n2 = {}", profiles(Species::Two));
        let _ = writeln!(s, "tolerances.vac_tol = {:?}", self.vac_tol);
        let _ = writeln!(s, "tolerances.tol_pos = {:?}", self.tol_pos);
        if let Some(v) = self.seg_tol {
            let _ = writeln!(s, "tolerances.seg_tol = {v:?}");
        }
        let _ = writeln!(s, "tolerances.newton_tol = {:?}", self.newton_tol);
        let _ = writeln!(s, "tolerances.newton_max_iter = {}", self.newton_max_iter);
        let _ = writeln!(s, "outputs.directory = {}", self.output_dir.display());
        let _ = writeln!(s, "outputs.emit_plots = {}", self.emit_plots);
        s
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn term_text(t: &GrowthTerm<f64>) -> String {
    match *t {
        GrowthTerm::Zero => "zero".into(),
        GrowthTerm::Affine { amplitude, threshold } => format!("affine({amplitude:?}, {threshold:?})"),
        GrowthTerm::AffineTruncated { amplitude, threshold } => {
            format!("affine_truncated({amplitude:?}, {threshold:?})")
        }
    }
}

fn shape_text(s: &ProfileShape<f64>) -> String {
    match *s {
        ProfileShape::Indicator { x0, x1, height } => format!("indicator({x0:?}, {x1:?}, {height:?})"),
        ProfileShape::Bump { center, width, height } => format!("bump({center:?}, {width:?}, {height:?})"),
        ProfileShape::Uniform { height } => format!("uniform({height:?})"),
    }
}

const KEYS: &[&str] = &[
    "grid.L",
    "grid.N",
    "time.T",
    "time.cfl",
    "time.dt_max",
    "time.output_every",
    "time.snapshot_times",
    "physics.gamma",
    "physics.epsilon",
    "physics.scheme",
    "model.F1",
    "model.F2",
    "model.G1",
    "model.G2",
    "initial.n1",
    "initial.n2",
    "tolerances.vac_tol",
    "tolerances.tol_pos",
    "tolerances.seg_tol",
    "tolerances.newton_tol",
    "tolerances.newton_max_iter",
    "outputs.directory",
    "outputs.emit_plots",
];

/// Splits on commas that are not inside parentheses.
fn split_top_level(value: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in value.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(value[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(value[start..].trim());
    parts
}

fn number(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("expected a number, got `{}`", s.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a finite number, got `{}`", s.trim()))
    }
}

fn count(s: &str) -> std::result::Result<usize, String> {
    s.trim().parse().map_err(|_| format!("expected a non-negative integer, got `{}`", s.trim()))
}

fn boolean(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("expected true or false, got `{other}`")),
    }
}

/// `name(a, b, ...)` or a bare `name`.
fn call(s: &str) -> std::result::Result<(&str, Vec<f64>), String> {
    let s = s.trim();
    match s.find('(') {
        None => Ok((s, Vec::new())),
        Some(open) => {
            if !s.ends_with(')') {
                return Err(format!("unbalanced parentheses in `{s}`"));
            }
            let inner = &s[open + 1..s.len() - 1];
            let args = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner.split(',').map(number).collect::<std::result::Result<_, _>>()?
            };
            Ok((s[..open].trim(), args))
        }
    }
}

fn arity(name: &str, args: &[f64], n: usize) -> std::result::Result<(), String> {
    if args.len() == n {
        Ok(())
    } else {
        Err(format!("{name} takes {n} arguments, got {}", args.len()))
    }
}

fn growth_term(s: &str) -> std::result::Result<GrowthTerm<f64>, String> {
    let (name, args) = call(s)?;
    let built = match name {
        "zero" => {
            arity(name, &args, 0)?;
            Ok(GrowthTerm::Zero)
        }
        "affine" => {
            arity(name, &args, 2)?;
            GrowthTerm::affine(args[0], args[1])
        }
        "affine_truncated" => {
            arity(name, &args, 2)?;
            GrowthTerm::affine_truncated(args[0], args[1])
        }
        other => return Err(format!("unknown growth term `{other}` (expected affine, affine_truncated, zero)")),
    };
    built.map_err(|e| e.to_string())
}

fn profile_list(s: &str, species: Species) -> std::result::Result<Vec<ProfileSpec<f64>>, String> {
    if s.trim() == "none" {
        return Ok(Vec::new());
    }
    split_top_level(s)
        .into_iter()
        .map(|part| {
            let (name, args) = call(part)?;
            let shape = match name {
                "indicator" => {
                    arity(name, &args, 3)?;
                    ProfileShape::Indicator { x0: args[0], x1: args[1], height: args[2] }
                }
                "bump" => {
                    arity(name, &args, 3)?;
                    ProfileShape::Bump { center: args[0], width: args[1], height: args[2] }
                }
                "uniform" => {
                    arity(name, &args, 1)?;
                    ProfileShape::Uniform { height: args[0] }
                }
                other => return Err(format!("unknown profile `{other}` (expected indicator, bump, uniform)")),
            };
            Ok(ProfileSpec { species, shape })
        })
        .collect()
}

/// Parses and validates a configuration. Syntax problems are collected
/// with their line numbers and reported together.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg = parse_unvalidated(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses without range or feasibility checks.
pub fn parse_unvalidated(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut issues = Vec::new();
    let mut seen = HashSet::new();
    let mut terms = [cfg.model.f1, cfg.model.f2, cfg.model.g1, cfg.model.g2];
    let mut n1_profiles: Option<Vec<ProfileSpec<f64>>> = None;
    let mut n2_profiles: Option<Vec<ProfileSpec<f64>>> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            issues.push(ConfigIssue::at(line, format!("expected `section.key = value`, got `{content}`")));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            issues.push(ConfigIssue::at(line, format!("unknown key `{key}`")));
            continue;
        }
        if !seen.insert(key.to_string()) {
            issues.push(ConfigIssue::at(line, format!("key `{key}` given more than once")));
            continue;
        }
        let applied: std::result::Result<(), String> = (|| {
            match key {
                "grid.L" => cfg.half_width = number(value)?,
                "grid.N" => cfg.cells = count(value)?,
                "time.T" => cfg.t_end = number(value)?,
                "time.cfl" => cfg.cfl = number(value)?,
                "time.dt_max" => cfg.dt_max = number(value)?,
                "time.output_every" => cfg.output_every = count(value)?,
                "time.snapshot_times" => {
                    cfg.snapshot_times = if value.is_empty() {
                        Vec::new()
                    } else {
                        value.split(',').map(number).collect::<std::result::Result<_, _>>()?
                    }
                }
                "physics.gamma" => cfg.gamma = number(value)?,
                "physics.epsilon" => cfg.epsilon = number(value)?,
                "physics.scheme" => cfg.scheme = value.parse()?,
                "model.F1" => terms[0] = growth_term(value)?,
                "model.F2" => terms[1] = growth_term(value)?,
                "model.G1" => terms[2] = growth_term(value)?,
                "model.G2" => terms[3] = growth_term(value)?,
                "initial.n1" => n1_profiles = Some(profile_list(value, Species::One)?),
                "initial.n2" => n2_profiles = Some(profile_list(value, Species::Two)?),
                "tolerances.vac_tol" => cfg.vac_tol = number(value)?,
                "tolerances.tol_pos" => cfg.tol_pos = number(value)?,
                "tolerances.seg_tol" => cfg.seg_tol = Some(number(value)?),
                "tolerances.newton_tol" => cfg.newton_tol = number(value)?,
                "tolerances.newton_max_iter" => cfg.newton_max_iter = count(value)?,
                "outputs.directory" => {
                    if value.is_empty() {
                        return Err("output directory must not be empty".into());
                    }
                    cfg.output_dir = PathBuf::from(value)
                }
                "outputs.emit_plots" => cfg.emit_plots = boolean(value)?,
                _ => unreachable!("key list and match arms agree"),
            }
            Ok(())
        })();
        if let Err(msg) = applied {
            issues.push(ConfigIssue::at(line, format!("{key}: {msg}")));
        }
    }
    if !issues.is_empty() {
        return Err(Error::Config(issues));
    }

    if let Some(list) = n1_profiles {
        cfg.profiles.retain(|p| p.species != Species::One);
        cfg.profiles.extend(list);
    }
    if let Some(list) = n2_profiles {
        cfg.profiles.retain(|p| p.species != Species::Two);
        cfg.profiles.extend(list);
    }
    cfg.profiles.sort_by_key(|p| p.species != Species::One);
    cfg.model = GrowthModel::new(terms[0], terms[1], terms[2], terms[3])?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = parse_config("# nothing here\n\n").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.gamma, 5.0);
        assert!(cfg.feasibility().all_pass());
    }

    #[test]
    fn gamma_one_rejected() {
        let err = parse_config("physics.gamma = 1\n").unwrap_err();
        assert!(err.to_string().contains("gamma must exceed 1"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_key_named_with_line() {
        match parse_config("grid.N = 200\nphysics.gama = 5\n") {
            Err(Error::Config(issues)) => {
                assert_eq!(issues.len(), 1);
                assert_eq!(issues[0].line, Some(2));
                assert!(issues[0].message.contains("gama"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn collects_several_issues() {
        match parse_config("grid.N = abc\ngrid.N = 3\nfoo\nmodel.F1 = cubic(1)\n") {
            Err(Error::Config(issues)) => {
                let lines: Vec<_> = issues.iter().map(|i| i.line.unwrap()).collect();
                assert_eq!(lines, vec![1, 2, 3, 4]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn growth_slots_and_profiles() {
        let text = "model.F1 = affine(2, 1)\nmodel.F2 = zero\nmodel.G1 = zero\nmodel.G2 = affine(1, 1)\n\
                    initial.n1 = indicator(-1, 0, 1), bump(0.2, 0.1, 0.5)\ninitial.n2 = none\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.model, GrowthModel::segregated());
        assert_eq!(cfg.profiles.len(), 2);
        assert!(cfg.profiles.iter().all(|p| p.species == Species::One));
        assert_eq!(cfg.profiles[1].shape, ProfileShape::Bump { center: 0.2, width: 0.1, height: 0.5 });
        let warns: Vec<_> = cfg.validate().unwrap().warnings().map(|c| c.name).collect();
        assert_eq!(warns, vec!["balanced-origin"]);
    }

    #[test]
    fn infeasible_cross_term_is_exit_two() {
        let err = parse_config("model.G1 = affine(1, 1)\n").unwrap_err();
        assert!(matches!(err, Error::InfeasibleModel(_)));
        assert_eq!(err.exit_code(), 2);
        let err = parse_config("model.F1 = zero\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn range_checks() {
        for bad in
            ["grid.N = 8", "time.T = -1", "physics.epsilon = -0.1", "time.cfl = 1.5", "initial.n1 = bump(1.4, 0.2, 1)"]
        {
            let err = parse_config(bad).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{bad}: {err}");
        }
    }

    #[test]
    fn text_form_round_trips() {
        for cfg in [RunConfig::default(), RunConfig::segregation_preset(), RunConfig::invasion_preset()] {
            let back = parse_config(&cfg.to_text()).unwrap();
            assert_eq!(back, cfg);
        }
        let odd = RunConfig {
            seg_tol: Some(1e-9),
            snapshot_times: vec![],
            scheme: Scheme::SemiImplicit,
            gamma: 0.1 + 0.2 + 5.0,
            ..RunConfig::default()
        };
        assert_eq!(parse_config(&odd.to_text()).unwrap(), odd);
    }

    #[test]
    fn top_level_split_respects_parentheses() {
        assert_eq!(split_top_level("a(1, 2), b(3)"), vec!["a(1, 2)", "b(3)"]);
        assert_eq!(split_top_level("uniform(0.2)"), vec!["uniform(0.2)"]);
    }
}
