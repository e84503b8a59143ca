//! Matched runs over a grid of `gamma` (and `epsilon`) values, their
//! decay and boundedness verdicts, and the segregation study.

use crate::config::RunConfig;
use crate::error::{ConfigIssue, Error, Result};
use crate::fields::{fractions, SimState};
use crate::grid::Grid;
use crate::initial_data::build_initial;
use crate::output::{self, fmt_f64};
use crate::run::{run_simulation, simulate, RunSummary};
use crate::solver::{regularise_initial, Scheme};
use rayon::prelude::*;
use std::fmt;
use std::path::{Path, PathBuf};

pub const DEFAULT_GAMMAS: [f64; 5] = [5.0, 10.0, 20.0, 40.0, 80.0];
pub const DEFAULT_EPSILONS: [f64; 2] = [0.01, 0.0];
/// Rows at or above this `gamma` switch to the semi-implicit scheme by default.
pub const DEFAULT_IMPLICIT_FROM: f64 = 20.0;

pub const MONOTONE_MARGIN: f64 = 1.05;
pub const SLOPE_THRESHOLD: f64 = -0.7;
pub const BOUNDEDNESS_FACTOR: f64 = 5.0;
pub const SEGREGATION_RELATIVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

/// Summary of one member run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub epsilon: f64,
    pub scheme: Scheme,
    /// Complementarity residual averaged over `[T/2, T]`.
    pub comp_residual_timeavg: f64,
    pub gamma_scaled_residual: f64,
    pub sup_w_minus: f64,
    pub grad_p_l2_cum_t: f64,
    pub gamma_p_absw_cum_t: f64,
    pub bv_sup: f64,
    pub seg_ncc_max: f64,
    pub max_p_overall: f64,
    pub energy_rate_sup: f64,
    pub runtime_seconds: f64,
    pub status: RowStatus,
}

impl SweepRow {
    pub const HEADER: &'static str = "gamma,epsilon,scheme,comp_residual_timeavg,gamma_scaled_residual,sup_w_minus,\
grad_p_L2_cum_T,gamma_p_absw_cum_T,bv_sup,seg_ncc_max,max_p_overall,energy_rate_sup,runtime_seconds,status";

    pub fn from_summary(gamma: f64, epsilon: f64, scheme: Scheme, s: &RunSummary) -> Self {
        let last = s.final_record();
        Self {
            gamma,
            epsilon,
            scheme,
            comp_residual_timeavg: s.peaks.residual_window_avg,
            gamma_scaled_residual: gamma * s.peaks.residual_window_avg,
            sup_w_minus: s.peaks.w_minus_sup,
            grad_p_l2_cum_t: last.grad_p_l2_cum,
            gamma_p_absw_cum_t: last.gamma_p_absw_cum,
            bv_sup: s.peaks.bv_sup,
            seg_ncc_max: s.peaks.seg_ncc_max,
            max_p_overall: s.peaks.max_p,
            energy_rate_sup: s.peaks.energy_rate_sup,
            runtime_seconds: s.runtime_seconds,
            status: RowStatus::Ok,
        }
    }

    fn failed(gamma: f64, epsilon: f64, scheme: Scheme, reason: String) -> Self {
        Self {
            gamma,
            epsilon,
            scheme,
            comp_residual_timeavg: f64::NAN,
            gamma_scaled_residual: f64::NAN,
            sup_w_minus: f64::NAN,
            grad_p_l2_cum_t: f64::NAN,
            gamma_p_absw_cum_t: f64::NAN,
            bv_sup: f64::NAN,
            seg_ncc_max: f64::NAN,
            max_p_overall: f64::NAN,
            energy_rate_sup: f64::NAN,
            runtime_seconds: 0.0,
            status: RowStatus::Failed(reason),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }

    pub fn to_csv(&self) -> String {
        let status = match &self.status {
            RowStatus::Ok => "ok".to_string(),
            RowStatus::Failed(r) => format!("failed: {}", r.replace([',', '\n'], ";")),
        };
        let nums = [
            self.comp_residual_timeavg,
            self.gamma_scaled_residual,
            self.sup_w_minus,
            self.grad_p_l2_cum_t,
            self.gamma_p_absw_cum_t,
            self.bv_sup,
            self.seg_ncc_max,
            self.max_p_overall,
            self.energy_rate_sup,
            self.runtime_seconds,
        ]
        .map(fmt_f64)
        .join(",");
        format!("{},{},{},{nums},{status}", fmt_f64(self.gamma), fmt_f64(self.epsilon), self.scheme)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub gammas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub workers: usize,
    /// Rows with `gamma >= implicit_from` use the semi-implicit scheme.
    pub implicit_from: Option<f64>,
    /// Parent directory for per-row outputs; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            gammas: DEFAULT_GAMMAS.to_vec(),
            epsilons: DEFAULT_EPSILONS.to_vec(),
            workers: 4,
            implicit_from: Some(DEFAULT_IMPLICIT_FROM),
            out_dir: None,
        }
    }
}

pub fn row_dir_name(gamma: f64, epsilon: f64) -> String {
    format!("gamma_{gamma}_eps_{epsilon}")
}

/// One row per `(epsilon, gamma)` pair, epsilon-major. Rows run
/// independently on up to `workers` threads; a failing member run is
/// recorded in its row and does not stop the sweep.
pub fn run_gamma_sweep(base: &RunConfig, opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    let mut issues = Vec::new();
    if opts.gammas.is_empty() {
        issues.push(ConfigIssue::general("gamma list is empty"));
    }
    if opts.gammas.iter().any(|&g| !(g > 1.0)) {
        issues.push(ConfigIssue::general("every gamma must exceed 1"));
    }
    if opts.gammas.windows(2).any(|w| !(w[1] > w[0])) {
        issues.push(ConfigIssue::general("gamma list must be strictly increasing"));
    }
    if opts.epsilons.is_empty() || opts.epsilons.iter().any(|&e| !(e >= 0.0)) {
        issues.push(ConfigIssue::general("epsilon list must be non-empty with entries >= 0"));
    }
    if opts.workers == 0 {
        issues.push(ConfigIssue::general("worker count must be at least 1"));
    }
    if !issues.is_empty() {
        return Err(Error::Config(issues));
    }
    base.validate()?;

    let jobs: Vec<(f64, f64)> = opts.epsilons.iter().flat_map(|&e| opts.gammas.iter().map(move |&g| (g, e))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        jobs.par_iter()
            .map(|&(gamma, epsilon)| {
                let scheme = match opts.implicit_from {
                    Some(threshold) if gamma >= threshold => Scheme::SemiImplicit,
                    _ => base.scheme,
                };
                let mut cfg = RunConfig { gamma, epsilon, scheme, ..base.clone() };
                let result = match &opts.out_dir {
                    Some(dir) => {
                        cfg.output_dir = dir.join(row_dir_name(gamma, epsilon));
                        run_simulation(&cfg)
                    }
                    None => simulate(&cfg),
                };
                match result {
                    Ok(s) => SweepRow::from_summary(gamma, epsilon, scheme, &s),
                    Err(e) => SweepRow::failed(gamma, epsilon, scheme, e.to_string()),
                }
            })
            .collect()
    });
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut s = String::from(SweepRow::HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    output::write_text(path, &s)
}

/// `name PASS|FAIL measured threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
    pub note: String,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            fmt_f64(self.measured),
            fmt_f64(self.threshold)
        )?;
        if !self.note.is_empty() {
            write!(f, " # {}", self.note)?;
        }
        Ok(())
    }
}

pub fn write_verdicts(verdicts: &[Verdict], path: &Path) -> Result<()> {
    let text: String = verdicts.iter().map(|v| format!("{v}\n")).collect();
    output::write_text(path, &text)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn ratio_to_first(name: &str, eps: f64, rows: &[&SweepRow], get: impl Fn(&SweepRow) -> f64) -> Verdict {
    let base = get(rows[0]);
    let worst = rows.iter().map(|r| get(r)).fold(f64::NEG_INFINITY, f64::max);
    let measured = worst / base;
    Verdict {
        name: format!("bounded-{name}[eps={eps}]"),
        pass: measured.is_finite() && measured <= BOUNDEDNESS_FACTOR,
        measured,
        threshold: BOUNDEDNESS_FACTOR,
        note: format!("max over sweep / value at gamma={}", rows[0].gamma),
    }
}

/// Decay and boundedness verdicts for every epsilon with at least two
/// successful rows. Rows are taken in increasing `gamma`.
pub fn decay_report(rows: &[SweepRow]) -> Result<Vec<Verdict>> {
    let mut epsilons: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    epsilons.sort_by(f64::total_cmp);
    epsilons.dedup();
    let mut verdicts = Vec::new();
    let mut best = 0;
    for eps in epsilons {
        let mut group: Vec<&SweepRow> = rows.iter().filter(|r| r.epsilon == eps && r.is_ok()).collect();
        group.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
        best = best.max(group.len());
        if group.len() < 2 {
            continue;
        }
        let gammas: Vec<f64> = group.iter().map(|r| r.gamma).collect();
        let res: Vec<f64> = group.iter().map(|r| r.comp_residual_timeavg).collect();

        let worst_step = res.windows(2).map(|w| w[1] / w[0]).fold(f64::NEG_INFINITY, f64::max);
        verdicts.push(Verdict {
            name: format!("residual-monotone[eps={eps}]"),
            pass: worst_step <= MONOTONE_MARGIN,
            measured: worst_step,
            threshold: MONOTONE_MARGIN,
            note: "largest residual(gamma_next)/residual(gamma)".into(),
        });
        let slope = log_log_slope(&gammas, &res);
        verdicts.push(Verdict {
            name: format!("residual-slope[eps={eps}]"),
            pass: slope <= SLOPE_THRESHOLD,
            measured: slope,
            threshold: SLOPE_THRESHOLD,
            note: "least-squares slope of log residual vs log gamma".into(),
        });
        let scaled: Vec<f64> = group.iter().map(|r| r.gamma_scaled_residual).collect();
        let spread = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            / scaled.iter().copied().fold(f64::INFINITY, f64::min);
        verdicts.push(Verdict {
            name: format!("scaled-residual-spread[eps={eps}]"),
            pass: spread < BOUNDEDNESS_FACTOR,
            measured: spread,
            threshold: BOUNDEDNESS_FACTOR,
            note: "max/min of gamma * residual".into(),
        });
        verdicts.push(ratio_to_first("grad_p_L2_cum_T", eps, &group, |r| r.grad_p_l2_cum_t));
        verdicts.push(ratio_to_first("bv_sup", eps, &group, |r| r.bv_sup));
        verdicts.push(ratio_to_first("sup_w_minus", eps, &group, |r| r.sup_w_minus));
        verdicts.push(ratio_to_first("gamma_p_absw_cum_T", eps, &group, |r| r.gamma_p_absw_cum_t));

        // The reference rate may be negative, so the bound is 5 |C(gamma_0)|.
        let base = group[0].energy_rate_sup;
        let worst = group.iter().map(|r| r.energy_rate_sup).fold(f64::NEG_INFINITY, f64::max);
        let measured = worst / base.abs();
        verdicts.push(Verdict {
            name: format!("energy-rate[eps={eps}]"),
            pass: group.iter().all(|r| r.energy_rate_sup.is_finite()) && measured <= BOUNDEDNESS_FACTOR,
            measured,
            threshold: BOUNDEDNESS_FACTOR,
            note: format!("max sup(dE/dt + D) over sweep / |value at gamma={}| ({})", group[0].gamma, fmt_f64(base)),
        });
    }
    if verdicts.is_empty() {
        return Err(Error::InsufficientRows { required: 2, available: best });
    }
    Ok(verdicts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegregationVerdict {
    pub pass: bool,
    pub seg_ncc_max: f64,
    pub seg_n1n2_max: f64,
    pub tolerance: f64,
    pub initial_mass: f64,
    /// `(t, seg_ncc, seg_n1n2)` at every diagnostics record.
    pub curve: Vec<(f64, f64, f64)>,
}

impl SegregationVerdict {
    pub fn verdicts(&self) -> Vec<Verdict> {
        let note = format!(
            "tolerance = {} x initial mass {}",
            fmt_f64(self.tolerance / self.initial_mass),
            fmt_f64(self.initial_mass)
        );
        vec![
            Verdict {
                name: "segregation-ncc".into(),
                pass: self.seg_ncc_max <= self.tolerance,
                measured: self.seg_ncc_max,
                threshold: self.tolerance,
                note: note.clone(),
            },
            Verdict {
                name: "segregation-n1n2".into(),
                pass: self.seg_n1n2_max <= self.tolerance,
                measured: self.seg_n1n2_max,
                threshold: self.tolerance,
                note,
            },
        ]
    }
}

/// Initial `(int n c1 c2, int n1 n2)` of a configuration after regularisation.
pub fn initial_segregation(cfg: &RunConfig) -> Result<(f64, f64)> {
    let grid = Grid::new(cfg.half_width, cfg.cells)?;
    let (n1, n2) = build_initial(&cfg.profiles, &grid)?;
    let s: SimState<f64> = regularise_initial(&n1, &n2, cfg.gamma, cfg.epsilon)?;
    let (c1, c2) = fractions(&s.n1, &s.n2, cfg.vac_tol);
    let ncc = grid.dx() * (0..grid.cells()).map(|j| (s.n1[j] + s.n2[j]) * c1[j] * c2[j]).sum::<f64>();
    let n1n2 = grid.dx() * s.n1.iter().zip(&s.n2).map(|(a, b)| a * b).sum::<f64>();
    Ok((ncc, n1n2))
}

/// Runs a configuration without cross reactions from segregated data and
/// checks that the species stay apart. Mixing is reported as a failed
/// verdict, not as an error.
pub fn segregation_study(cfg: &RunConfig, write_outputs: bool) -> Result<SegregationVerdict> {
    if cfg.model.has_cross_reactions() {
        return Err(Error::Config(vec![ConfigIssue::general(
            "segregation study needs model.F2 = zero and model.G1 = zero",
        )]));
    }
    let (ncc0, n1n20) = initial_segregation(cfg)?;
    if ncc0 > 0.0 || n1n20 > 0.0 {
        return Err(Error::Precondition(format!(
            "initial data are not segregated: int n c1 c2 = {ncc0:e}, int n1 n2 = {n1n20:e}"
        )));
    }
    let summary = if write_outputs { run_simulation(cfg)? } else { simulate(cfg)? };
    let tolerance = cfg.seg_tol.unwrap_or(SEGREGATION_RELATIVE_TOL * summary.initial_mass);
    let verdict = SegregationVerdict {
        pass: summary.peaks.seg_ncc_max <= tolerance && summary.peaks.seg_n1n2_max <= tolerance,
        seg_ncc_max: summary.peaks.seg_ncc_max,
        seg_n1n2_max: summary.peaks.seg_n1n2_max,
        tolerance,
        initial_mass: summary.initial_mass,
        curve: summary.records.iter().map(|r| (r.t, r.seg_ncc, r.seg_n1n2)).collect(),
    };
    if write_outputs {
        write_verdicts(&verdict.verdicts(), &cfg.output_dir.join("verdicts.txt"))?;
    }
    Ok(verdict)
}
