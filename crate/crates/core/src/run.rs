//! The time loop: stepping, diagnostics cadence, snapshots and run summary.

use crate::config::RunConfig;
use crate::diagnostics::{bounds_check, Accumulator, BoundKind, BoundsCheck, DiagnosticsRecord, Functionals};
use crate::error::{Error, Result};
use crate::fields::{DerivedFields, SimState};
use crate::grid::Grid;
use crate::initial_data::{all_compact, audit_well_prepared, build_initial, AuditReport};
use crate::output::{self, DiagnosticsWriter};
use crate::solver::{regularise_initial, stable_dt, step};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

/// Cumulative clamped mass beyond this fraction of the initial mass aborts a run.
pub const CLAMP_LIMIT_RELATIVE: f64 = 1e-8;

/// Extremes and window averages over every step of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peaks {
    pub max_p: f64,
    pub min_n: f64,
    /// `sup_t` of the summed total variation of `n1, n2, c1, c2`.
    pub bv_sup: f64,
    pub w_minus_sup: f64,
    pub seg_ncc_max: f64,
    pub seg_n1n2_max: f64,
    /// Largest `(dE + dDcum) / dt` between consecutive records.
    pub energy_rate_sup: f64,
    pub nonneg_violation: f64,
    /// `max_t (2 eps exp(-R t) - min n)`; negative means the barrier held
    /// with margin. `-inf` without regularisation.
    pub barrier_deficit: f64,
    /// `max_t (max p - P_H)` when the ceiling applies, otherwise `-inf`.
    pub pressure_excess: f64,
    /// Complementarity residual averaged over `[T/2, T]`.
    pub residual_window_avg: f64,
}

impl Peaks {
    fn new() -> Self {
        Self {
            max_p: 0.0,
            min_n: f64::INFINITY,
            bv_sup: 0.0,
            w_minus_sup: 0.0,
            seg_ncc_max: 0.0,
            seg_n1n2_max: 0.0,
            energy_rate_sup: f64::NEG_INFINITY,
            nonneg_violation: 0.0,
            barrier_deficit: f64::NEG_INFINITY,
            pressure_excess: f64::NEG_INFINITY,
            residual_window_avg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_state: SimState<f64>,
    pub steps: usize,
    pub records: Vec<DiagnosticsRecord<f64>>,
    pub peaks: Peaks,
    pub initial_mass: f64,
    /// `sum dt int (n1 F + n2 G)`.
    pub source_cum: f64,
    /// `|M(T) - M(0) - source_cum - clamp_cum| / M(0)`.
    pub mass_balance_residual: f64,
    pub audit: AuditReport<f64>,
    pub warnings: Vec<String>,
    pub runtime_seconds: f64,
}

impl RunSummary {
    pub fn final_record(&self) -> &DiagnosticsRecord<f64> {
        self.records.last().expect("a run always records its final state")
    }
}

/// Runs `cfg` and writes `run_meta`, `diagnostics.csv`, snapshots and the
/// optional plot script into `cfg.output_dir`.
pub fn run_simulation(cfg: &RunConfig) -> Result<RunSummary> {
    drive(cfg, Some(&cfg.output_dir))
}

/// Same computation as [`run_simulation`] without touching the file system.
pub fn simulate(cfg: &RunConfig) -> Result<RunSummary> {
    drive(cfg, None)
}

fn snapshot_schedule(cfg: &RunConfig) -> Vec<f64> {
    let mut times: Vec<f64> = cfg.snapshot_times.iter().copied().chain([0.0, cfg.t_end]).collect();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * cfg.t_end.max(1.0));
    times
}

fn run_meta(cfg: &RunConfig, audit: &AuditReport<f64>, warnings: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    s.push_str(&cfg.to_text());
    let _ = writeln!(s, "# feasibility");
    for c in &cfg.feasibility().conditions {
        let _ = writeln!(s, "#   {} {}: {}", c.status, c.name, c.detail);
    }
    for w in warnings {
        let _ = writeln!(s, "# warning: {w}");
    }
    let _ = writeln!(s, "# initial data audit (advisory)");
    for line in audit.to_string().lines() {
        let _ = writeln!(s, "#   {line}");
    }
    s
}

struct Sink<'a> {
    dir: &'a Path,
    diagnostics: DiagnosticsWriter,
}

fn drive(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunSummary> {
    let started = Instant::now();
    let report = cfg.validate()?;
    let warnings: Vec<String> = report.warnings().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    let grid = Grid::new(cfg.half_width, cfg.cells)?;
    let model = &cfg.model;
    let scheme = cfg.scheme_config();
    let (n1, n2) = build_initial(&cfg.profiles, &grid)?;
    let audit = audit_well_prepared(&n1, &n2, cfg.gamma, cfg.epsilon, model, &grid, cfg.vac_tol)?;
    let mut state = regularise_initial(&n1, &n2, cfg.gamma, cfg.epsilon)?;

    let mut sink = match out_dir {
        Some(dir) => {
            output::create_dir(dir)?;
            output::write_text(&dir.join(output::RUN_META_FILE), &run_meta(cfg, &audit, &warnings))?;
            Some(Sink { dir, diagnostics: DiagnosticsWriter::create(&dir.join(output::DIAGNOSTICS_FILE))? })
        }
        None => None,
    };

    let snapshots = snapshot_schedule(cfg);
    let check_support = cfg.epsilon == 0.0 && all_compact(&cfg.profiles);
    let t_end = cfg.t_end;
    let half = 0.5 * t_end;
    let clamp_limit = CLAMP_LIMIT_RELATIVE * grid.integrate(&state.total());

    let mut acc = Accumulator::new(cfg.gamma);
    let mut peaks = Peaks::new();
    let mut records: Vec<DiagnosticsRecord<f64>> = Vec::new();
    let mut next_snapshot = 0;
    let mut steps = 0usize;
    let mut source_cum = 0.0;
    let mut window = 0.0;
    let mut initial_mass = 0.0;
    let mut bounds: Option<BoundsCheck<f64>> = None;
    let mut pending: Option<(Functionals<f64>, f64)> = None;

    let outcome: Result<()> = (|| loop {
        let derived = DerivedFields::compute(&state, &grid, model, cfg.vac_tol, cfg.tol_pos)?;
        let f = Functionals::compute(&state, &derived, model, &grid);
        if let Some((prev, dt)) = pending.take() {
            acc.accumulate(&prev, &f, dt);
        }
        let check = *bounds.get_or_insert_with(|| {
            initial_mass = f.mass1 + f.mass2;
            BoundsCheck::for_run(model, cfg.epsilon, &derived)
        });
        observe(&mut peaks, &f, &state, &derived, &check);
        if check_support {
            let last = grid.cells() - 1;
            if derived.n[0] > cfg.vac_tol || derived.n[last] > cfg.vac_tol {
                return Err(Error::SupportReachedBoundary { t: state.t });
            }
        }

        let finished = state.t >= t_end;
        if steps.is_multiple_of(cfg.output_every) || finished {
            let rec = acc.record(&f);
            if let Some(prev) = records.last() {
                let span = rec.t - prev.t;
                if span > 0.0 {
                    let rate = (rec.energy - prev.energy + rec.dissipation_cum - prev.dissipation_cum) / span;
                    peaks.energy_rate_sup = peaks.energy_rate_sup.max(rate);
                }
            }
            if let Some(s) = sink.as_mut() {
                s.diagnostics.push(&rec)?;
            }
            records.push(rec);
        }
        while next_snapshot < snapshots.len() && snapshots[next_snapshot] <= state.t {
            if let Some(s) = sink.as_ref() {
                let path = s.dir.join(output::snapshot_name(snapshots[next_snapshot]));
                output::write_snapshot(&state, &derived, &grid, &path)?;
            }
            next_snapshot += 1;
        }
        if finished {
            if t_end == 0.0 {
                peaks.residual_window_avg = f.comp_residual;
            }
            return Ok(());
        }

        let mut dt = stable_dt(&state, &derived, &grid, model, &scheme).min(t_end - state.t);
        let target = snapshots.get(next_snapshot).copied().unwrap_or(t_end);
        if target > state.t {
            dt = dt.min(target - state.t);
        }
        pending = Some((f, dt));
        source_cum += dt * f.source;
        let overlap = (state.t + dt - state.t.max(half)).max(0.0);
        window += overlap * f.comp_residual;

        let (mut next, rep) = step(&state, &derived, &grid, model, &scheme, dt)?;
        acc.add_clamped(rep.clamped_mass);
        if acc.clamp_cum > clamp_limit {
            return Err(Error::NumericalFailure {
                t: next.t,
                reason: format!("cumulative clamped mass {:e} exceeds {:e}", acc.clamp_cum, clamp_limit),
            });
        }
        if (target - next.t).abs() <= 1e-12 * t_end.max(1.0) {
            next.t = target;
        }
        state = next;
        steps += 1;
    })();

    if let Some(s) = sink.as_mut() {
        s.diagnostics.flush()?;
        if let Err(e) = &outcome {
            let path = s.dir.join(output::RUN_META_FILE);
            let mut meta = std::fs::read_to_string(&path).map_err(|io| Error::io(&path, io))?;
            let _ = writeln!(meta, "# FAILED at t = {}: {e}", state.t);
            output::write_text(&path, &meta)?;
        }
    }
    outcome?;

    if t_end > 0.0 {
        peaks.residual_window_avg = window / (t_end - half);
    }
    if let Some(s) = sink.as_ref() {
        if cfg.emit_plots {
            output::emit_plot_script(s.dir, &snapshots)?;
        }
    }

    let last = records.last().expect("final record written");
    let final_mass = last.mass1 + last.mass2;
    let mass_balance_residual =
        (final_mass - initial_mass - source_cum - last.clamp_cum).abs() / initial_mass.max(f64::MIN_POSITIVE);
    Ok(RunSummary {
        final_state: state,
        steps,
        records,
        peaks,
        initial_mass,
        source_cum,
        mass_balance_residual,
        audit,
        warnings,
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}

fn observe(
    peaks: &mut Peaks,
    f: &Functionals<f64>,
    state: &SimState<f64>,
    derived: &DerivedFields<f64>,
    check: &BoundsCheck<f64>,
) {
    peaks.max_p = peaks.max_p.max(f.max_p);
    peaks.min_n = peaks.min_n.min(f.min_n);
    peaks.bv_sup = peaks.bv_sup.max(f.bv.total());
    peaks.w_minus_sup = peaks.w_minus_sup.max(f.w_minus_l1);
    peaks.seg_ncc_max = peaks.seg_ncc_max.max(f.seg_ncc);
    peaks.seg_n1n2_max = peaks.seg_n1n2_max.max(f.seg_n1n2);
    let report = bounds_check(state, derived, check);
    peaks.nonneg_violation = peaks.nonneg_violation.max(report.worst(BoundKind::Nonnegativity));
    if check.epsilon > 0.0 {
        peaks.barrier_deficit = peaks.barrier_deficit.max(check.barrier(state.t) - f.min_n);
    }
    if let Some(ph) = check.pressure_ceiling {
        peaks.pressure_excess = peaks.pressure_excess.max(f.max_p - ph);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::{ProfileShape, ProfileSpec, Species};

    fn small() -> RunConfig {
        RunConfig {
            cells: 64,
            t_end: 0.05,
            snapshot_times: vec![0.02],
            output_every: 10,
            ..RunConfig::invasion_preset()
        }
    }

    #[test]
    fn zero_horizon_writes_initial_snapshot_only() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { t_end: 0.0, snapshot_times: vec![], output_dir: dir.path().join("r"), ..small() };
        let sum = run_simulation(&cfg).unwrap();
        assert_eq!(sum.steps, 0);
        assert_eq!(sum.records.len(), 1);
        let names: Vec<String> = std::fs::read_dir(&cfg.output_dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n.starts_with("snapshot"))
            .collect();
        assert_eq!(names, vec!["snapshot_t0.csv".to_string()]);
    }

    #[test]
    fn lands_on_snapshot_times_and_records_final_state() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { output_dir: dir.path().to_path_buf(), ..small() };
        let sum = run_simulation(&cfg).unwrap();
        assert_eq!(sum.final_state.t, 0.05);
        assert_eq!(sum.final_record().t, 0.05);
        for t in ["0", "0.02", "0.05"] {
            assert!(dir.path().join(format!("snapshot_t{t}.csv")).is_file(), "{t}");
        }
        assert!(dir.path().join("plots.gp").is_file());
        let meta = std::fs::read_to_string(dir.path().join("run_meta")).unwrap();
        assert!(meta.contains("physics.gamma = 5.0"));
        let rows = output::read_diagnostics(&dir.path().join("diagnostics.csv")).unwrap();
        assert_eq!(rows.len(), sum.records.len());
        assert_eq!(rows.last().unwrap(), &sum.final_record().values());
    }

    #[test]
    fn cumulative_columns_are_monotone_and_mass_balances() {
        let sum = simulate(&small()).unwrap();
        for w in sum.records.windows(2) {
            assert!(w[1].grad_p_l2_cum >= w[0].grad_p_l2_cum);
            assert!(w[1].gamma_p_absw_cum >= w[0].gamma_p_absw_cum);
            assert!(w[1].dissipation_cum >= w[0].dissipation_cum);
            assert!(w[1].clamp_cum >= w[0].clamp_cum);
        }
        assert!(sum.mass_balance_residual < 1e-12, "{}", sum.mass_balance_residual);
        // Equality at t = 0, strict afterwards.
        assert!(sum.peaks.barrier_deficit <= 1e-15);
    }

    #[test]
    fn support_reaching_boundary_is_reported() {
        // A block touching the boundary region spreads into the edge cells.
        let cfg = RunConfig {
            half_width: 1.0,
            cells: 32,
            t_end: 2.0,
            epsilon: 0.0,
            model: crate::model::GrowthModel::segregated(),
            profiles: vec![ProfileSpec {
                species: Species::One,
                shape: ProfileShape::Indicator { x0: -0.45, x1: 0.45, height: 1.0 },
            }],
            ..small()
        };
        let err = simulate(&cfg).unwrap_err();
        assert!(matches!(err, Error::SupportReachedBoundary { .. }), "{err}");
    }

    #[test]
    fn failure_is_recorded_in_run_meta() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            half_width: 1.0,
            cells: 32,
            t_end: 2.0,
            epsilon: 0.0,
            model: crate::model::GrowthModel::segregated(),
            profiles: vec![ProfileSpec {
                species: Species::One,
                shape: ProfileShape::Indicator { x0: -0.45, x1: 0.45, height: 1.0 },
            }],
            output_dir: dir.path().to_path_buf(),
            ..small()
        };
        assert!(run_simulation(&cfg).is_err());
        let meta = std::fs::read_to_string(dir.path().join("run_meta")).unwrap();
        assert!(meta.contains("FAILED"));
        assert!(!output::read_diagnostics(&dir.path().join("diagnostics.csv")).unwrap().is_empty());
    }
}
