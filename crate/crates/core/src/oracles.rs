//! Reference solutions: the Barenblatt profile of the reaction-free total
//! density and a fine Runge-Kutta integration of spatially uniform states.

use crate::error::{Error, Result};
use crate::fields::{DerivedFields, SimState};
use crate::grid::Grid;
use crate::model::GrowthModel;
use crate::solver::{advance, stable_dt, step, SchemeConfig};
use statrs::function::beta::beta;

/// Source-type solution of `d_t n = a d_xx n^m`, `m = gamma + 1`,
/// `a = gamma / (gamma + 1)`, evaluated at `t + t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarenblattSpec {
    gamma: f64,
    mass: f64,
    t0: f64,
    /// Height constant fixed by the mass.
    c: f64,
}

pub const DEFAULT_T0: f64 = 0.05;

impl BarenblattSpec {
    pub fn new(gamma: f64, mass: f64, t0: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(Error::Domain(format!("gamma must exceed 1, got {gamma}")));
        }
        if !(mass > 0.0) || !(t0 > 0.0) {
            return Err(Error::Domain(format!("need mass > 0 and t0 > 0, got {mass}, {t0}")));
        }
        let q = 1.0 / gamma;
        let k = Self::k_of(gamma);
        // mass = C^(q + 1/2) k^(-1/2) B(1/2, q + 1)
        let c = (mass * k.sqrt() / beta(0.5, q + 1.0)).powf(1.0 / (q + 0.5));
        Ok(Self { gamma, mass, t0, c })
    }

    fn k_of(gamma: f64) -> f64 {
        let m = gamma + 1.0;
        (m - 1.0) / (2.0 * m * (m + 1.0))
    }

    fn alpha(&self) -> f64 {
        1.0 / (self.gamma + 2.0)
    }

    fn tau(&self, t: f64) -> Result<f64> {
        let s = t + self.t0;
        if !(s > 0.0) {
            return Err(Error::Domain(format!("t + t0 must be positive, got {s}")));
        }
        Ok(self.gamma / (self.gamma + 1.0) * s)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn support_radius(&self, t: f64) -> Result<f64> {
        let tau = self.tau(t)?;
        Ok((self.c / Self::k_of(self.gamma)).sqrt() * tau.powf(self.alpha()))
    }

    pub fn profile(&self, t: f64, x: f64) -> Result<f64> {
        let tau = self.tau(t)?;
        let scale = tau.powf(-self.alpha());
        let xi = x * scale;
        let base = (self.c - Self::k_of(self.gamma) * xi * xi).max(0.0);
        Ok(scale * base.powf(1.0 / self.gamma))
    }

    /// Exact cell averages at time `t`; the root singularity at the front
    /// is removed by substituting `x = R - s^2` in edge cells.
    pub fn cell_averages(&self, grid: &Grid<f64>, t: f64) -> Result<Vec<f64>> {
        let r = self.support_radius(t)?;
        let f = |x: f64| self.profile(t, x).expect("time already checked");
        let dx = grid.dx();
        Ok((0..grid.cells())
            .map(|j| {
                let lo = grid.face(j).max(-r);
                let hi = grid.face(j + 1).min(r);
                if hi <= lo {
                    return 0.0;
                }
                integrate_with_edges(&f, lo, hi, -r, r) / dx
            })
            .collect())
    }
}

const GAUSS_NODES: [f64; 5] =
    [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GAUSS_WEIGHTS: [f64; 5] =
    [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

fn gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (lo, mid) = (a + i as f64 * h, 0.5 * h);
            GAUSS_NODES.iter().zip(GAUSS_WEIGHTS).map(|(&z, w)| w * f(lo + mid * (1.0 + z))).sum::<f64>() * mid
        })
        .sum()
}

fn integrate_with_edges(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, left: f64, right: f64) -> f64 {
    let at_left = lo == left;
    let at_right = hi == right;
    if at_left && at_right {
        let mid = 0.5 * (lo + hi);
        return integrate_with_edges(f, lo, mid, left, right) + integrate_with_edges(f, mid, hi, left, right);
    }
    if at_right {
        let g = |s: f64| 2.0 * s * f(right - s * s);
        gauss(&g, 0.0, (right - lo).sqrt(), 4)
    } else if at_left {
        let g = |s: f64| 2.0 * s * f(left + s * s);
        gauss(&g, 0.0, (hi - left).sqrt(), 4)
    } else {
        gauss(f, lo, hi, 2)
    }
}

/// Dense output of a spatially uniform run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub n1: Vec<f64>,
    pub n2: Vec<f64>,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        self.dt * (self.n1.len() - 1) as f64
    }

    /// Linear interpolation between stored steps.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let s = (t / self.dt).clamp(0.0, (self.n1.len() - 1) as f64);
        let k = (s.floor() as usize).min(self.n1.len() - 2);
        let th = s - k as f64;
        ((1.0 - th) * self.n1[k] + th * self.n1[k + 1], (1.0 - th) * self.n2[k] + th * self.n2[k + 1])
    }
}

pub const DEFAULT_ODE_DT: f64 = 1e-5;

/// Classical RK4 for `n1' = n1 F1 + n2 G1`, `n2' = n1 F2 + n2 G2`.
pub fn uniform_ode_reference(
    n1_0: f64,
    n2_0: f64,
    gamma: f64,
    model: &GrowthModel<f64>,
    t_end: f64,
    dt_ode: f64,
) -> Result<Trajectory> {
    if !(n1_0 >= 0.0 && n2_0 >= 0.0) {
        return Err(Error::NegativeInput(format!("initial values {n1_0}, {n2_0}")));
    }
    if !(gamma > 1.0) || !(dt_ode > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Domain(format!("bad ODE parameters gamma={gamma} dt={dt_ode} T={t_end}")));
    }
    let rhs = |a: f64, b: f64| {
        let p = (a + b).max(0.0).powf(gamma);
        let r = model.rates_unchecked(p);
        (a * r.f1 + b * r.g1, a * r.f2 + b * r.g2)
    };
    let ph = model.homeostatic_pressure();
    let ceiling = (ph > 0.0).then(|| 10.0 * ph.powf(1.0 / gamma));
    let steps = (t_end / dt_ode).round().max(1.0) as usize;
    let dt = if t_end > 0.0 { t_end / steps as f64 } else { dt_ode };
    let mut n1 = Vec::with_capacity(steps + 1);
    let mut n2 = Vec::with_capacity(steps + 1);
    let (mut a, mut b) = (n1_0, n2_0);
    n1.push(a);
    n2.push(b);
    for k in 0..steps {
        let (k1a, k1b) = rhs(a, b);
        let (k2a, k2b) = rhs(a + 0.5 * dt * k1a, b + 0.5 * dt * k1b);
        let (k3a, k3b) = rhs(a + 0.5 * dt * k2a, b + 0.5 * dt * k2b);
        let (k4a, k4b) = rhs(a + dt * k3a, b + dt * k3b);
        a += dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        b += dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        if !a.is_finite() || !b.is_finite() || ceiling.is_some_and(|c| a > c || b > c) {
            return Err(Error::Domain(format!("uniform ODE blew up at t = {}", (k + 1) as f64 * dt)));
        }
        n1.push(a);
        n2.push(b);
    }
    Ok(Trajectory { dt, n1, n2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub cells: Vec<usize>,
    pub errors: Vec<f64>,
    /// `log(e_i / e_{i+1}) / log(N_{i+1} / N_i)`.
    pub orders: Vec<f64>,
}

impl ConvergenceReport {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// L1 error of the reaction-free solver against the Barenblatt profile at
/// `t_end` on each grid, starting from exact cell averages at `t = 0`.
pub fn convergence_study(
    cfg: &SchemeConfig<f64>,
    spec: &BarenblattSpec,
    half_width: f64,
    cells: &[usize],
    t_end: f64,
) -> Result<ConvergenceReport> {
    if cells.len() < 2 {
        return Err(Error::InsufficientRows { required: 2, available: cells.len() });
    }
    let model = GrowthModel::zero();
    let mut errors = Vec::with_capacity(cells.len());
    for &n in cells {
        let grid = Grid::new(half_width, n)?;
        let init = spec.cell_averages(&grid, 0.0)?;
        let state = SimState { n1: init, n2: vec![0.0; n], t: 0.0, gamma: spec.gamma(), epsilon: 0.0 };
        let (end, _) = advance(state, &grid, &model, cfg, t_end)?;
        let exact = spec.cell_averages(&grid, t_end)?;
        let err = grid.dx() * (0..n).map(|j| (end.n1[j] + end.n2[j] - exact[j]).abs()).sum::<f64>();
        errors.push(err);
    }
    let orders = errors
        .windows(2)
        .zip(cells.windows(2))
        .map(|(e, c)| (e[0] / e[1]).ln() / (c[1] as f64 / c[0] as f64).ln())
        .collect();
    Ok(ConvergenceReport { cells: cells.to_vec(), errors, orders })
}

/// Largest relative deviation, over every step and cell, between a
/// spatially uniform run and the ODE reference.
#[allow(clippy::too_many_arguments)]
pub fn uniform_agreement(
    cfg: &SchemeConfig<f64>,
    model: &GrowthModel<f64>,
    gamma: f64,
    n1_0: f64,
    n2_0: f64,
    cells: usize,
    t_end: f64,
    dt_ode: f64,
) -> Result<f64> {
    let reference = uniform_ode_reference(n1_0, n2_0, gamma, model, t_end, dt_ode)?;
    let grid = Grid::new(1.0, cells)?;
    let mut state = SimState { n1: vec![n1_0; cells], n2: vec![n2_0; cells], t: 0.0, gamma, epsilon: 0.0 };
    let rel = |num: f64, exact: f64| (num - exact).abs() / exact.abs().max(f64::MIN_POSITIVE);
    let mut worst = 0.0_f64;
    while state.t < t_end {
        let derived = DerivedFields::compute(&state, &grid, model, cfg.vac_tol, cfg.tol_pos)?;
        let dt = stable_dt(&state, &derived, &grid, model, cfg).min(t_end - state.t);
        let (next, _) = step(&state, &derived, &grid, model, cfg, dt)?;
        state = next;
        let (a, b) = reference.at(state.t);
        for j in 0..cells {
            worst = worst.max(rel(state.n1[j], a)).max(rel(state.n2[j], b));
        }
    }
    Ok(worst)
}

pub const BARENBLATT_CELLS: [usize; 3] = [100, 200, 400];
pub const MIN_OBSERVED_ORDER: f64 = 0.8;
pub const UNIFORM_REL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleCase {
    Barenblatt,
    UniformOde,
    All,
}

impl std::str::FromStr for OracleCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "barenblatt" => Ok(Self::Barenblatt),
            "uniform" | "ode" => Ok(Self::UniformOde),
            "all" => Ok(Self::All),
            other => Err(Error::Config(vec![crate::error::ConfigIssue::general(format!(
                "unknown oracle case `{other}` (expected barenblatt, uniform or all)"
            ))])),
        }
    }
}

/// One line of `oracle.csv`. For the uniform case the error column holds the
/// maximal relative deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub case: &'static str,
    pub grid_n: usize,
    pub error: f64,
    pub observed_order: Option<f64>,
    pub pass: bool,
}

/// Barenblatt (gamma = 2, unit mass, L = 2, T = 0.5) and uniform ODE
/// (invasion model, gamma = 5, densities 0.2 each, T = 1) checks.
pub fn run_oracles(case: OracleCase) -> Result<Vec<OracleRow>> {
    let mut rows = Vec::new();
    if matches!(case, OracleCase::Barenblatt | OracleCase::All) {
        let spec = BarenblattSpec::new(2.0, 1.0, DEFAULT_T0)?;
        let report = convergence_study(&SchemeConfig::default(), &spec, 2.0, &BARENBLATT_CELLS, 0.5)?;
        let pass = report.min_order() >= MIN_OBSERVED_ORDER;
        for (i, (&n, &e)) in report.cells.iter().zip(&report.errors).enumerate() {
            let observed_order = i.checked_sub(1).map(|k| report.orders[k]);
            rows.push(OracleRow { case: "barenblatt", grid_n: n, error: e, observed_order, pass });
        }
    }
    if matches!(case, OracleCase::UniformOde | OracleCase::All) {
        let cfg = SchemeConfig { dt_max: 1e-4, ..SchemeConfig::default() };
        let err = uniform_agreement(&cfg, &GrowthModel::invasion(), 5.0, 0.2, 0.2, 16, 1.0, DEFAULT_ODE_DT)?;
        rows.push(OracleRow {
            case: "uniform_ode",
            grid_n: 16,
            error: err,
            observed_order: None,
            pass: err <= UNIFORM_REL_TOL,
        });
    }
    Ok(rows)
}

pub fn write_oracle_csv(rows: &[OracleRow], path: &std::path::Path) -> Result<()> {
    let mut s = String::from("case,grid_N,error_L1,observed_order,pass\n");
    for r in rows {
        let order = r.observed_order.map(crate::output::fmt_f64).unwrap_or_default();
        s.push_str(&format!("{},{},{},{order},{}\n", r.case, r.grid_n, crate::output::fmt_f64(r.error), r.pass));
    }
    crate::output::write_text(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mass_is_invariant() {
        let spec = BarenblattSpec::new(2.0, 1.0, 0.05).unwrap();
        for t in [0.0, 0.2, 0.5] {
            // Plain midpoint sums on a very fine grid, independent of the
            // edge-aware quadrature.
            let n = 200_000;
            let l = 2.0;
            let h = 2.0 * l / n as f64;
            let m: f64 = (0..n).map(|j| spec.profile(t, -l + (j as f64 + 0.5) * h).unwrap()).sum::<f64>() * h;
            assert!((m - 1.0).abs() < 1e-6, "t={t} mass={m}");
            let g = Grid::new(l, 97).unwrap();
            assert!((g.integrate(&spec.cell_averages(&g, t).unwrap()) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn support_scaling_and_symmetry() {
        let spec = BarenblattSpec::new(3.0, 0.7, 0.05).unwrap();
        let r0 = spec.support_radius(0.0).unwrap();
        let r1 = spec.support_radius(0.45).unwrap();
        let expected = (0.5_f64 / 0.05).powf(1.0 / 5.0);
        assert!((r1 / r0 - expected).abs() < 1e-12);
        assert_eq!(spec.profile(0.3, r1 * 1.0001).unwrap(), 0.0);
        for x in [0.0, 0.1, 0.37, 0.8] {
            assert_eq!(spec.profile(0.2, x).unwrap(), spec.profile(0.2, -x).unwrap());
        }
        assert!(matches!(spec.profile(-0.05, 0.0), Err(Error::Domain(_))));
        assert!(BarenblattSpec::new(2.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn reference_values() {
        let spec = BarenblattSpec::new(2.0, 1.0, 0.05).unwrap();
        // gamma = 2: m = 3, k = 1/12, B(1/2, 3/2) = pi/2, tau = (2/3)(0.55).
        let c = (1.0 / 12.0_f64).sqrt() / std::f64::consts::FRAC_PI_2;
        let tau = 2.0 / 3.0 * 0.55_f64;
        let peak = spec.profile(0.5, 0.0).unwrap();
        let r = spec.support_radius(0.5).unwrap();
        assert!((peak - tau.powf(-0.25) * c.sqrt()).abs() < 1e-12, "{peak}");
        assert!((r - (12.0 * c).sqrt() * tau.powf(0.25)).abs() < 1e-12, "{r}");
        assert!((r - 1.156).abs() < 1e-3);
    }

    #[test]
    fn satisfies_the_pde_away_from_the_front() {
        // Centred differences in t and x of n_t - a (n^m)_xx.
        let gamma = 2.0;
        let spec = BarenblattSpec::new(gamma, 1.0, 0.05).unwrap();
        let a = gamma / (gamma + 1.0);
        let t = 0.3;
        let r = spec.support_radius(t).unwrap();
        let res = |h: f64| {
            let n = |t: f64, x: f64| spec.profile(t, x).unwrap();
            let nm = |x: f64| n(t, x).powf(gamma + 1.0);
            (0..20)
                .map(|i| {
                    let x = -0.7 * r + 1.4 * r * i as f64 / 19.0;
                    let nt = (n(t + h, x) - n(t - h, x)) / (2.0 * h);
                    let lap = (nm(x + h) - 2.0 * nm(x) + nm(x - h)) / (h * h);
                    (nt - a * lap).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (res(1e-3), res(5e-4));
        assert!(e1 < 1e-3, "{e1}");
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn ode_trivial_cases() {
        let tr = uniform_ode_reference(0.3, 0.4, 5.0, &GrowthModel::zero(), 0.1, 1e-3).unwrap();
        assert!(tr.n1.iter().all(|&v| v == 0.3) && tr.n2.iter().all(|&v| v == 0.4));
        let tr = uniform_ode_reference(0.0, 0.0, 5.0, &GrowthModel::invasion(), 0.1, 1e-3).unwrap();
        assert!(tr.n1.iter().chain(&tr.n2).all(|&v| v == 0.0));
        assert!(uniform_ode_reference(-0.1, 0.0, 5.0, &GrowthModel::invasion(), 0.1, 1e-3).is_err());
    }

    #[test]
    fn ode_is_self_consistent_and_relaxes() {
        let m = GrowthModel::invasion();
        let a = uniform_ode_reference(0.2, 0.2, 5.0, &m, 1.0, 1e-5).unwrap();
        let b = uniform_ode_reference(0.2, 0.2, 5.0, &m, 1.0, 5e-6).unwrap();
        let (x, y) = a.at(1.0);
        let (u, v) = b.at(1.0);
        assert!((x - u).abs() < 1e-12 && (y - v).abs() < 1e-12);
        // Long run approaches R = 0 with total density at most P_H^(1/gamma).
        let long = uniform_ode_reference(0.2, 0.2, 5.0, &m, 40.0, 1e-3).unwrap();
        let (p, q) = long.at(40.0);
        let n = p + q;
        let r = m.eval_rates(n.powf(5.0)).unwrap();
        assert!((p / n * r.f + q / n * r.g).abs() < 1e-3);
        assert!(n <= 3.0_f64.powf(0.2) + 1e-9);
    }

    #[test]
    fn ode_matches_closed_form_logistic() {
        // Single species, F1 = 1 - p/b with gamma: n' = n (1 - n^g / b).
        // Compare with a very fine explicit Euler integration.
        let m = GrowthModel::new(
            crate::model::GrowthTerm::affine(1.0, 2.0).unwrap(),
            crate::model::GrowthTerm::Zero,
            crate::model::GrowthTerm::Zero,
            crate::model::GrowthTerm::affine(1.0, 2.0).unwrap(),
        )
        .unwrap();
        let tr = uniform_ode_reference(0.1, 0.0, 3.0, &m, 1.0, 1e-4).unwrap();
        let mut n = 0.1_f64;
        let h = 1e-7;
        for _ in 0..10_000_000 {
            n += h * n * (1.0 - n.powi(3) / 2.0);
        }
        assert!((tr.at(1.0).0 - n).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ode_stays_below_homeostatic_density(a in 0.0_f64..0.6, b in 0.0_f64..0.6, gamma in 2.0_f64..20.0) {
            prop_assume!((a + b).powf(gamma) <= 3.0);
            let m = GrowthModel::invasion();
            let tr = uniform_ode_reference(a, b, gamma, &m, 3.0, 1e-3).unwrap();
            let cap = 3.0_f64.powf(1.0 / gamma) + 1e-9;
            prop_assert!(tr.n1.iter().zip(&tr.n2).all(|(x, y)| x + y <= cap && *x >= 0.0 && *y >= 0.0));
        }
    }

    #[test]
    fn oracle_case_names_and_csv() {
        assert_eq!("all".parse::<OracleCase>().unwrap(), OracleCase::All);
        assert!(matches!("nope".parse::<OracleCase>(), Err(Error::Config(_))));
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            OracleRow { case: "barenblatt", grid_n: 100, error: 0.5, observed_order: None, pass: true },
            OracleRow { case: "barenblatt", grid_n: 200, error: 0.25, observed_order: Some(1.0), pass: true },
        ];
        let path = dir.path().join("oracle.csv");
        write_oracle_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "case,grid_N,error_L1,observed_order,pass");
        assert_eq!(lines[1].split(',').nth(3), Some(""));
        assert!(lines[2].ends_with(",true"));
    }

    #[test]
    fn uniform_run_tracks_ode_on_short_horizon() {
        let cfg = SchemeConfig { dt_max: 1e-4, ..SchemeConfig::default() };
        let err = uniform_agreement(&cfg, &GrowthModel::invasion(), 5.0, 0.2, 0.2, 16, 0.1, DEFAULT_ODE_DT).unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
