//! Time stepping for the two-species system
//!
//! ```text
//! d_t n_i = d_x(n_i d_x p) + n1 F_i(p) + n2 G_i(p),   p = (n1 + n2)^gamma
//! ```
//!
//! with no-flux boundaries. Two interchangeable schemes are provided:
//!
//! * [`Scheme::Explicit`]: conservative donor-cell upwind for both species
//!   with face velocity `u = -d_x p`, reactions by explicit Euler. Needs the
//!   parabolic restriction `dt ~ dx^2 / (gamma p)`.
//! * [`Scheme::SemiImplicit`]: backward Euler for the total density written
//!   as a porous medium equation `d_t n = gamma/(gamma+1) d_xx n^(gamma+1) + n R`,
//!   solved by damped Newton on the tridiagonal Jacobian, followed by upwind
//!   advection of the population fractions. Only advective and reaction
//!   limits apply to `dt`.

use crate::error::{Error, Result};
use crate::fields::{face_velocity, DerivedFields, SimState, DEFAULT_TOL_POS, DEFAULT_VAC_TOL};
use crate::grid::Grid;
use crate::model::GrowthModel;
use crate::scalar::Scalar;
use std::fmt;
use std::str::FromStr;

/// Maximum number of step halvings in the Newton line search.
const MAX_DAMPING_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Explicit,
    SemiImplicit,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Explicit => "explicit",
            Scheme::SemiImplicit => "semi_implicit",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "explicit" => Ok(Scheme::Explicit),
            "semi_implicit" => Ok(Scheme::SemiImplicit),
            other => Err(format!("unknown scheme `{other}` (expected explicit | semi_implicit)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig<T> {
    pub scheme: Scheme,
    /// Safety factor in `(0, 1]`.
    pub cfl: T,
    pub dt_max: T,
    /// Max-norm residual tolerance for the implicit solve.
    pub newton_tol: T,
    pub newton_max_iter: usize,
    pub vac_tol: T,
    pub tol_pos: T,
}

impl<T: Scalar> Default for SchemeConfig<T> {
    fn default() -> Self {
        Self {
            scheme: Scheme::Explicit,
            cfl: T::lit(0.9),
            dt_max: T::lit(1e-3),
            newton_tol: T::lit(1e-11),
            newton_max_iter: 50,
            vac_tol: T::lit(DEFAULT_VAC_TOL),
            tol_pos: T::lit(DEFAULT_TOL_POS),
        }
    }
}

impl<T: Scalar> SchemeConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > T::zero() && self.cfl <= T::one()) {
            return Err(Error::Domain(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.newton_tol > T::zero()) {
            return Err(Error::Domain("newton_tol must be positive".into()));
        }
        if !(self.dt_max > T::zero()) {
            return Err(Error::Domain("dt_max must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport<T> {
    pub dt_used: T,
    /// Mass removed by clamping roundoff-level negative densities.
    pub clamped_mass: T,
    pub newton_iters: usize,
    pub max_p: T,
    pub min_n: T,
}

/// Shifts both species by `epsilon` everywhere; the result starts at `t = 0`.
pub fn regularise_initial<T: Scalar>(n1: &[T], n2: &[T], gamma: T, epsilon: T) -> Result<SimState<T>> {
    if n1.len() != n2.len() {
        return Err(Error::NegativeInput("species arrays differ in length".into()));
    }
    if !(epsilon >= T::zero()) {
        return Err(Error::NegativeInput(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if let Some((j, v)) = n1.iter().chain(n2).enumerate().find(|(_, v)| !(**v >= T::zero())) {
        return Err(Error::NegativeInput(format!("initial density {v} at entry {j}")));
    }
    Ok(SimState {
        n1: n1.iter().map(|&v| v + epsilon).collect(),
        n2: n2.iter().map(|&v| v + epsilon).collect(),
        t: T::zero(),
        gamma,
        epsilon,
    })
}

fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Largest step allowed by the scheme's stability restriction, capped by `dt_max`.
pub fn stable_dt<T: Scalar>(
    state: &SimState<T>,
    derived: &DerivedFields<T>,
    grid: &Grid<T>,
    model: &GrowthModel<T>,
    cfg: &SchemeConfig<T>,
) -> T {
    let dx = grid.dx();
    let max_u = max_abs(&derived.u);
    let guard = T::min_positive_value();
    match cfg.scheme {
        Scheme::Explicit => {
            let max_p = derived.p.iter().fold(T::zero(), |m, &x| m.max(x));
            let denom = T::two() * state.gamma * max_p + T::two() * dx * max_u + guard;
            cfg.dt_max.min(cfg.cfl * dx * dx / denom)
        }
        Scheme::SemiImplicit => {
            let advective = cfg.cfl * dx / (max_u + guard);
            let reactive = cfg.cfl / (model.rate_bound() + guard);
            cfg.dt_max.min(advective).min(reactive)
        }
    }
}

/// Dispatches to the configured scheme.
pub fn step<T: Scalar>(
    state: &SimState<T>,
    derived: &DerivedFields<T>,
    grid: &Grid<T>,
    model: &GrowthModel<T>,
    cfg: &SchemeConfig<T>,
    dt: T,
) -> Result<(SimState<T>, StepReport<T>)> {
    match cfg.scheme {
        Scheme::Explicit => explicit_step(state, derived, grid, model, cfg, dt),
        Scheme::SemiImplicit => semi_implicit_step(state, derived, grid, model, cfg, dt),
    }
}

/// Steps from `state.t` to exactly `t_end` with the largest stable steps;
/// returns the final state and the step count.
pub fn advance<T: Scalar>(
    state: SimState<T>,
    grid: &Grid<T>,
    model: &GrowthModel<T>,
    cfg: &SchemeConfig<T>,
    t_end: T,
) -> Result<(SimState<T>, usize)> {
    let mut state = state;
    let mut steps = 0;
    while state.t < t_end {
        let derived = DerivedFields::compute(&state, grid, model, cfg.vac_tol, cfg.tol_pos)?;
        let dt = stable_dt(&state, &derived, grid, model, cfg).min(t_end - state.t);
        let (mut next, _) = step(&state, &derived, grid, model, cfg, dt)?;
        if t_end - next.t <= T::lit(1e-12) * t_end.abs().max(T::one()) {
            next.t = t_end;
        }
        state = next;
        steps += 1;
    }
    Ok((state, steps))
}

#[inline]
fn upwind<T: Scalar>(u: T, left: T, right: T) -> T {
    if u > T::zero() {
        left
    } else if u < T::zero() {
        right
    } else {
        T::half() * (left + right)
    }
}

/// One conservative upwind step of size `dt`. `derived` must belong to `state`.
pub fn explicit_step<T: Scalar>(
    state: &SimState<T>,
    derived: &DerivedFields<T>,
    grid: &Grid<T>,
    model: &GrowthModel<T>,
    cfg: &SchemeConfig<T>,
    dt: T,
) -> Result<(SimState<T>, StepReport<T>)> {
    let cells = state.len();
    let lam = dt / grid.dx();
    let (n1, n2) = (&state.n1, &state.n2);
    let u = &derived.u;

    let mut flux1 = vec![T::zero(); cells + 1];
    let mut flux2 = vec![T::zero(); cells + 1];
    for k in 1..cells {
        flux1[k] = u[k] * upwind(u[k], n1[k - 1], n1[k]);
        flux2[k] = u[k] * upwind(u[k], n2[k - 1], n2[k]);
    }

    let mut next1 = Vec::with_capacity(cells);
    let mut next2 = Vec::with_capacity(cells);
    for j in 0..cells {
        let r = model.rates_unchecked(derived.p[j]);
        let src1 = n1[j] * r.f1 + n2[j] * r.g1;
        let src2 = n1[j] * r.f2 + n2[j] * r.g2;
        next1.push(n1[j] - lam * (flux1[j + 1] - flux1[j]) + dt * src1);
        next2.push(n2[j] - lam * (flux2[j + 1] - flux2[j]) + dt * src2);
    }

    let t_new = state.t + dt;
    let mut clamped = T::zero();
    clamp_roundoff(&mut next1, cfg.tol_pos, grid.dx(), t_new, &mut clamped)?;
    clamp_roundoff(&mut next2, cfg.tol_pos, grid.dx(), t_new, &mut clamped)?;

    let next = SimState { n1: next1, n2: next2, t: t_new, gamma: state.gamma, epsilon: state.epsilon };
    let report = summarise(&next, dt, clamped, 0);
    Ok((next, report))
}

/// One semi-implicit step: implicit porous-medium solve for the total
/// density, explicit upwind transport of fractions with the updated velocity.
pub fn semi_implicit_step<T: Scalar>(
    state: &SimState<T>,
    derived: &DerivedFields<T>,
    grid: &Grid<T>,
    model: &GrowthModel<T>,
    cfg: &SchemeConfig<T>,
    dt: T,
) -> Result<(SimState<T>, StepReport<T>)> {
    let cells = state.len();
    let gamma = state.gamma;
    let t_new = state.t + dt;

    let rhs: Vec<T> = (0..cells)
        .map(|j| {
            let (f, g) = model.combined_unchecked(derived.p[j]);
            derived.n[j] + dt * (state.n1[j] * f + state.n2[j] * g)
        })
        .collect();
    let (mut total, newton_iters) = solve_pme(&derived.n, &rhs, gamma, dt, grid, cfg)?;

    let mut clamped = T::zero();
    let implicit_tol = cfg.tol_pos.max(T::lit(10.0) * cfg.newton_tol);
    clamp_roundoff(&mut total, implicit_tol, grid.dx(), t_new, &mut clamped)?;

    let p_new: Vec<T> = total.iter().map(|&m| m.powf(gamma)).collect();
    let u_new = face_velocity(&p_new, grid);
    let lam = dt / grid.dx();
    let (c1, c2) = (&derived.c1, &derived.c2);

    let mut next1 = Vec::with_capacity(cells);
    let mut next2 = Vec::with_capacity(cells);
    for j in 0..cells {
        let transport = |c: &[T]| {
            let mut d = T::zero();
            if j > 0 {
                d = d + u_new[j].pos() * (c[j] - c[j - 1]);
            }
            if j + 1 < cells {
                d = d - u_new[j + 1].neg_part() * (c[j + 1] - c[j]);
            }
            c[j] - lam * d
        };
        let r = model.rates_unchecked(derived.p[j]);
        let (a, b) = (c1[j], c2[j]);
        let react1 = a * r.f1 + b * r.g1 - a * a * r.f - a * b * r.g;
        let react2 = a * r.f2 + b * r.g2 - b * b * r.g - a * b * r.f;
        let mut d1 = (transport(c1) + dt * react1).max(T::zero()).min(T::one());
        let mut d2 = (transport(c2) + dt * react2).max(T::zero()).min(T::one());
        let s = d1 + d2;
        if s > T::zero() {
            d1 = d1 / s;
            d2 = d2 / s;
        } else {
            d1 = T::half();
            d2 = T::half();
        }
        next1.push(d1 * total[j]);
        next2.push(d2 * total[j]);
    }
    check_finite(&next1, t_new)?;
    check_finite(&next2, t_new)?;

    let next = SimState { n1: next1, n2: next2, t: t_new, gamma, epsilon: state.epsilon };
    let report = summarise(&next, dt, clamped, newton_iters);
    Ok((next, report))
}

/// Solves `m - dt a D2(m^(gamma+1)) = rhs`, `a = gamma/(gamma+1)`, with
/// Neumann second differences, by damped Newton starting from `guess`.
fn solve_pme<T: Scalar>(
    guess: &[T],
    rhs: &[T],
    gamma: T,
    dt: T,
    grid: &Grid<T>,
    cfg: &SchemeConfig<T>,
) -> Result<(Vec<T>, usize)> {
    let cells = guess.len();
    let m_exp = gamma + T::one();
    let k = dt * gamma / m_exp / (grid.dx() * grid.dx());

    let residual = |m: &[T], out: &mut Vec<T>| -> T {
        out.clear();
        let phi = |j: usize| m[j].pos().powf(m_exp);
        let mut norm = T::zero();
        for j in 0..cells {
            let lap = if cells == 1 {
                T::zero()
            } else if j == 0 {
                phi(1) - phi(0)
            } else if j == cells - 1 {
                phi(cells - 2) - phi(j)
            } else {
                phi(j + 1) - T::two() * phi(j) + phi(j - 1)
            };
            let r = m[j] - k * lap - rhs[j];
            norm = norm.max(r.abs());
            out.push(r);
        }
        if norm.is_nan() {
            T::infinity()
        } else {
            norm
        }
    };

    let mut m = guess.to_vec();
    let mut res = Vec::with_capacity(cells);
    let mut trial_res = Vec::with_capacity(cells);
    let mut norm = residual(&m, &mut res);
    let mut lower = vec![T::zero(); cells];
    let mut diag = vec![T::zero(); cells];
    let mut upper = vec![T::zero(); cells];
    let mut iters = 0;

    while norm > cfg.newton_tol && iters < cfg.newton_max_iter {
        iters += 1;
        let dphi: Vec<T> = m.iter().map(|&v| m_exp * v.pos().powf(gamma)).collect();
        for j in 0..cells {
            let left = j > 0;
            let right = j + 1 < cells;
            let neighbours = T::from_count(left as usize + right as usize);
            diag[j] = T::one() + k * neighbours * dphi[j];
            lower[j] = if left { -k * dphi[j - 1] } else { T::zero() };
            upper[j] = if right { -k * dphi[j + 1] } else { T::zero() };
        }
        let mut delta: Vec<T> = res.iter().map(|&r| -r).collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut delta);

        let mut scale = T::one();
        let mut trial: Vec<T> = Vec::with_capacity(cells);
        let mut accepted = false;
        for _ in 0..=MAX_DAMPING_HALVINGS {
            trial.clear();
            trial.extend(m.iter().zip(&delta).map(|(&a, &d)| a + scale * d));
            let trial_norm = residual(&trial, &mut trial_res);
            if trial_norm < norm {
                norm = trial_norm;
                accepted = true;
                break;
            }
            scale = scale * T::half();
        }
        if !accepted {
            break;
        }
        std::mem::swap(&mut m, &mut trial);
        std::mem::swap(&mut res, &mut trial_res);
    }

    if norm > cfg.newton_tol {
        return Err(Error::NewtonDivergence { residual: norm.to_f64_lossy(), iterations: iters });
    }
    Ok((m, iters))
}

/// Thomas algorithm; `lower[0]` and `upper[n-1]` are ignored. Overwrites
/// `rhs` with the solution. Intended for diagonally dominant systems.
pub fn solve_tridiagonal<T: Scalar>(lower: &[T], diag: &[T], upper: &[T], rhs: &mut [T]) {
    let n = rhs.len();
    if n == 0 {
        return;
    }
    let mut c_prime = vec![T::zero(); n];
    let mut beta = diag[0];
    rhs[0] = rhs[0] / beta;
    for i in 1..n {
        c_prime[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c_prime[i - 1];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - c_prime[i] * rhs[i + 1];
    }
}

fn check_finite<T: Scalar>(v: &[T], t: T) -> Result<()> {
    if let Some(j) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure { t: t.to_f64_lossy(), reason: format!("non-finite density at cell {j}") });
    }
    Ok(())
}

/// Zeroes entries in `[-tol, 0)`, accumulating the removed mass. Anything
/// more negative, or non-finite, is a numerical failure.
fn clamp_roundoff<T: Scalar>(v: &mut [T], tol: T, dx: T, t: T, clamped: &mut T) -> Result<()> {
    check_finite(v, t)?;
    for (j, x) in v.iter_mut().enumerate() {
        if *x < T::zero() {
            if *x < -tol {
                return Err(Error::NumericalFailure {
                    t: t.to_f64_lossy(),
                    reason: format!("density {} at cell {j} below -{}", *x, tol),
                });
            }
            *clamped = *clamped - *x * dx;
            *x = T::zero();
        }
    }
    Ok(())
}

fn summarise<T: Scalar>(state: &SimState<T>, dt: T, clamped: T, newton_iters: usize) -> StepReport<T> {
    let mut max_n = T::zero();
    let mut min_n = T::infinity();
    for (&a, &b) in state.n1.iter().zip(&state.n2) {
        max_n = max_n.max(a + b);
        min_n = min_n.min(a + b);
    }
    StepReport { dt_used: dt, clamped_mass: clamped, newton_iters, max_p: max_n.powf(state.gamma), min_n }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn derived(s: &SimState<f64>, g: &Grid<f64>, m: &GrowthModel<f64>) -> DerivedFields<f64> {
        DerivedFields::compute(s, g, m, 1e-12, 1e-13).unwrap()
    }

    fn state(n1: Vec<f64>, n2: Vec<f64>, gamma: f64) -> SimState<f64> {
        SimState { n1, n2, t: 0.0, gamma, epsilon: 0.0 }
    }

    #[test]
    fn regularise_examples() {
        let s = regularise_initial(&[0.0, 0.5], &[0.2, 0.0], 5.0, 0.0).unwrap();
        assert_eq!((s.n1, s.n2, s.t), (vec![0.0, 0.5], vec![0.2, 0.0], 0.0));
        let s = regularise_initial(&[0.0; 4], &[0.0; 4], 5.0, 0.01).unwrap();
        assert!(s.total().iter().all(|&v| v == 0.02));
        assert!(matches!(regularise_initial(&[-1.0], &[0.0], 5.0, 0.0), Err(Error::NegativeInput(_))));
        assert!(matches!(regularise_initial(&[1.0], &[0.0], 5.0, -0.1), Err(Error::NegativeInput(_))));
    }

    #[test]
    fn stable_dt_examples() {
        let g = Grid::<f64>::new(1.0, 200).unwrap(); // dx = 0.01
        let m = GrowthModel::zero();
        let mut cfg = SchemeConfig { dt_max: 0.25, ..SchemeConfig::default() };
        let s = state(vec![0.0; 200], vec![0.0; 200], 5.0);
        assert_eq!(stable_dt(&s, &derived(&s, &g, &m), &g, &m, &cfg), 0.25);

        // Uniform pressure 3: u = 0, dt = 0.9 * 1e-4 / 30.
        cfg.dt_max = 1e9;
        let n = 3.0_f64.powf(1.0 / 5.0);
        let s = state(vec![n; 200], vec![0.0; 200], 5.0);
        let dt = stable_dt(&s, &derived(&s, &g, &m), &g, &m, &cfg);
        assert!((dt - 3e-6).abs() < 1e-18, "{dt}");

        // Doubling gamma at a fixed pressure field halves the step.
        let mut d = derived(&s, &g, &m);
        let s10 = SimState { gamma: 10.0, ..s.clone() };
        d.p = vec![3.0; 200];
        let dt10 = stable_dt(&s10, &d, &g, &m, &cfg);
        assert!((dt / dt10 - 2.0).abs() < 1e-12);

        // Semi-implicit drops the diffusive limit.
        cfg.scheme = Scheme::SemiImplicit;
        let dt_b = stable_dt(&s, &derived(&s, &g, &m), &g, &m, &cfg);
        assert_eq!(dt_b, 1e9);
    }

    #[test]
    fn uniform_state_is_one_euler_step_of_the_ode() {
        let g = Grid::<f64>::new(1.0, 16).unwrap();
        let m = GrowthModel::invasion();
        let cfg = SchemeConfig::default();
        let s = state(vec![0.2; 16], vec![0.3; 16], 5.0);
        let d = derived(&s, &g, &m);
        let dt = 1e-3;
        let (next, rep) = explicit_step(&s, &d, &g, &m, &cfg, dt).unwrap();
        let p = 0.5_f64.powi(5);
        let r = m.eval_rates(p).unwrap();
        let e1 = 0.2 + dt * (0.2 * r.f1 + 0.3 * r.g1);
        let e2 = 0.3 + dt * (0.2 * r.f2 + 0.3 * r.g2);
        assert!(next.n1.iter().all(|&v| (v - e1).abs() < 1e-15));
        assert!(next.n2.iter().all(|&v| (v - e2).abs() < 1e-15));
        assert_eq!(rep.dt_used, dt);
        assert_eq!(next.t, dt);
    }

    #[test]
    fn zero_model_conserves_mass_per_step() {
        let g = Grid::<f64>::new(2.0, 100).unwrap();
        let m = GrowthModel::zero();
        let cfg = SchemeConfig::default();
        let bump: Vec<f64> = g.centers().iter().map(|x| (1.0 - x * x).max(0.0)).collect();
        let s = state(bump.clone(), bump.iter().map(|v| 0.5 * v).collect(), 3.0);
        let d = derived(&s, &g, &m);
        let dt = stable_dt(&s, &d, &g, &m, &cfg);
        let (next, _) = explicit_step(&s, &d, &g, &m, &cfg, dt).unwrap();
        let before = g.integrate(&s.total());
        let after = g.integrate(&next.total());
        assert!((after - before).abs() < 1e-14, "{before} {after}");
    }

    #[test]
    fn explicit_step_mass_identity_with_reactions() {
        let g = Grid::<f64>::new(2.0, 80).unwrap();
        let m = GrowthModel::invasion();
        let cfg = SchemeConfig::default();
        let n1: Vec<f64> = g.centers().iter().map(|x| 0.6 * (1.0 - (x + 0.3).powi(2)).max(0.0)).collect();
        let n2: Vec<f64> = g.centers().iter().map(|x| 0.5 * (1.0 - (x - 0.4).powi(2)).max(0.0)).collect();
        let s = state(n1, n2, 5.0);
        let d = derived(&s, &g, &m);
        let dt = stable_dt(&s, &d, &g, &m, &cfg);
        let (next, _) = explicit_step(&s, &d, &g, &m, &cfg, dt).unwrap();
        let source: Vec<f64> = (0..80)
            .map(|j| {
                let r = m.eval_rates(d.p[j]).unwrap();
                s.n1[j] * r.f + s.n2[j] * r.g
            })
            .collect();
        let expected = g.integrate(&s.total()) + dt * g.integrate(&source);
        assert!((g.integrate(&next.total()) - expected).abs() < 1e-14);
    }

    #[test]
    fn semi_implicit_fixed_point_for_uniform_state() {
        let g = Grid::<f64>::new(1.0, 20).unwrap();
        let m = GrowthModel::zero();
        let cfg = SchemeConfig { scheme: Scheme::SemiImplicit, ..SchemeConfig::default() };
        let s = state(vec![0.4; 20], vec![0.6; 20], 5.0);
        let d = derived(&s, &g, &m);
        let (next, rep) = semi_implicit_step(&s, &d, &g, &m, &cfg, 0.01).unwrap();
        assert!(next.n1.iter().all(|&v| (v - 0.4).abs() < 1e-14));
        assert!(next.n2.iter().all(|&v| (v - 0.6).abs() < 1e-14));
        assert_eq!(rep.newton_iters, 0);
    }

    fn one_step_gap(s: &SimState<f64>, g: &Grid<f64>, m: &GrowthModel<f64>, dt: f64) -> Vec<f64> {
        let cfg = SchemeConfig::default();
        let d = derived(s, g, m);
        let (a, _) = explicit_step(s, &d, g, m, &cfg, dt).unwrap();
        let cfg_b = SchemeConfig { scheme: Scheme::SemiImplicit, newton_tol: 1e-14, ..cfg };
        let (b, _) = semi_implicit_step(s, &d, g, m, &cfg_b, dt).unwrap();
        a.n1.iter().chain(&a.n2).zip(b.n1.iter().chain(&b.n2)).map(|(x, y)| x - y).collect()
    }

    fn max_norm(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn schemes_agree_to_second_order_on_uniform_data() {
        let g = Grid::<f64>::new(1.0, 16).unwrap();
        let m = GrowthModel::invasion();
        let s = state(vec![0.35; 16], vec![0.25; 16], 5.0);
        let (e1, e2) = (max_norm(&one_step_gap(&s, &g, &m, 0.02)), max_norm(&one_step_gap(&s, &g, &m, 0.01)));
        let ratio = e1 / e2;
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn one_step_gap_is_linear_in_dt_plus_second_order() {
        // On nonuniform data the two spatial operators differ at O(dx), so the
        // gap is c dt + O(dt^2); Richardson elimination exposes the dt^2 part.
        let g = Grid::<f64>::new(2.0, 60).unwrap();
        let m = GrowthModel::invasion();
        let bump = |c: f64, h: f64| -> Vec<f64> {
            g.centers().iter().map(|x| 0.1 + h * (-(x - c) * (x - c) * 2.0).exp()).collect()
        };
        let s = state(bump(-0.3, 0.4), bump(0.4, 0.3), 3.0);
        let d = derived(&s, &g, &m);
        let dt0 = 0.5 * stable_dt(&s, &d, &g, &m, &SchemeConfig::default());
        let rich = |dt: f64| {
            let a = one_step_gap(&s, &g, &m, dt);
            let b = one_step_gap(&s, &g, &m, dt / 2.0);
            max_norm(&a.iter().zip(&b).map(|(x, y)| x - 2.0 * y).collect::<Vec<_>>())
        };
        let ratio = rich(dt0) / rich(dt0 / 2.0);
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn semi_implicit_conserves_mass_without_reactions() {
        let g = Grid::<f64>::new(2.0, 50).unwrap();
        let m = GrowthModel::zero();
        let cfg = SchemeConfig { scheme: Scheme::SemiImplicit, ..SchemeConfig::default() };
        let n1: Vec<f64> = g.centers().iter().map(|x| 0.01 + (1.0 - x * x).max(0.0)).collect();
        let s = state(n1, vec![0.01; 50], 8.0);
        let d = derived(&s, &g, &m);
        let (next, rep) = semi_implicit_step(&s, &d, &g, &m, &cfg, 0.01).unwrap();
        assert!(rep.newton_iters > 0);
        let (a, b) = (g.integrate(&s.total()), g.integrate(&next.total()));
        assert!((a - b).abs() < 1e-9, "{a} {b}");
        assert!(next.n1.iter().chain(&next.n2).all(|&v| v >= 0.0));
    }

    #[test]
    fn newton_divergence_reported() {
        let g = Grid::<f64>::new(1.0, 20).unwrap();
        let m = GrowthModel::zero();
        let cfg = SchemeConfig {
            scheme: Scheme::SemiImplicit,
            newton_max_iter: 1,
            newton_tol: 1e-300,
            ..SchemeConfig::default()
        };
        let n1: Vec<f64> = g.centers().iter().map(|x| (1.0 - x * x).max(0.0)).collect();
        let s = state(n1, vec![0.0; 20], 4.0);
        let d = derived(&s, &g, &m);
        let r = semi_implicit_step(&s, &d, &g, &m, &cfg, 0.05);
        assert!(matches!(r, Err(Error::NewtonDivergence { iterations: 1, .. })));
    }

    #[test]
    fn clamping_rules() {
        let mut clamped = 0.0_f64;
        let mut v = vec![1.0, -5e-14, 0.0];
        clamp_roundoff(&mut v, 1e-13, 0.5, 0.0, &mut clamped).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
        assert!((clamped - 2.5e-14).abs() < 1e-28);
        let mut bad = vec![-1e-3];
        assert!(matches!(clamp_roundoff(&mut bad, 1e-13, 0.5, 0.0, &mut clamped), Err(Error::NumericalFailure { .. })));
        let mut nan = vec![f64::NAN];
        assert!(clamp_roundoff(&mut nan, 1e-13, 0.5, 0.0, &mut clamped).is_err());
    }

    #[test]
    fn tridiagonal_matches_dense_solution() {
        let lower = [0.0, -1.0, -0.5, -1.0];
        let diag = [4.0, 4.0, 3.0, 5.0];
        let upper = [-1.0, -2.0, -1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut rhs: Vec<f64> = (0..4)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i] * x[i - 1];
                }
                if i < 3 {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
        for i in 0..4 {
            assert!((rhs[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [Scheme::Explicit, Scheme::SemiImplicit] {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        }
        assert!("implicit".parse::<Scheme>().is_err());
    }
}
