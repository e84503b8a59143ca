//! Estimate functionals evaluated along a run.
//!
//! Instantaneous quantities are gathered in [`Functionals`]; time integrals
//! (`int_0^t ...`) are accumulated by [`Accumulator`] with left-endpoint
//! quadrature using each step's `dt`.

use crate::fields::{DerivedFields, SimState};
use crate::grid::{total_variation, Grid};
use crate::model::GrowthModel;
use crate::scalar::Scalar;
use std::fmt;

/// `int |p_x|^2` over interior faces.
pub fn estimate_grad_p_sq<T: Scalar>(derived: &DerivedFields<T>, grid: &Grid<T>) -> T {
    grid.dx() * derived.u.iter().map(|&v| v * v).sum::<T>()
}

/// Total variation of the two densities and the two fractions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BvTotals<T> {
    pub c1: T,
    pub c2: T,
    pub n1: T,
    pub n2: T,
}

impl<T: Scalar> BvTotals<T> {
    pub fn total(&self) -> T {
        self.c1 + self.c2 + self.n1 + self.n2
    }
}

pub fn estimate_bv<T: Scalar>(n1: &[T], n2: &[T], c1: &[T], c2: &[T]) -> BvTotals<T> {
    BvTotals { c1: total_variation(c1), c2: total_variation(c2), n1: total_variation(n1), n2: total_variation(n2) }
}

/// `(int p |w|, int (w)_-)`; the caller scales the first by `gamma dt`.
pub fn estimate_w_pair<T: Scalar>(derived: &DerivedFields<T>, grid: &Grid<T>) -> (T, T) {
    let p_absw = derived.p.iter().zip(&derived.w).map(|(&p, &w)| p * w.abs()).sum::<T>();
    let w_minus = derived.w.iter().map(|&w| w.neg_part()).sum::<T>();
    (grid.dx() * p_absw, grid.dx() * w_minus)
}

/// `(max |p_x|, int |p_xx|)`.
pub fn corollary_norms<T: Scalar>(derived: &DerivedFields<T>, grid: &Grid<T>) -> (T, T) {
    let px = derived.u.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let pxx = grid.dx() * derived.pxx.iter().map(|v| v.abs()).sum::<T>();
    (px, pxx)
}

/// Energy `E = int (|p_x|^2 / 2 - c1 H1(p) - c2 H2(p))` and dissipation
/// rate `D = gamma int p w^2`.
pub fn energy_and_dissipation<T: Scalar>(
    derived: &DerivedFields<T>,
    model: &GrowthModel<T>,
    grid: &Grid<T>,
    gamma: T,
) -> (T, T) {
    let potential = (0..derived.p.len())
        .map(|j| {
            let (h1, h2) = model.antiderivatives_unchecked(derived.p[j]);
            derived.c1[j] * h1 + derived.c2[j] * h2
        })
        .sum::<T>();
    let energy = T::half() * estimate_grad_p_sq(derived, grid) - grid.dx() * potential;
    let dissipation = gamma * grid.dx() * derived.p.iter().zip(&derived.w).map(|(&p, &w)| p * w * w).sum::<T>();
    (energy, dissipation)
}

/// `int p |p_xx + n1 F(p) + n2 G(p)|`.
pub fn complementarity_residual<T: Scalar>(
    state: &SimState<T>,
    derived: &DerivedFields<T>,
    model: &GrowthModel<T>,
    grid: &Grid<T>,
) -> T {
    let sum = (0..derived.p.len())
        .map(|j| {
            let p = derived.p[j];
            let (f, g) = model.combined_unchecked(p);
            p * (derived.pxx[j] + state.n1[j] * f + state.n2[j] * g).abs()
        })
        .sum::<T>();
    grid.dx() * sum
}

/// `(int n c1 c2, int n1 n2)`.
pub fn segregation_indicators<T: Scalar>(state: &SimState<T>, derived: &DerivedFields<T>, grid: &Grid<T>) -> (T, T) {
    let ncc = (0..derived.n.len()).map(|j| derived.n[j] * derived.c1[j] * derived.c2[j]).sum::<T>();
    let n1n2 = state.n1.iter().zip(&state.n2).map(|(&a, &b)| a * b).sum::<T>();
    (grid.dx() * ncc, grid.dx() * n1n2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// `n_i >= 0`.
    Nonnegativity,
    /// `n >= 2 eps exp(-R_inf t)` (only with `eps > 0`).
    LowerBarrier,
    /// `p <= P_H` (only when it held initially).
    PressureCeiling,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::Nonnegativity => "nonnegativity",
            BoundKind::LowerBarrier => "lower-barrier",
            BoundKind::PressureCeiling => "pressure-ceiling",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation<T> {
    pub kind: BoundKind,
    pub cell: usize,
    pub magnitude: T,
}

/// Which barriers apply to a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsCheck<T> {
    pub epsilon: T,
    pub rate_bound: T,
    /// `Some(P_H)` when the initial pressure was below it.
    pub pressure_ceiling: Option<T>,
}

impl<T: Scalar> BoundsCheck<T> {
    pub fn for_run(model: &GrowthModel<T>, epsilon: T, initial: &DerivedFields<T>) -> Self {
        let ph = model.homeostatic_pressure();
        let initially_below = initial.p.iter().all(|&p| p <= ph);
        Self {
            epsilon,
            rate_bound: model.rate_bound(),
            pressure_ceiling: (initially_below && ph > T::zero()).then_some(ph),
        }
    }

    pub fn barrier(&self, t: T) -> T {
        T::two() * self.epsilon * (-self.rate_bound * t).exp()
    }
}

/// Worst violation per bound kind; empty when everything holds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundsReport<T> {
    pub violations: Vec<Violation<T>>,
}

impl<T: Scalar> BoundsReport<T> {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn worst(&self, kind: BoundKind) -> T {
        self.violations.iter().filter(|v| v.kind == kind).fold(T::zero(), |m, v| m.max(v.magnitude))
    }
}

pub fn bounds_check<T: Scalar>(
    state: &SimState<T>,
    derived: &DerivedFields<T>,
    check: &BoundsCheck<T>,
) -> BoundsReport<T> {
    let mut worst: [Option<Violation<T>>; 3] = [None; 3];
    let mut note = |slot: usize, kind: BoundKind, cell: usize, magnitude: T| {
        if magnitude > T::zero() && worst[slot].is_none_or(|v| magnitude > v.magnitude) {
            worst[slot] = Some(Violation { kind, cell, magnitude });
        }
    };
    for j in 0..state.len() {
        note(0, BoundKind::Nonnegativity, j, state.n1[j].neg_part().max(state.n2[j].neg_part()));
    }
    if check.epsilon > T::zero() {
        let barrier = check.barrier(state.t);
        let slack = T::lit(8.0) * T::epsilon() * barrier;
        for (j, &n) in derived.n.iter().enumerate() {
            if n < barrier - slack {
                note(1, BoundKind::LowerBarrier, j, barrier - n);
            }
        }
    }
    if let Some(ph) = check.pressure_ceiling {
        for (j, &p) in derived.p.iter().enumerate() {
            note(2, BoundKind::PressureCeiling, j, p - ph);
        }
    }
    BoundsReport { violations: worst.into_iter().flatten().collect() }
}

/// Every instantaneous functional at one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Functionals<T> {
    pub t: T,
    pub mass1: T,
    pub mass2: T,
    pub max_p: T,
    pub min_n: T,
    pub grad_p_sq: T,
    pub bv: BvTotals<T>,
    pub p_absw: T,
    pub w_minus_l1: T,
    pub px_linf: T,
    pub pxx_l1: T,
    pub energy: T,
    pub dissipation: T,
    pub comp_residual: T,
    pub seg_ncc: T,
    pub seg_n1n2: T,
    /// `int (n1 F + n2 G)`, the instantaneous mass production.
    pub source: T,
}

impl<T: Scalar> Functionals<T> {
    pub fn compute(state: &SimState<T>, derived: &DerivedFields<T>, model: &GrowthModel<T>, grid: &Grid<T>) -> Self {
        let (p_absw, w_minus_l1) = estimate_w_pair(derived, grid);
        let (px_linf, pxx_l1) = corollary_norms(derived, grid);
        let (energy, dissipation) = energy_and_dissipation(derived, model, grid, state.gamma);
        let (seg_ncc, seg_n1n2) = segregation_indicators(state, derived, grid);
        Self {
            t: state.t,
            mass1: grid.integrate(&state.n1),
            mass2: grid.integrate(&state.n2),
            max_p: derived.p.iter().fold(T::zero(), |m, &p| m.max(p)),
            min_n: derived.n.iter().fold(T::infinity(), |m, &n| m.min(n)),
            grad_p_sq: estimate_grad_p_sq(derived, grid),
            bv: estimate_bv(&state.n1, &state.n2, &derived.c1, &derived.c2),
            p_absw,
            w_minus_l1,
            px_linf,
            pxx_l1,
            energy,
            dissipation,
            comp_residual: complementarity_residual(state, derived, model, grid),
            seg_ncc,
            seg_n1n2,
            source: mass_source(state, derived, model, grid),
        }
    }
}

/// `int (n1 F(p) + n2 G(p))`.
pub fn mass_source<T: Scalar>(
    state: &SimState<T>,
    derived: &DerivedFields<T>,
    model: &GrowthModel<T>,
    grid: &Grid<T>,
) -> T {
    let sum = (0..derived.p.len())
        .map(|j| {
            let (f, g) = model.combined_unchecked(derived.p[j]);
            state.n1[j] * f + state.n2[j] * g
        })
        .sum::<T>();
    grid.dx() * sum
}

/// Running time integrals along one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accumulator<T> {
    pub gamma: T,
    pub grad_p_l2_cum: T,
    pub gamma_p_absw_cum: T,
    pub dissipation_cum: T,
    pub clamp_cum: T,
}

impl<T: Scalar> Accumulator<T> {
    pub fn new(gamma: T) -> Self {
        Self {
            gamma,
            grad_p_l2_cum: T::zero(),
            gamma_p_absw_cum: T::zero(),
            dissipation_cum: T::zero(),
            clamp_cum: T::zero(),
        }
    }

    /// Adds a step of length `dt` by the trapezoidal rule between the
    /// functionals at its two ends.
    pub fn accumulate(&mut self, start: &Functionals<T>, end: &Functionals<T>, dt: T) {
        let h = T::half() * dt;
        self.grad_p_l2_cum = self.grad_p_l2_cum + h * (start.grad_p_sq + end.grad_p_sq);
        self.gamma_p_absw_cum = self.gamma_p_absw_cum + self.gamma * h * (start.p_absw + end.p_absw);
        self.dissipation_cum = self.dissipation_cum + h * (start.dissipation + end.dissipation);
    }

    pub fn add_clamped(&mut self, mass: T) {
        self.clamp_cum = self.clamp_cum + mass;
    }

    pub fn record(&self, f: &Functionals<T>) -> DiagnosticsRecord<T> {
        DiagnosticsRecord {
            t: f.t,
            mass1: f.mass1,
            mass2: f.mass2,
            max_p: f.max_p,
            min_n: f.min_n,
            grad_p_l2_cum: self.grad_p_l2_cum,
            bv_c1: f.bv.c1,
            bv_c2: f.bv.c2,
            bv_n1: f.bv.n1,
            bv_n2: f.bv.n2,
            gamma_p_absw_cum: self.gamma_p_absw_cum,
            w_minus_l1: f.w_minus_l1,
            px_linf: f.px_linf,
            pxx_l1: f.pxx_l1,
            energy: f.energy,
            dissipation_cum: self.dissipation_cum,
            comp_residual: f.comp_residual,
            seg_ncc: f.seg_ncc,
            seg_n1n2: f.seg_n1n2,
            clamp_cum: self.clamp_cum,
        }
    }
}

/// One row of `diagnostics.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord<T> {
    pub t: T,
    pub mass1: T,
    pub mass2: T,
    pub max_p: T,
    pub min_n: T,
    pub grad_p_l2_cum: T,
    pub bv_c1: T,
    pub bv_c2: T,
    pub bv_n1: T,
    pub bv_n2: T,
    pub gamma_p_absw_cum: T,
    pub w_minus_l1: T,
    pub px_linf: T,
    pub pxx_l1: T,
    pub energy: T,
    pub dissipation_cum: T,
    pub comp_residual: T,
    pub seg_ncc: T,
    pub seg_n1n2: T,
    pub clamp_cum: T,
}

impl<T: Scalar> DiagnosticsRecord<T> {
    pub const COLUMNS: [&'static str; 20] = [
        "t",
        "mass1",
        "mass2",
        "max_p",
        "min_n",
        "grad_p_L2_cum",
        "bv_c1",
        "bv_c2",
        "bv_n1",
        "bv_n2",
        "gamma_p_absw_cum",
        "w_minus_L1",
        "px_Linf",
        "pxx_L1",
        "energy",
        "dissipation_cum",
        "comp_residual",
        "seg_ncc",
        "seg_n1n2",
        "clamp_cum",
    ];

    pub fn values(&self) -> [T; 20] {
        [
            self.t,
            self.mass1,
            self.mass2,
            self.max_p,
            self.min_n,
            self.grad_p_l2_cum,
            self.bv_c1,
            self.bv_c2,
            self.bv_n1,
            self.bv_n2,
            self.gamma_p_absw_cum,
            self.w_minus_l1,
            self.px_linf,
            self.pxx_l1,
            self.energy,
            self.dissipation_cum,
            self.comp_residual,
            self.seg_ncc,
            self.seg_n1n2,
            self.clamp_cum,
        ]
    }

    pub fn bv_total(&self) -> T {
        self.bv_c1 + self.bv_c2 + self.bv_n1 + self.bv_n2
    }
}
