//! Pressure-dependent growth functions.
//!
//! Species 1 grows at `F1(p)` and feeds species 2 at `F2(p)`; species 2 grows
//! at `G2(p)` and feeds species 1 at `G1(p)`. `F2` and `G1` are the
//! cross-reaction terms. Each term belongs to the family
//!
//! * `affine(a, b)`            : `a (1 - p/b)`
//! * `affine_truncated(a, b)`  : `a max(1 - p/b, 0)`
//! * `zero`
//!
//! which keeps the antiderivatives and the homeostatic pressure closed-form.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::fmt;

/// Number of interior samples used when bounding `|F|, |G|` on `[0, P_H]`.
const RATE_SCAN_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthTerm<T> {
    Affine { amplitude: T, threshold: T },
    AffineTruncated { amplitude: T, threshold: T },
    Zero,
}

impl<T: Scalar> GrowthTerm<T> {
    pub fn affine(amplitude: T, threshold: T) -> Result<Self> {
        Self::check_params(amplitude, threshold)?;
        Ok(GrowthTerm::Affine { amplitude, threshold })
    }

    pub fn affine_truncated(amplitude: T, threshold: T) -> Result<Self> {
        Self::check_params(amplitude, threshold)?;
        Ok(GrowthTerm::AffineTruncated { amplitude, threshold })
    }

    fn check_params(amplitude: T, threshold: T) -> Result<()> {
        if !(amplitude >= T::zero()) || !amplitude.is_finite() {
            return Err(Error::InfeasibleModel(format!("amplitude must be >= 0, got {amplitude}")));
        }
        if !(threshold > T::zero()) || !threshold.is_finite() {
            return Err(Error::InfeasibleModel(format!("threshold must be > 0, got {threshold}")));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            GrowthTerm::Zero => true,
            GrowthTerm::Affine { amplitude, .. } | GrowthTerm::AffineTruncated { amplitude, .. } => {
                amplitude == T::zero()
            }
        }
    }

    /// Value at pressure `p >= 0` (no sign check).
    #[inline]
    pub fn value(&self, p: T) -> T {
        match *self {
            GrowthTerm::Affine { amplitude, threshold } => amplitude * (T::one() - p / threshold),
            GrowthTerm::AffineTruncated { amplitude, threshold } => amplitude * (T::one() - p / threshold).pos(),
            GrowthTerm::Zero => T::zero(),
        }
    }

    /// Derivative; at the truncation kink the one-sided value from below.
    #[inline]
    pub fn derivative(&self, p: T) -> T {
        match *self {
            GrowthTerm::Affine { amplitude, threshold } => -amplitude / threshold,
            GrowthTerm::AffineTruncated { amplitude, threshold } => {
                if p <= threshold {
                    -amplitude / threshold
                } else {
                    T::zero()
                }
            }
            GrowthTerm::Zero => T::zero(),
        }
    }

    /// `int_0^p value(z) dz`.
    #[inline]
    pub fn antiderivative(&self, p: T) -> T {
        let ramp = |a: T, b: T, q: T| a * (q - q * q / (T::two() * b));
        match *self {
            GrowthTerm::Affine { amplitude, threshold } => ramp(amplitude, threshold, p),
            GrowthTerm::AffineTruncated { amplitude, threshold } => {
                ramp(amplitude, threshold, if p < threshold { p } else { threshold })
            }
            GrowthTerm::Zero => T::zero(),
        }
    }

    /// Smallest `q` with `value(p) <= 0` for every `p >= q`.
    fn nonpositive_from(&self) -> T {
        match *self {
            GrowthTerm::Zero => T::zero(),
            GrowthTerm::Affine { amplitude, threshold } | GrowthTerm::AffineTruncated { amplitude, threshold } => {
                if amplitude == T::zero() {
                    T::zero()
                } else {
                    threshold
                }
            }
        }
    }

    /// Smallest `q` with `value(p) == 0` for every `p >= q`, if any.
    fn vanishes_from(&self) -> Option<T> {
        match *self {
            GrowthTerm::Zero => Some(T::zero()),
            GrowthTerm::Affine { amplitude, .. } => (amplitude == T::zero()).then(T::zero),
            GrowthTerm::AffineTruncated { amplitude, threshold } => {
                Some(if amplitude == T::zero() { T::zero() } else { threshold })
            }
        }
    }
}

impl<T: Scalar> fmt::Display for GrowthTerm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrowthTerm::Affine { amplitude, threshold } => write!(f, "affine({amplitude}, {threshold})"),
            GrowthTerm::AffineTruncated { amplitude, threshold } => {
                write!(f, "affine_truncated({amplitude}, {threshold})")
            }
            GrowthTerm::Zero => f.write_str("zero"),
        }
    }
}

/// The four individual rates and the combined `F = F1 + F2`, `G = G1 + G2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates<T> {
    pub f1: T,
    pub f2: T,
    pub g1: T,
    pub g2: T,
    pub f: T,
    pub g: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthModel<T> {
    pub f1: GrowthTerm<T>,
    pub f2: GrowthTerm<T>,
    pub g1: GrowthTerm<T>,
    pub g2: GrowthTerm<T>,
    homeostatic: T,
    rate_bound: T,
}

/// Smallest pressure beyond which `F1, G2 <= 0` and `F2 = G1 = 0`.
///
/// Fails when a cross term is a plain affine ramp with positive amplitude,
/// since such a term never vanishes identically.
pub fn homeostatic_pressure<T: Scalar>(
    f1: &GrowthTerm<T>,
    f2: &GrowthTerm<T>,
    g1: &GrowthTerm<T>,
    g2: &GrowthTerm<T>,
) -> Result<T> {
    let cross = |name: &str, term: &GrowthTerm<T>| {
        term.vanishes_from().ok_or_else(|| {
            Error::InfeasibleModel(format!("cross term {name} = {term} never vanishes; use affine_truncated or zero"))
        })
    };
    let f2_from = cross("F2", f2)?;
    let g1_from = cross("G1", g1)?;
    Ok(f1.nonpositive_from().max(g2.nonpositive_from()).max(f2_from).max(g1_from))
}

impl<T: Scalar> GrowthModel<T> {
    pub fn new(f1: GrowthTerm<T>, f2: GrowthTerm<T>, g1: GrowthTerm<T>, g2: GrowthTerm<T>) -> Result<Self> {
        let homeostatic = homeostatic_pressure(&f1, &f2, &g1, &g2)?;
        let mut model = Self { f1, f2, g1, g2, homeostatic, rate_bound: T::zero() };
        model.rate_bound = model.scan_rate_bound();
        Ok(model)
    }

    /// All four terms identically zero.
    pub fn zero() -> Self {
        Self::new(GrowthTerm::Zero, GrowthTerm::Zero, GrowthTerm::Zero, GrowthTerm::Zero)
            .expect("zero model is always constructible")
    }

    /// `F1 = 1 - p/3`, `G2 = 1 - p`, `G1 = F2 = (1 - p)+`.
    pub fn invasion() -> Self {
        let one = T::one();
        Self::new(
            GrowthTerm::Affine { amplitude: one, threshold: T::lit(3.0) },
            GrowthTerm::AffineTruncated { amplitude: one, threshold: one },
            GrowthTerm::AffineTruncated { amplitude: one, threshold: one },
            GrowthTerm::Affine { amplitude: one, threshold: one },
        )
        .expect("invasion model is feasible")
    }

    /// `F1 = 2(1 - p)`, `G2 = 1 - p`, no cross reactions.
    pub fn segregated() -> Self {
        let one = T::one();
        Self::new(
            GrowthTerm::Affine { amplitude: T::two(), threshold: one },
            GrowthTerm::Zero,
            GrowthTerm::Zero,
            GrowthTerm::Affine { amplitude: one, threshold: one },
        )
        .expect("segregated model is feasible")
    }

    pub fn homeostatic_pressure(&self) -> T {
        self.homeostatic
    }

    /// Upper bound for `|F|` and `|G|` on `[0, P_H]`.
    pub fn rate_bound(&self) -> T {
        self.rate_bound
    }

    pub fn has_cross_reactions(&self) -> bool {
        !(self.f2.is_zero() && self.g1.is_zero())
    }

    fn scan_rate_bound(&self) -> T {
        let ph = self.homeostatic;
        let at = |p: T| {
            let r = self.rates_unchecked(p);
            r.f.abs().max(r.g.abs())
        };
        let mut bound = at(T::zero()).max(at(ph));
        let steps = T::from_count(RATE_SCAN_POINTS + 1);
        for k in 1..=RATE_SCAN_POINTS {
            bound = bound.max(at(ph * T::from_count(k) / steps));
        }
        bound
    }

    #[inline]
    pub(crate) fn rates_unchecked(&self, p: T) -> Rates<T> {
        let (f1, f2, g1, g2) = (self.f1.value(p), self.f2.value(p), self.g1.value(p), self.g2.value(p));
        Rates { f1, f2, g1, g2, f: f1 + f2, g: g1 + g2 }
    }

    /// `F(p)` and `G(p)` without the sign check.
    #[inline]
    pub(crate) fn combined_unchecked(&self, p: T) -> (T, T) {
        let r = self.rates_unchecked(p);
        (r.f, r.g)
    }

    pub fn eval_rates(&self, p: T) -> Result<Rates<T>> {
        check_pressure(p)?;
        Ok(self.rates_unchecked(p))
    }

    pub fn eval_rate_derivatives(&self, p: T) -> Result<Rates<T>> {
        check_pressure(p)?;
        let (f1, f2, g1, g2) =
            (self.f1.derivative(p), self.f2.derivative(p), self.g1.derivative(p), self.g2.derivative(p));
        Ok(Rates { f1, f2, g1, g2, f: f1 + f2, g: g1 + g2 })
    }

    /// `(H1, H2)` with `H1(p) = int_0^p F`, `H2(p) = int_0^p G`.
    pub fn antiderivatives(&self, p: T) -> Result<(T, T)> {
        check_pressure(p)?;
        Ok(self.antiderivatives_unchecked(p))
    }

    #[inline]
    pub(crate) fn antiderivatives_unchecked(&self, p: T) -> (T, T) {
        (self.f1.antiderivative(p) + self.f2.antiderivative(p), self.g1.antiderivative(p) + self.g2.antiderivative(p))
    }

    pub fn check_feasibility(&self) -> FeasibilityReport {
        let bounded = Condition {
            name: "bounded-c1",
            status: ConditionStatus::Pass,
            detail: "piecewise-affine terms: bounded values and derivatives".into(),
        };

        let mut monotone_issues = Vec::new();
        for (name, term) in [("F1", &self.f1), ("G2", &self.g2)] {
            if term.is_zero() {
                monotone_issues.push(format!("{name} is constant, not strictly decreasing"));
            }
        }
        let monotone = Condition {
            name: "monotone",
            status: if monotone_issues.is_empty() { ConditionStatus::Pass } else { ConditionStatus::Fail },
            detail: if monotone_issues.is_empty() {
                "F1, G2 strictly decreasing; F2, G1 non-increasing".into()
            } else {
                monotone_issues.join("; ")
            },
        };

        let ph = self.homeostatic;
        let homeostatic = Condition {
            name: "homeostatic-pressure",
            status: if ph > T::zero() { ConditionStatus::Pass } else { ConditionStatus::Fail },
            detail: format!("P_H = {ph}"),
        };

        let r0 = self.rates_unchecked(T::zero());
        let balanced = (r0.f - r0.g).abs() <= T::lit(1e-12) * (T::one() + r0.f.abs());
        let origin = Condition {
            name: "balanced-origin",
            status: if balanced { ConditionStatus::Pass } else { ConditionStatus::Warning },
            detail: format!("F(0) = {}, G(0) = {}", r0.f, r0.g),
        };

        FeasibilityReport { conditions: [bounded, monotone, homeostatic, origin] }
    }
}

fn check_pressure<T: Scalar>(p: T) -> Result<()> {
    if p < T::zero() || p.is_nan() {
        return Err(Error::NegativePressure(p.to_f64_lossy()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionStatus {
    Pass,
    Warning,
    Fail,
}

impl fmt::Display for ConditionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionStatus::Pass => "PASS",
            ConditionStatus::Warning => "WARN",
            ConditionStatus::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub status: ConditionStatus,
    pub detail: String,
}

/// Verdicts for (i) bounded C1, (ii) monotonicity, (iii) homeostatic
/// pressure, (iv) `F(0) = G(0)`; the last is only ever a warning.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub conditions: [Condition; 4],
}

impl FeasibilityReport {
    pub fn failures(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| c.status == ConditionStatus::Fail)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| c.status == ConditionStatus::Warning)
    }

    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.status == ConditionStatus::Pass)
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.conditions {
            writeln!(f, "{:<22} {}  {}", c.name, c.status, c.detail)?;
        }
        Ok(())
    }
}
