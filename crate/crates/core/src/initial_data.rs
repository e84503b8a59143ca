//! Parametric initial profiles and the well-preparedness audit.

use crate::error::{Error, Result};
use crate::fields::{fractions, pressure_from_density};
use crate::grid::{total_variation, Grid};
use crate::model::GrowthModel;
use crate::scalar::Scalar;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileShape<T> {
    /// `h` on `[x0, x1]`, stored as exact cell averages.
    Indicator {
        x0: T,
        x1: T,
        height: T,
    },
    /// `h exp(1 - 1/(1 - s^2))` with `s = (x - center)/width`, zero for `|s| >= 1`.
    Bump {
        center: T,
        width: T,
        height: T,
    },
    Uniform {
        height: T,
    },
}

impl<T: Scalar> ProfileShape<T> {
    pub fn height(&self) -> T {
        match *self {
            ProfileShape::Indicator { height, .. }
            | ProfileShape::Bump { height, .. }
            | ProfileShape::Uniform { height } => height,
        }
    }

    /// Closed support, `None` for uniform profiles.
    pub fn support(&self) -> Option<(T, T)> {
        match *self {
            ProfileShape::Indicator { x0, x1, .. } => Some((x0, x1)),
            ProfileShape::Bump { center, width, .. } => Some((center - width, center + width)),
            ProfileShape::Uniform { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::NegativeInput(m));
        if !(self.height() >= T::zero()) {
            return bad(format!("profile height must be >= 0, got {}", self.height()));
        }
        match *self {
            ProfileShape::Indicator { x0, x1, .. } if !(x0 < x1) => {
                bad(format!("indicator needs x0 < x1, got {x0} >= {x1}"))
            }
            ProfileShape::Bump { width, .. } if !(width > T::zero()) => {
                bad(format!("bump width must be positive, got {width}"))
            }
            _ => Ok(()),
        }
    }

    /// Cell values on `grid`.
    pub fn sample(&self, grid: &Grid<T>) -> Vec<T> {
        let dx = grid.dx();
        match *self {
            ProfileShape::Indicator { x0, x1, height } => (0..grid.cells())
                .map(|j| {
                    let (a, b) = (grid.face(j), grid.face(j + 1));
                    if a >= x0 && b <= x1 {
                        return height;
                    }
                    let overlap = (b.min(x1) - a.max(x0)).max(T::zero());
                    height * overlap / dx
                })
                .collect(),
            ProfileShape::Bump { center, width, height } => grid
                .centers()
                .iter()
                .map(|&x| {
                    let s = (x - center) / width;
                    let q = T::one() - s * s;
                    if q > T::zero() {
                        height * (T::one() - T::one() / q).exp()
                    } else {
                        T::zero()
                    }
                })
                .collect(),
            ProfileShape::Uniform { height } => vec![height; grid.cells()],
        }
    }
}

impl<T: Scalar> fmt::Display for ProfileShape<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileShape::Indicator { x0, x1, height } => write!(f, "indicator({x0}, {x1}, {height})"),
            ProfileShape::Bump { center, width, height } => write!(f, "bump({center}, {width}, {height})"),
            ProfileShape::Uniform { height } => write!(f, "uniform({height})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSpec<T> {
    pub species: Species,
    pub shape: ProfileShape<T>,
}

/// True when every profile has compact support.
pub fn all_compact<T: Scalar>(profiles: &[ProfileSpec<T>]) -> bool {
    profiles.iter().all(|p| p.shape.support().is_some())
}

/// Sums the profiles of each species on `grid`. Compact supports must lie
/// strictly inside `(-L/2, L/2)`.
pub fn build_initial<T: Scalar>(profiles: &[ProfileSpec<T>], grid: &Grid<T>) -> Result<(Vec<T>, Vec<T>)> {
    let limit = T::half() * grid.half_width();
    let mut n1 = vec![T::zero(); grid.cells()];
    let mut n2 = vec![T::zero(); grid.cells()];
    for spec in profiles {
        spec.shape.validate()?;
        if let Some((a, b)) = spec.shape.support() {
            if !(a > -limit && b < limit) {
                return Err(Error::SupportOutsideDomain(format!(
                    "{} has support [{a}, {b}], which must lie inside ({}, {limit}); increase grid.L",
                    spec.shape, -limit
                )));
            }
        }
        let target = match spec.species {
            Species::One => &mut n1,
            Species::Two => &mut n2,
        };
        for (t, v) in target.iter_mut().zip(spec.shape.sample(grid)) {
            *t = *t + v;
        }
    }
    Ok((n1, n2))
}

/// Advisory well-preparedness figures for regularised initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport<T> {
    pub cells: usize,
    pub max_p0: T,
    pub homeostatic_pressure: T,
    /// `int |p_xx(0)|`.
    pub pxx_l1: T,
    pub tv_c1: T,
    pub tv_c2: T,
    pub tv_n1: T,
    pub tv_n2: T,
}

impl<T: Scalar> AuditReport<T> {
    pub fn pressure_ok(&self) -> bool {
        self.max_p0 <= self.homeostatic_pressure
    }
}

impl<T: Scalar> fmt::Display for AuditReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "max_p0 = {:e} vs P_H = {} ({})",
            self.max_p0,
            self.homeostatic_pressure,
            if self.pressure_ok() { "ok" } else { "FLAGGED" }
        )?;
        writeln!(f, "pxx_L1(0) = {:e} at N = {}", self.pxx_l1, self.cells)?;
        writeln!(f, "TV fractions = {:e}, {:e}", self.tv_c1, self.tv_c2)?;
        write!(f, "TV densities = {:e}, {:e}", self.tv_n1, self.tv_n2)
    }
}

/// Never fails on poorly prepared data; it only reports.
pub fn audit_well_prepared<T: Scalar>(
    n1: &[T],
    n2: &[T],
    gamma: T,
    epsilon: T,
    model: &GrowthModel<T>,
    grid: &Grid<T>,
    vac_tol: T,
) -> Result<AuditReport<T>> {
    let r1: Vec<T> = n1.iter().map(|&v| v + epsilon).collect();
    let r2: Vec<T> = n2.iter().map(|&v| v + epsilon).collect();
    let n: Vec<T> = r1.iter().zip(&r2).map(|(&a, &b)| a + b).collect();
    let p = pressure_from_density(&n, gamma, T::zero())?;
    let pxx = grid.second_difference(&p)?;
    let (c1, c2) = fractions(&r1, &r2, vac_tol);
    Ok(AuditReport {
        cells: grid.cells(),
        max_p0: p.iter().fold(T::zero(), |m, &v| m.max(v)),
        homeostatic_pressure: model.homeostatic_pressure(),
        pxx_l1: grid.dx() * pxx.iter().map(|v| v.abs()).sum::<T>(),
        tv_c1: total_variation(&c1),
        tv_c2: total_variation(&c2),
        tv_n1: total_variation(&r1),
        tv_n2: total_variation(&r2),
    })
}
