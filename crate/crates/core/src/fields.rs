//! Species densities and everything derived from them: pressure, population
//! fractions, reaction field, face velocity and the Aronson-Bénilan field
//! `w = p_xx + R`.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::GrowthModel;
use crate::scalar::Scalar;

/// Densities below this total are treated as vacuum when forming fractions.
pub const DEFAULT_VAC_TOL: f64 = 1e-12;
/// Negative densities down to `-DEFAULT_TOL_POS` are roundoff and get clamped.
pub const DEFAULT_TOL_POS: f64 = 1e-13;

/// Cell-averaged species densities at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState<T> {
    pub n1: Vec<T>,
    pub n2: Vec<T>,
    pub t: T,
    pub gamma: T,
    pub epsilon: T,
}

impl<T: Scalar> SimState<T> {
    pub fn len(&self) -> usize {
        self.n1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n1.is_empty()
    }

    pub fn total(&self) -> Vec<T> {
        self.n1.iter().zip(&self.n2).map(|(&a, &b)| a + b).collect()
    }
}

/// Secondary fields recomputed from a [`SimState`].
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFields<T> {
    /// Total density.
    pub n: Vec<T>,
    pub p: Vec<T>,
    /// Face velocity `-dp/dx`, `N + 1` entries, zero on boundary faces.
    pub u: Vec<T>,
    pub c1: Vec<T>,
    pub c2: Vec<T>,
    /// `c1 F(p) + c2 G(p)`.
    pub r: Vec<T>,
    /// Second difference of the pressure.
    pub pxx: Vec<T>,
    /// `pxx + r`.
    pub w: Vec<T>,
}

impl<T: Scalar> DerivedFields<T> {
    pub fn compute(
        state: &SimState<T>,
        grid: &Grid<T>,
        model: &GrowthModel<T>,
        vac_tol: T,
        tol_pos: T,
    ) -> Result<Self> {
        let n = state.total();
        let p = pressure_from_density(&n, state.gamma, tol_pos)?;
        let u = face_velocity(&p, grid);
        let (c1, c2) = fractions(&state.n1, &state.n2, vac_tol);
        let r = reaction_field(&c1, &c2, &p, model);
        let pxx = grid.second_difference(&p)?;
        let w = pxx.iter().zip(&r).map(|(&a, &b)| a + b).collect();
        Ok(Self { n, p, u, c1, c2, r, pxx, w })
    }
}

/// `p = n^gamma`; entries in `[-tol_pos, 0)` count as zero.
pub fn pressure_from_density<T: Scalar>(n: &[T], gamma: T, tol_pos: T) -> Result<Vec<T>> {
    if !(gamma > T::one()) {
        return Err(Error::Domain(format!("gamma must exceed 1, got {gamma}")));
    }
    n.iter()
        .enumerate()
        .map(|(j, &v)| {
            if v >= T::zero() {
                Ok(v.powf(gamma))
            } else if v >= -tol_pos {
                Ok(T::zero())
            } else {
                Err(Error::Domain(format!("negative density {v} at cell {j}")))
            }
        })
        .collect()
}

/// Population fractions `n_i / (n1 + n2)`, with `(1/2, 1/2)` at vacuum.
pub fn fractions<T: Scalar>(n1: &[T], n2: &[T], vac_tol: T) -> (Vec<T>, Vec<T>) {
    n1.iter()
        .zip(n2)
        .map(|(&a, &b)| {
            let n = a + b;
            if n > vac_tol {
                let c1 = (a / n).max(T::zero()).min(T::one());
                (c1, T::one() - c1)
            } else {
                (T::half(), T::half())
            }
        })
        .unzip()
}

/// `R = c1 F(p) + c2 G(p)`.
pub fn reaction_field<T: Scalar>(c1: &[T], c2: &[T], p: &[T], model: &GrowthModel<T>) -> Vec<T> {
    c1.iter()
        .zip(c2)
        .zip(p)
        .map(|((&a, &b), &q)| {
            let (f, g) = model.combined_unchecked(q);
            a * f + b * g
        })
        .collect()
}

/// `w = p_xx + R`.
pub fn ab_field<T: Scalar>(p: &[T], r: &[T], grid: &Grid<T>) -> Result<Vec<T>> {
    Ok(grid.second_difference(p)?.into_iter().zip(r).map(|(a, &b)| a + b).collect())
}

/// `u = -dp/dx` on faces.
pub fn face_velocity<T: Scalar>(p: &[T], grid: &Grid<T>) -> Vec<T> {
    grid.gradient_at_faces(p).into_iter().map(|g| -g).collect()
}
