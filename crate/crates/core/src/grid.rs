//! Uniform cell-centred grid on `(-L, L)` with homogeneous Neumann
//! (no-flux) discrete calculus.
//!
//! Cell `j` has centre `x_j = -L + (j + 1/2) dx`. Face `j + 1/2` sits between
//! cells `j` and `j + 1`; there are `N + 1` faces and the two boundary faces
//! always carry zero gradient and zero flux.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    half_width: T,
    cells: usize,
    dx: T,
    centers: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    pub fn new(half_width: T, cells: usize) -> Result<Self> {
        if cells < 1 {
            return Err(Error::GridTooSmall { cells, required: 1 });
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!("half width must be positive and finite, got {half_width}")));
        }
        let n = T::from_count(cells);
        let dx = T::two() * half_width / n;
        // (2j + 1 - N) L / N keeps the centres exactly antisymmetric.
        let centers = (0..cells)
            .map(|j| {
                let k = 2 * j as i64 + 1 - cells as i64;
                T::from_i64(k).expect("index representable") * half_width / n
            })
            .collect();
        Ok(Self { half_width, cells, dx, centers })
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn centers(&self) -> &[T] {
        &self.centers
    }

    /// Position of face `k` (`k = 0..=N`).
    pub fn face(&self, k: usize) -> T {
        -self.half_width + T::from_count(k) * self.dx
    }

    /// Difference quotient on interior faces, zero on the two boundary faces.
    pub fn gradient_at_faces(&self, field: &[T]) -> Vec<T> {
        debug_assert_eq!(field.len(), self.cells);
        let mut out = vec![T::zero(); self.cells + 1];
        for (k, w) in field.windows(2).enumerate() {
            out[k + 1] = (w[1] - w[0]) / self.dx;
        }
        out
    }

    /// Three-point second difference with mirrored ghost cells.
    pub fn second_difference(&self, field: &[T]) -> Result<Vec<T>> {
        if self.cells < 2 {
            return Err(Error::GridTooSmall { cells: self.cells, required: 2 });
        }
        debug_assert_eq!(field.len(), self.cells);
        let n = self.cells;
        let dx2 = self.dx * self.dx;
        let mut out = Vec::with_capacity(n);
        out.push((field[1] - field[0]) / dx2);
        for j in 1..n - 1 {
            out.push((field[j + 1] - T::two() * field[j] + field[j - 1]) / dx2);
        }
        out.push((field[n - 2] - field[n - 1]) / dx2);
        Ok(out)
    }

    /// Midpoint rule: `dx * sum(field)`.
    pub fn integrate(&self, field: &[T]) -> T {
        self.dx * field.iter().copied().sum::<T>()
    }

    /// Cell divergence `(flux[j+1] - flux[j]) / dx` of a face flux.
    pub fn divergence(&self, face_flux: &[T]) -> Vec<T> {
        debug_assert_eq!(face_flux.len(), self.cells + 1);
        face_flux.windows(2).map(|w| (w[1] - w[0]) / self.dx).collect()
    }
}

/// Sum of absolute jumps between neighbouring cells.
pub fn total_variation<T: Scalar>(field: &[T]) -> T {
    field.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}
