//! Uniform cell-centered mesh on `(0, L)` and the discrete calculus shared by
//! the solvers and the monitor.
//!
//! Faces are indexed `0..=n`; face `j` sits at `x = j h` between cells `j - 1`
//! and `j`. Boundary faces always carry a zero gradient (homogeneous Neumann).

use crate::error::{Error, Result};

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    length: f64,
    cells: usize,
}

impl Grid {
    pub fn new(length: f64, cells: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "length must be positive, got {length}"
            )));
        }
        if cells < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_CELLS} cells, got {cells}"
            )));
        }
        Ok(Self { length, cells })
    }

    /// Grid without the `n >= 4` floor; only for tiny hand-computed cases.
    #[cfg(test)]
    pub(crate) fn small(length: f64, cells: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) || cells == 0 {
            return Err(Error::InvalidGrid(format!(
                "length {length}, cells {cells}"
            )));
        }
        Ok(Self { length, cells })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.cells).map(move |i| self.center(i))
    }

    pub fn face(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    /// Same mesh with twice as many cells.
    pub fn refined(&self) -> Self {
        Self {
            length: self.length,
            cells: 2 * self.cells,
        }
    }
}

/// One scalar unknown sampled at the cell centers of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::LengthMismatch {
                expected: grid.cells(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.cells()])
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.cells()],
        }
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.centers().map(f).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid, self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.ensure_same_grid(other)?;
        Field::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scaled(&self, factor: f64) -> Result<Field> {
        self.map(|x| factor * x)
    }

    /// Midpoint rule `h * sum(values)`.
    pub fn integrate(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    /// Midpoint integral of the pointwise product, without allocating.
    pub fn integrate_product(&self, other: &Field) -> Result<f64> {
        self.ensure_same_grid(other)?;
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(self.grid.spacing() * sum)
    }

    /// Difference quotients on the `n + 1` faces; boundary faces are zero.
    pub fn face_gradient(&self) -> Vec<f64> {
        let n = self.len();
        let h = self.grid.spacing();
        let mut faces = vec![0.0; n + 1];
        for j in 1..n {
            faces[j] = (self.values[j] - self.values[j - 1]) / h;
        }
        faces
    }

    /// Arithmetic mean of the two neighbours on interior faces, zero on the boundary faces.
    pub fn face_average(&self) -> Vec<f64> {
        let n = self.len();
        let mut faces = vec![0.0; n + 1];
        for j in 1..n {
            faces[j] = 0.5 * (self.values[j] + self.values[j - 1]);
        }
        faces
    }

    /// Cell-centered derivative: mean of the two adjacent face gradients.
    pub fn center_gradient(&self) -> Vec<f64> {
        let g = self.face_gradient();
        (0..self.len()).map(|i| 0.5 * (g[i] + g[i + 1])).collect()
    }

    /// `(h * sum |v|^p)^(1/p)`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        Ok(self.power_integral(p)?.powf(1.0 / p))
    }

    /// `h * sum |v|^p`, the quantity whose p-th root is [`Field::lp_norm`].
    pub fn power_integral(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Domain(format!("Lp exponent must be >= 1, got {p}")));
        }
        let integer = p.fract() == 0.0;
        if !integer {
            if let Some(i) = self.values.iter().position(|&v| v < 0.0) {
                return Err(Error::Domain(format!(
                    "negative entry {} at cell {i} with non-integer p = {p}",
                    self.values[i]
                )));
            }
        }
        let sum: f64 = if integer && p <= i32::MAX as f64 {
            let k = p as i32;
            self.values.iter().map(|v| v.abs().powi(k)).sum()
        } else {
            self.values.iter().map(|v| v.abs().powf(p)).sum()
        };
        Ok(self.grid.spacing() * sum)
    }

    /// `(max, min)` over the cell values.
    pub fn sup_inf(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &v| {
                (hi.max(v), lo.min(v))
            })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Field mirrored about `x = L / 2`.
    pub fn reflected(&self) -> Field {
        let mut values = self.values.clone();
        values.reverse();
        Field {
            grid: self.grid,
            values,
        }
    }
}

/// Discrete divergence of face values: cell `i` gets `(w[i+1] - w[i]) / h`.
pub fn divergence(grid: &Grid, faces: &[f64]) -> Result<Vec<f64>> {
    if faces.len() != grid.cells() + 1 {
        return Err(Error::LengthMismatch {
            expected: grid.cells() + 1,
            got: faces.len(),
        });
    }
    let h = grid.spacing();
    Ok(faces.windows(2).map(|w| (w[1] - w[0]) / h).collect())
}
