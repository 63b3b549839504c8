//! Nutrient equation `0 = v_xx - u v + f` with homogeneous Neumann ends,
//! discretized cell-centered with a reflecting stencil and solved directly.

use crate::error::{Error, Result};
use crate::grid::Field;

/// Tridiagonal matrix of `-Δ_h + diag(u)`.
///
/// The Laplacian part has zero row sums; boundary rows carry a single
/// neighbour because the boundary face flux is zero.
#[derive(Debug, Clone)]
pub struct EllipticOperator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl EllipticOperator {
    pub fn assemble(u: &Field) -> Result<Self> {
        if let Some(i) = u.values().iter().position(|&x| x < 0.0) {
            return Err(Error::Domain(format!(
                "population must be nonnegative, u[{i}] = {}",
                u.values()[i]
            )));
        }
        if u.integrate() <= 0.0 {
            return Err(Error::SingularSystem);
        }
        let n = u.len();
        let k = 1.0 / (u.grid().spacing() * u.grid().spacing());
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let mut d = 0.0;
            if i > 0 {
                lower[i] = -k;
                d += k;
            }
            if i + 1 < n {
                upper[i] = -k;
                d += k;
            }
            diag[i] = d + u.values()[i];
        }
        Ok(Self { lower, diag, upper })
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut r = self.diag[i] * v[i];
                if i > 0 {
                    r += self.lower[i] * v[i - 1];
                }
                if i + 1 < n {
                    r += self.upper[i] * v[i + 1];
                }
                r
            })
            .collect()
    }

    /// Thomas algorithm. No pivoting: the matrix is an irreducible,
    /// diagonally dominant M-matrix whenever `u >= 0` has positive mass.
    ///
    /// With a nonnegative right-hand side every intermediate quantity keeps
    /// its sign, so the result is nonnegative in floating point as well.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = self.upper[0] / self.diag[0];
        d[0] = rhs[0] / self.diag[0];
        for i in 1..n {
            let m = self.diag[i] - self.lower[i] * c[i - 1];
            c[i] = self.upper[i] / m;
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    }
}

/// Solves `-Δ_h v + u v = f` for the nutrient at one instant.
pub fn solve_nutrient(u: &Field, f: &Field) -> Result<Field> {
    u.ensure_same_grid(f)?;
    if let Some(i) = f.values().iter().position(|&x| x < 0.0) {
        return Err(Error::Domain(format!(
            "source must be nonnegative, f[{i}] = {}",
            f.values()[i]
        )));
    }
    let op = EllipticOperator::assemble(u)?;
    Field::new(*u.grid(), op.solve(f.values()))
}

/// Max-norm of the cell residual `-Δ_h v + u v - f`.
pub fn elliptic_residual(u: &Field, f: &Field, v: &Field) -> Result<f64> {
    u.ensure_same_grid(f)?;
    u.ensure_same_grid(v)?;
    let n = v.len();
    let h2 = u.grid().spacing().powi(2);
    let vv = v.values();
    let res = (0..n).fold(0.0f64, |m, i| {
        let left = if i > 0 { vv[i - 1] - vv[i] } else { 0.0 };
        let right = if i + 1 < n { vv[i + 1] - vv[i] } else { 0.0 };
        let r = -(left + right) / h2 + u.values()[i] * vv[i] - f.values()[i];
        m.max(r.abs())
    });
    Ok(res)
}
