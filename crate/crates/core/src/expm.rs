//! Small dense matrices and their exponentials.
//!
//! This exists to give the master-equation solver an independent cross-check:
//! for a time-homogeneous generator Q the distribution at time t is exactly
//! exp(tQ) applied to the initial distribution, computed here by scaling and
//! squaring with a Taylor series. The state spaces involved are tiny (a few
//! dozen states), so a plain row-major dense matrix is all that is needed.

use crate::error::{Error, Result};
use crate::scalar::Real;
use std::ops::{Index, IndexMut};

#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix<R: Real = f64> {
    dim: usize,
    data: Vec<R>,
}

impl<R: Real> SquareMatrix<R> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![R::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m[(k, k)] = R::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<R>]) -> Result<Self> {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidParams(format!(
                    "row {} has length {}, expected {}",
                    r,
                    row.len(),
                    dim
                )));
            }
            for (c, &x) in row.iter().enumerate() {
                m[(r, c)] = x;
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> R {
        (0..self.dim)
            .map(|r| self.data[r * self.dim..(r + 1) * self.dim].iter().map(|x| x.abs()).sum())
            .fold(R::zero(), R::max)
    }

    pub fn scale(&self, factor: R) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * factor).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let dim = self.dim;
        let mut out = Self::zeros(dim);
        for r in 0..dim {
            for k in 0..dim {
                let a = self[(r, k)];
                if a == R::zero() {
                    continue;
                }
                for c in 0..dim {
                    out[(r, c)] = out[(r, c)] + a * other[(k, c)];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[R]) -> Vec<R> {
        assert_eq!(v.len(), self.dim, "dimension mismatch");
        (0..self.dim)
            .map(|r| {
                self.data[r * self.dim..(r + 1) * self.dim]
                    .iter()
                    .zip(v)
                    .map(|(&a, &x)| a * x)
                    .sum()
            })
            .collect()
    }

    fn add_assign(&mut self, other: &Self) {
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x = *x + y;
        }
    }
}

impl<R: Real> Index<(usize, usize)> for SquareMatrix<R> {
    type Output = R;
    fn index(&self, (r, c): (usize, usize)) -> &R {
        &self.data[r * self.dim + c]
    }
}

impl<R: Real> IndexMut<(usize, usize)> for SquareMatrix<R> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut R {
        &mut self.data[r * self.dim + c]
    }
}

/// Matrix exponential by scaling and squaring.
///
/// The argument is halved until its norm is at most 1/4, the exponential of
/// the scaled matrix is summed as a Taylor series to machine precision, and
/// the result is squared back up. At norm 1/4 the series terms shrink by at
/// least a factor of 4 per step, so convergence within the term budget only
/// fails for non-finite input.
pub fn expm<R: Real>(a: &SquareMatrix<R>) -> Result<SquareMatrix<R>> {
    // Entrywise check: the norm would mask NaN, since IEEE max ignores it.
    if a.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParams("matrix entries must be finite".into()));
    }
    let norm = a.inf_norm();
    let mut squarings = 0i32;
    let quarter = R::of(0.25);
    let mut scaled_norm = norm;
    while scaled_norm > quarter {
        scaled_norm = scaled_norm / R::of(2.0);
        squarings += 1;
    }
    let b = a.scale(R::one() / R::of(2f64.powi(squarings)));

    let mut sum = SquareMatrix::identity(a.dim());
    let mut term = SquareMatrix::identity(a.dim());
    let mut converged = false;
    for j in 1..=MAX_TAYLOR_TERMS {
        term = term.mul(&b).scale(R::one() / R::of(j as f64));
        sum.add_assign(&term);
        if term.inf_norm() <= R::epsilon() * sum.inf_norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::InvalidParams(format!(
            "matrix exponential series did not converge within {MAX_TAYLOR_TERMS} terms"
        )));
    }
    for _ in 0..squarings {
        sum = sum.mul(&sum);
    }
    Ok(sum)
}

/// More terms than the norm bound ever needs; hitting this cap means the
/// input was pathological.
const MAX_TAYLOR_TERMS: usize = 40;
