//! Cholesky factorization and equality-constrained KKT solves.

use super::matrix::{axpy, dot, Matrix, Vector};
use crate::error::{Error, Result};

/// Pivot threshold below which a matrix is reported as not positive definite.
pub const PD_PIVOT_TOL: f64 = 1e-12;
/// Pivot threshold on the working-set Schur complement.
pub const RANK_PIVOT_TOL: f64 = 1e-10;

/// Lower-triangular Cholesky factor `L` with `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(m: &Matrix) -> Result<Self> {
        Self::with_threshold(m, PD_PIVOT_TOL).map_err(|(column, pivot)| Error::NotPositiveDefinite {
            column,
            pivot,
        })
    }

    /// Factorizes `m`, returning `(column, pivot)` of the first pivot `<= tol`.
    fn with_threshold(m: &Matrix, tol: f64) -> std::result::Result<Self, (usize, f64)> {
        assert!(m.is_square(), "cholesky of non-square matrix");
        let n = m.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let lj = &l.row(j)[..j];
            let pivot = m[(j, j)] - dot(lj, lj);
            if pivot.is_nan() || pivot <= tol {
                return Err((j, pivot));
            }
            let d = pivot.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let s = m[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vector {
        let n = self.dim();
        assert_eq!(rhs.len(), n);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let s = dot(&self.l.row(i)[..i], &y[..i]);
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for (k, yk) in y.iter().enumerate().skip(i + 1) {
                s -= self.l[(k, i)] * yk;
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }
}

/// Solves `M y = rhs` for symmetric positive definite `M`.
pub fn solve_symmetric(m: &Matrix, rhs: &[f64]) -> Result<Vector> {
    Ok(Cholesky::new(m)?.solve(rhs))
}

/// Factorization of the KKT system of `min ½xᵀHx + gᵀx  s.t.  A x = h`
/// by the range-space method. Reusable for many right-hand sides.
#[derive(Debug, Clone)]
pub struct KktFactor {
    h: Cholesky,
    a: Matrix,
    /// `H⁻¹Aᵀ`, stored column-wise as rows.
    hinv_at: Vec<Vector>,
    schur: Option<Cholesky>,
}

impl KktFactor {
    pub fn new(h: &Matrix, a: &Matrix) -> Result<Self> {
        let hc = Cholesky::new(h)?;
        Self::with_cholesky(hc, a)
    }

    pub fn with_cholesky(h: Cholesky, a: &Matrix) -> Result<Self> {
        assert_eq!(a.cols(), h.dim(), "working-set width mismatch");
        let k = a.rows();
        let hinv_at: Vec<Vector> = (0..k).map(|i| h.solve(a.row(i))).collect();
        let schur = if k == 0 {
            None
        } else {
            let mut s = Matrix::zeros(k, k);
            for i in 0..k {
                for j in 0..=i {
                    let v = dot(a.row(i), &hinv_at[j]);
                    s[(i, j)] = v;
                    s[(j, i)] = v;
                }
            }
            Some(
                Cholesky::with_threshold(&s, RANK_PIVOT_TOL)
                    .map_err(|(row, pivot)| Error::RankDeficientWorkingSet { row, pivot })?,
            )
        };
        Ok(Self {
            h,
            a: a.clone(),
            hinv_at,
            schur,
        })
    }

    /// Returns `(x, λ)` with `Hx + g + Aᵀλ = 0` and `Ax = h`.
    pub fn solve(&self, g: &[f64], h_rhs: &[f64]) -> (Vector, Vector) {
        assert_eq!(h_rhs.len(), self.a.rows());
        let hinv_g = self.h.solve(g);
        let Some(schur) = &self.schur else {
            return (hinv_g.iter().map(|v| -v).collect(), Vec::new());
        };
        // A H⁻¹ Aᵀ λ = -h - A H⁻¹ g
        let rhs: Vector = (0..self.a.rows())
            .map(|i| -h_rhs[i] - dot(self.a.row(i), &hinv_g))
            .collect();
        let lambda = schur.solve(&rhs);
        let mut x: Vector = hinv_g.iter().map(|v| -v).collect();
        for (li, col) in lambda.iter().zip(&self.hinv_at) {
            axpy(-li, col, &mut x);
        }
        (x, lambda)
    }
}

/// One-shot KKT solve; see [`KktFactor::solve`].
pub fn kkt_solve(h: &Matrix, a_ws: &Matrix, g: &[f64], h_rhs: &[f64]) -> Result<(Vector, Vector)> {
    Ok(KktFactor::new(h, a_ws)?.solve(g, h_rhs))
}
