//! Dense linear algebra, symmetric eigenvalues and a small LP solver.

mod eigen;
mod linalg;
mod lp;
mod matrix;

pub use eigen::{min_eigenvalue, symmetric_eigenvalues};
pub use linalg::{kkt_solve, solve_symmetric, Cholesky, KktFactor, PD_PIVOT_TOL, RANK_PIVOT_TOL};
pub use lp::{lp_feasible, lp_solve, LpResult, LpStatus, LP_EPS};
pub use matrix::{add, axpy, dot, norm2, norm_inf, sub, Matrix, Vector};
