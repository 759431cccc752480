//! Small dense linear programs `min cᵀy  s.t.  A y ≤ b` with free `y`.
//!
//! Primal active-set method on the inequality form: the working rows are kept
//! linearly independent, the step direction is the projection of `−c` onto
//! their null space, and a row leaves only when the projection vanishes and
//! its multiplier is negative. Every iteration recomputes the point and the
//! multipliers from a fresh QR factorization of the working rows, so no
//! round-off accumulates across iterations. Row choices follow the
//! lowest-index rule, which prevents cycling on degenerate vertices.
//! Intended for few variables (the parameter dimension) and tens of rows.

use super::matrix::{dot, norm2, Matrix, Vector};
use crate::error::{Error, Result};

/// Feasibility tolerance: returned optimizers satisfy `A y ≤ b + LP_EPS`.
pub const LP_EPS: f64 = 1e-9;
const STATIONARY_TOL: f64 = 1e-12;
const MULTIPLIER_TOL: f64 = 1e-11;
const BLOCKING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub optimizer: Vector,
    pub objective: f64,
}

impl LpResult {
    fn without_point(status: LpStatus, n: usize) -> Self {
        let objective = match status {
            LpStatus::Infeasible => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        };
        Self {
            status,
            optimizer: vec![0.0; n],
            objective,
        }
    }
}

/// Solves `min cᵀy  s.t.  A y ≤ b`.
pub fn lp_solve(c: &[f64], a: &Matrix, b: &[f64]) -> Result<LpResult> {
    let (m, n) = a.shape();
    assert_eq!(c.len(), n, "cost length mismatch");
    assert_eq!(b.len(), m, "rhs length mismatch");

    let Some((y, shift)) = phase_one(a, b)? else {
        return Ok(LpResult::without_point(LpStatus::Infeasible, n));
    };
    let b_feas: Vector = b.iter().map(|v| v + shift).collect();
    match ActiveSet::new(a, &b_feas, c).run(y)? {
        Some(optimizer) => {
            let objective = dot(c, &optimizer);
            Ok(LpResult {
                status: LpStatus::Optimal,
                optimizer,
                objective,
            })
        }
        None => Ok(LpResult::without_point(LpStatus::Unbounded, n)),
    }
}

/// Is `{y : A y ≤ b}` nonempty?
pub fn lp_feasible(a: &Matrix, b: &[f64]) -> Result<bool> {
    Ok(phase_one(a, b)?.is_some())
}

/// A point with `A y ≤ b + shift`, `0 ≤ shift ≤ LP_EPS`, or `None` if the
/// smallest achievable uniform violation exceeds `LP_EPS`.
fn phase_one(a: &Matrix, b: &[f64]) -> Result<Option<(Vector, f64)>> {
    let (m, n) = a.shape();
    let worst = b.iter().map(|v| -v).fold(0.0, f64::max);
    if worst <= 0.0 {
        return Ok(Some((vec![0.0; n], 0.0)));
    }
    // min s  s.t.  a_iᵀy − s ≤ b_i,  −s ≤ 1
    let mut aux = Matrix::zeros(0, n + 1);
    let mut row = vec![0.0; n + 1];
    for i in 0..m {
        row[..n].copy_from_slice(a.row(i));
        row[n] = -1.0;
        aux.push_row(&row);
    }
    let mut bound = vec![0.0; n + 1];
    bound[n] = -1.0;
    aux.push_row(&bound);
    let mut b_aux = b.to_vec();
    b_aux.push(1.0);
    let mut cost = vec![0.0; n + 1];
    cost[n] = 1.0;
    let mut start = vec![0.0; n + 1];
    start[n] = worst;
    let z = ActiveSet::new(&aux, &b_aux, &cost)
        .run(start)?
        .expect("phase one is bounded below");
    let y = z[..n].to_vec();
    let viol = (0..m).map(|i| dot(a.row(i), &y) - b[i]).fold(0.0, f64::max);
    if viol > LP_EPS {
        return Ok(None);
    }
    Ok(Some((y, viol)))
}

struct ActiveSet<'a> {
    a: &'a Matrix,
    b: &'a [f64],
    c: &'a [f64],
    c_scale: f64,
}

impl<'a> ActiveSet<'a> {
    fn new(a: &'a Matrix, b: &'a [f64], c: &'a [f64]) -> Self {
        let c_scale = c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        Self { a, b, c, c_scale }
    }

    /// Optimizer from the feasible start `y`, or `None` if unbounded.
    fn run(&self, mut y: Vector) -> Result<Option<Vector>> {
        let (m, n) = self.a.shape();
        let mut work: Vec<usize> = Vec::new();
        let cap = 50 * (m + n) + 100;
        for _ in 0..cap {
            let qr = Qr::new(self.a, &work, n);
            y = qr.project_onto(self.a, self.b, &work, &y);
            let d = qr.null_projection(self.c);
            let dn = norm2(&d);
            if dn <= STATIONARY_TOL * self.c_scale {
                let u = qr.multipliers(self.c);
                let leave = (0..work.len())
                    .filter(|&k| u[k] < -MULTIPLIER_TOL * self.c_scale)
                    .min_by_key(|&k| work[k]);
                match leave {
                    None => return Ok(Some(y)),
                    Some(k) => {
                        work.remove(k);
                        continue;
                    }
                }
            }
            let d: Vector = d.iter().map(|v| -v / dn).collect();
            let mut block: Option<(usize, f64)> = None;
            for i in (0..m).filter(|i| !work.contains(i)) {
                let ai = self.a.row(i);
                let rate = dot(ai, &d);
                if rate <= BLOCKING_TOL * norm2(ai) {
                    continue;
                }
                let t = (self.b[i] - dot(ai, &y)).max(0.0) / rate;
                // ascending scan: ties keep the lower index
                if block.is_none_or(|(_, bt)| t < bt - 1e-12 * bt.max(1.0)) {
                    block = Some((i, t));
                }
            }
            let Some((i, t)) = block else {
                return Ok(None);
            };
            for (yj, dj) in y.iter_mut().zip(&d) {
                *yj += t * dj;
            }
            work.push(i);
        }
        Err(Error::NumericalFailure(format!("LP active-set cap {cap} exceeded")))
    }
}

/// Householder QR of `A_Wᵀ` (`n × k`), holding the full orthogonal factor.
struct Qr {
    /// Columns `0..k` span the working rows, `k..n` their null space.
    q: Matrix,
    /// `k × k` upper triangular.
    r: Matrix,
}

impl Qr {
    fn new(a: &Matrix, work: &[usize], n: usize) -> Self {
        let k = work.len();
        let mut m = Matrix::zeros(n, k);
        for (j, &row) in work.iter().enumerate() {
            for (i, v) in a.row(row).iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        let mut q = Matrix::identity(n);
        for j in 0..k {
            let x: Vector = (j..n).map(|i| m[(i, j)]).collect();
            let alpha = if x[0] >= 0.0 { -norm2(&x) } else { norm2(&x) };
            let mut v = x;
            v[0] -= alpha;
            let vn = norm2(&v);
            if vn == 0.0 {
                continue;
            }
            for e in v.iter_mut() {
                *e /= vn;
            }
            for col in j..k {
                let s: f64 = (j..n).map(|i| v[i - j] * m[(i, col)]).sum();
                for i in j..n {
                    m[(i, col)] -= 2.0 * v[i - j] * s;
                }
            }
            for row in 0..n {
                let s: f64 = (j..n).map(|i| q[(row, i)] * v[i - j]).sum();
                for i in j..n {
                    q[(row, i)] -= 2.0 * s * v[i - j];
                }
            }
        }
        let mut r = Matrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                r[(i, j)] = m[(i, j)];
            }
        }
        Self { q, r }
    }

    fn k(&self) -> usize {
        self.r.rows()
    }

    /// `Q₂Q₂ᵀ v`.
    fn null_projection(&self, v: &[f64]) -> Vector {
        let (n, k) = (self.q.rows(), self.k());
        let mut out = vec![0.0; n];
        for j in k..n {
            let s: f64 = (0..n).map(|i| self.q[(i, j)] * v[i]).sum();
            for (i, o) in out.iter_mut().enumerate() {
                *o += s * self.q[(i, j)];
            }
        }
        out
    }

    /// `u` with `A_Wᵀ u = −c` in the least-squares sense.
    fn multipliers(&self, c: &[f64]) -> Vector {
        let (n, k) = (self.q.rows(), self.k());
        let mut u: Vector = (0..k).map(|j| -(0..n).map(|i| self.q[(i, j)] * c[i]).sum::<f64>()).collect();
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| self.r[(i, j)] * u[j]).sum();
            u[i] = (u[i] - s) / self.r[(i, i)];
        }
        u
    }

    /// Nearest point to `y` on `{A_W y = b_W}`.
    fn project_onto(&self, a: &Matrix, b: &[f64], work: &[usize], y: &[f64]) -> Vector {
        let (n, k) = (self.q.rows(), self.k());
        let mut w: Vector = work.iter().map(|&i| b[i] - dot(a.row(i), y)).collect();
        // Rᵀ w' = w
        for i in 0..k {
            let s: f64 = (0..i).map(|j| self.r[(j, i)] * w[j]).sum();
            w[i] = (w[i] - s) / self.r[(i, i)];
        }
        let mut out = y.to_vec();
        for (j, wj) in w.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate().take(n) {
                *o += self.q[(i, j)] * wj;
            }
        }
        out
    }
}
