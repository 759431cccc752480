//! Dual active-set (Goldfarb–Idnani) solver for strictly convex QPs
//!
//! ```text
//!     min  ½ xᵀHx + fᵀx   s.t.  G x ≤ g,  Geq x = beq
//! ```
//!
//! The iteration count `κ` is the number of equality-constrained KKT
//! systems solved: one for the start point and one per working-set change.
//! Every decision uses lowest-row-index tie-breaking so that the parametric
//! certifier in [`crate::qpcert`] can replay the same rules symbolically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, norm_inf, Cholesky, KktFactor, Matrix, Vector};
use crate::problem::AssembledQp;

/// A row is violated when its slack is below `-PRIMAL_TOL`.
pub const PRIMAL_TOL: f64 = 1e-9;
/// Directions and dual-direction entries at or below this are treated as zero.
pub const NULL_TOL: f64 = 1e-10;
/// Relative tolerance under which two compared quantities count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// `a < b` by more than the tie tolerance. Ties go to the lower row index,
/// which callers express by iterating rows in ascending order.
#[inline]
pub fn strictly_less(a: f64, b: f64) -> bool {
    a < b - TIE_TOL * (1.0f64).max(a.abs()).max(b.abs())
}

/// A QP at a fixed parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct Qp {
    pub h: Matrix,
    pub f: Vector,
    pub g: Matrix,
    pub g_rhs: Vector,
    pub geq: Matrix,
    pub beq: Vector,
}

impl Qp {
    pub fn n(&self) -> usize {
        self.h.rows()
    }

    pub fn n_ineq(&self) -> usize {
        self.g.rows()
    }

    pub fn n_eq(&self) -> usize {
        self.geq.rows()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.h.matvec(x)) + dot(&self.f, x)
    }

    pub fn iteration_cap(&self) -> usize {
        10 * (self.n() + self.n_ineq() + self.n_eq())
    }
}

/// Constraints imposed as equalities: all equality rows plus the listed
/// inequality rows, in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorkingSet {
    pub eq_rows: Vec<usize>,
    pub ineq_rows: Vec<usize>,
}

impl WorkingSet {
    pub fn equalities_only(n_eq: usize) -> Self {
        Self {
            eq_rows: (0..n_eq).collect(),
            ineq_rows: Vec::new(),
        }
    }

    pub fn contains_ineq(&self, row: usize) -> bool {
        self.ineq_rows.contains(&row)
    }

    /// Inequality rows sorted ascending.
    pub fn sorted_ineq(&self) -> Vec<usize> {
        let mut v = self.ineq_rows.clone();
        v.sort_unstable();
        v
    }

    /// Stacked constraint matrix `[Geq; G_W]`.
    pub fn matrix(&self, geq: &Matrix, g: &Matrix) -> Matrix {
        let mut m = geq.select_rows(&self.eq_rows);
        for &r in &self.ineq_rows {
            m.push_row(g.row(r));
        }
        m
    }
}

/// Primal direction `z` and dual direction `r` for adding row `p`: moving
/// the multiplier of `p` up by `t` changes `x` by `t z` and the working-set
/// multipliers by `-t r`. Both are independent of the right-hand sides.
#[derive(Debug, Clone)]
pub struct AddDirections {
    pub z: Vector,
    /// Entries for the equality rows first, then the active inequality rows.
    pub r: Vector,
}

impl AddDirections {
    pub fn compute(chol: &Cholesky, ws_matrix: &Matrix, row_p: &[f64]) -> Result<Self> {
        let factor = KktFactor::with_cholesky(chol.clone(), ws_matrix)?;
        let zeros = vec![0.0; ws_matrix.rows()];
        let (z, lam) = factor.solve(row_p, &zeros);
        Ok(Self {
            z,
            r: lam.iter().map(|v| -v).collect(),
        })
    }

    pub fn z_is_null(&self) -> bool {
        norm_inf(&self.z) <= NULL_TOL
    }

    /// Positions (into the active inequality list) whose multiplier decreases.
    pub fn blocking_positions(&self, n_eq: usize) -> Vec<usize> {
        self.r[n_eq..]
            .iter()
            .enumerate()
            .filter(|(_, r)| **r > NULL_TOL)
            .map(|(k, _)| k)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpOutcome {
    pub status: QpStatus,
    pub x: Vector,
    /// Inequality multipliers, zero for rows outside the working set.
    pub lambda: Vector,
    pub lambda_eq: Vector,
    pub active_set: WorkingSet,
    /// Objective value, `+∞` when infeasible.
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkingSetChange {
    Add(usize),
    Drop(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub change: WorkingSetChange,
    /// Violated row being added while this step was taken.
    pub target: usize,
    pub dual_objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QpTrace {
    pub initial_dual_objective: f64,
    pub steps: Vec<TraceStep>,
}

/// Solves the relaxation `qp` at parameter `theta`.
pub fn solve(qp: &AssembledQp, theta: &[f64]) -> Result<QpOutcome> {
    solve_qp(&qp.at(theta))
}

pub fn solve_qp(qp: &Qp) -> Result<QpOutcome> {
    DualActiveSet::new(qp)?.run(None)
}

/// Like [`solve_qp`], also recording every working-set change.
pub fn solve_qp_traced(qp: &Qp) -> Result<(QpOutcome, QpTrace)> {
    let mut trace = QpTrace::default();
    let out = DualActiveSet::new(qp)?.run(Some(&mut trace))?;
    Ok((out, trace))
}

struct DualActiveSet<'a> {
    qp: &'a Qp,
    chol: Cholesky,
    ws: WorkingSet,
    x: Vector,
    lam_eq: Vector,
    /// Multipliers aligned with `ws.ineq_rows`.
    lam_in: Vector,
    kappa: usize,
}

impl<'a> DualActiveSet<'a> {
    fn new(qp: &'a Qp) -> Result<Self> {
        let chol = Cholesky::new(&qp.h)?;
        let ws = WorkingSet::equalities_only(qp.n_eq());
        let factor = KktFactor::with_cholesky(chol.clone(), &qp.geq)?;
        let (x, lam_eq) = factor.solve(&qp.f, &qp.beq);
        Ok(Self {
            qp,
            chol,
            ws,
            x,
            lam_eq,
            lam_in: Vec::new(),
            kappa: 1,
        })
    }

    fn slack(&self, row: usize) -> f64 {
        self.qp.g_rhs[row] - dot(self.qp.g.row(row), &self.x)
    }

    fn dual_objective(&self, pending: Option<(usize, f64)>) -> f64 {
        let qp = self.qp;
        let mut d = qp.objective(&self.x);
        for (k, &r) in self.ws.eq_rows.iter().enumerate() {
            d += self.lam_eq[k] * (dot(qp.geq.row(r), &self.x) - qp.beq[r]);
        }
        for (k, &r) in self.ws.ineq_rows.iter().enumerate() {
            d -= self.lam_in[k] * self.slack(r);
        }
        if let Some((p, lp)) = pending {
            d -= lp * self.slack(p);
        }
        d
    }

    fn bump(&mut self) -> Result<()> {
        self.kappa += 1;
        let cap = self.qp.iteration_cap();
        if self.kappa > cap {
            return Err(Error::IterationCapExceeded { cap });
        }
        Ok(())
    }

    fn take_step(&mut self, t: f64, dir: &AddDirections) {
        let n_eq = self.ws.eq_rows.len();
        axpy(t, &dir.z, &mut self.x);
        for (l, r) in self.lam_eq.iter_mut().zip(&dir.r[..n_eq]) {
            *l -= t * r;
        }
        for (l, r) in self.lam_in.iter_mut().zip(&dir.r[n_eq..]) {
            *l -= t * r;
        }
    }

    /// Most violated inequality row outside the working set.
    fn most_violated(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.qp.n_ineq() {
            if self.ws.contains_ineq(i) {
                continue;
            }
            let s = self.slack(i);
            match best {
                Some((_, bs)) if !strictly_less(s, bs) => {}
                _ => best = Some((i, s)),
            }
        }
        best.filter(|(_, s)| *s < -PRIMAL_TOL).map(|(i, _)| i)
    }

    fn run(mut self, mut trace: Option<&mut QpTrace>) -> Result<QpOutcome> {
        if let Some(t) = trace.as_deref_mut() {
            t.initial_dual_objective = self.dual_objective(None);
        }
        let n_eq = self.ws.eq_rows.len();
        while let Some(p) = self.most_violated() {
            let row_p = self.qp.g.row(p).to_vec();
            let mut lam_p = 0.0;
            loop {
                let ws_matrix = self.ws.matrix(&self.qp.geq, &self.qp.g);
                let dir = AddDirections::compute(&self.chol, &ws_matrix, &row_p)?;
                let z_null = dir.z_is_null();

                let mut block: Option<(usize, f64)> = None;
                for k in dir.blocking_positions(n_eq) {
                    let ratio = self.lam_in[k] / dir.r[n_eq + k];
                    let row = self.ws.ineq_rows[k];
                    block = match block {
                        None => Some((k, ratio)),
                        Some((bk, br)) => {
                            let brow = self.ws.ineq_rows[bk];
                            if strictly_less(ratio, br) || (!strictly_less(br, ratio) && row < brow) {
                                Some((k, ratio))
                            } else {
                                Some((bk, br))
                            }
                        }
                    };
                }

                let full_step = if z_null {
                    None
                } else {
                    Some(self.slack(p) / dot(&row_p, &dir.z))
                };

                match (block, full_step) {
                    (None, None) => {
                        return Ok(self.finish(QpStatus::Infeasible));
                    }
                    (Some((k, t1)), t2) if t2.is_none_or(|t2| strictly_less(t1, t2)) => {
                        self.take_step(t1, &dir);
                        lam_p += t1;
                        let dropped = self.ws.ineq_rows.remove(k);
                        self.lam_in.remove(k);
                        self.bump()?;
                        if let Some(t) = trace.as_deref_mut() {
                            let dual_objective = self.dual_objective(Some((p, lam_p)));
                            t.steps.push(TraceStep {
                                change: WorkingSetChange::Drop(dropped),
                                target: p,
                                dual_objective,
                            });
                        }
                    }
                    (_, Some(t2)) => {
                        self.take_step(t2, &dir);
                        lam_p += t2;
                        self.ws.ineq_rows.push(p);
                        self.lam_in.push(lam_p);
                        self.bump()?;
                        if let Some(t) = trace.as_deref_mut() {
                            let dual_objective = self.dual_objective(None);
                            t.steps.push(TraceStep {
                                change: WorkingSetChange::Add(p),
                                target: p,
                                dual_objective,
                            });
                        }
                        break;
                    }
                    (Some(_), None) => unreachable!("guard accepts any block when z is null"),
                }
            }
        }
        Ok(self.finish(QpStatus::Optimal))
    }

    fn finish(self, status: QpStatus) -> QpOutcome {
        let mut lambda = vec![0.0; self.qp.n_ineq()];
        for (k, &r) in self.ws.ineq_rows.iter().enumerate() {
            lambda[r] = self.lam_in[k];
        }
        let objective = match status {
            QpStatus::Optimal => self.qp.objective(&self.x),
            QpStatus::Infeasible => f64::INFINITY,
        };
        QpOutcome {
            status,
            x: self.x,
            lambda,
            lambda_eq: self.lam_eq,
            active_set: self.ws,
            objective,
            iterations: self.kappa,
        }
    }
}

/// ∞-norm residuals of the KKT conditions at an outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    /// Smallest inequality multiplier; 0 when there are no inequality rows.
    pub dual_min: f64,
    pub comp_slack: f64,
}

pub fn kkt_residuals(qp: &Qp, out: &QpOutcome) -> KktResiduals {
    let mut grad = qp.h.matvec(&out.x);
    axpy(1.0, &qp.f, &mut grad);
    axpy(1.0, &qp.geq.t_matvec(&out.lambda_eq), &mut grad);
    axpy(1.0, &qp.g.t_matvec(&out.lambda), &mut grad);
    let eq_res = (0..qp.n_eq())
        .map(|i| (dot(qp.geq.row(i), &out.x) - qp.beq[i]).abs())
        .fold(0.0, f64::max);
    let ineq_res = (0..qp.n_ineq())
        .map(|i| (dot(qp.g.row(i), &out.x) - qp.g_rhs[i]).max(0.0))
        .fold(0.0, f64::max);
    let dual_min = out.lambda.iter().copied().fold(f64::INFINITY, f64::min);
    let comp_slack = (0..qp.n_ineq())
        .map(|i| (out.lambda[i] * (qp.g_rhs[i] - dot(qp.g.row(i), &out.x))).abs())
        .fold(0.0, f64::max);
    KktResiduals {
        stationarity: norm_inf(&grad),
        primal: eq_res.max(ineq_res),
        dual_min: if dual_min.is_finite() { dual_min } else { 0.0 },
        comp_slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_qp(rows: &[f64], rhs: &[f64]) -> Qp {
        Qp {
            h: Matrix::identity(1),
            f: vec![0.0],
            g: Matrix::from_rows(&rows.iter().map(|r| [*r]).collect::<Vec<_>>(), 1),
            g_rhs: rhs.to_vec(),
            geq: Matrix::zeros(0, 1),
            beq: vec![],
        }
    }

    #[test]
    fn lower_bound_needs_one_addition() {
        // x ≥ 1 written as −x ≤ −1
        let out = solve_qp(&scalar_qp(&[-1.0], &[-1.0])).unwrap();
        assert_eq!(out.status, QpStatus::Optimal);
        assert!((out.x[0] - 1.0).abs() < 1e-14);
        assert_eq!(out.iterations, 2);
        assert_eq!(out.active_set.ineq_rows, vec![0]);
    }

    #[test]
    fn inactive_bound_is_one_iteration() {
        let out = solve_qp(&scalar_qp(&[1.0], &[1.0])).unwrap();
        assert_eq!(out.x, vec![0.0]);
        assert_eq!(out.iterations, 1);
        assert!(out.active_set.ineq_rows.is_empty());
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let out = solve_qp(&scalar_qp(&[-1.0, 1.0], &[-1.0, 0.0])).unwrap();
        assert_eq!(out.status, QpStatus::Infeasible);
        assert_eq!(out.objective, f64::INFINITY);
    }

    #[test]
    fn residual_examples() {
        let qp = scalar_qp(&[-1.0], &[-1.0]);
        let out = solve_qp(&qp).unwrap();
        let r = kkt_residuals(&qp, &out);
        assert!(r.stationarity <= 1e-9 && r.primal <= 1e-9 && r.comp_slack <= 1e-9);
        assert!(r.dual_min >= 0.0);

        let mut bumped = out.clone();
        bumped.x[0] += 1e-3;
        assert!(kkt_residuals(&qp, &bumped).stationarity >= 1e-4);

        let eq_only = Qp {
            h: Matrix::identity(2),
            f: vec![0.0, 0.0],
            g: Matrix::zeros(0, 2),
            g_rhs: vec![],
            geq: Matrix::from_rows(&[[1.0, 1.0]], 2),
            beq: vec![2.0],
        };
        let out = solve_qp(&eq_only).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-14);
        let r = kkt_residuals(&eq_only, &out);
        assert_eq!(r.dual_min, 0.0);
        assert!(r.stationarity <= 1e-12);
    }

    #[test]
    fn drop_step_then_add() {
        // min ½‖x‖² − 2x₁  s.t. x₁ + x₂ ≤ 1, x₁ ≤ 0.25 → needs a drop on some paths
        let qp = Qp {
            h: Matrix::identity(2),
            f: vec![-2.0, 1.0],
            g: Matrix::from_rows(&[[1.0, 1.0], [1.0, 0.0], [0.0, -1.0]], 2),
            g_rhs: vec![1.0, 0.25, 0.5],
            geq: Matrix::zeros(0, 2),
            beq: vec![],
        };
        let (out, trace) = solve_qp_traced(&qp).unwrap();
        assert_eq!(out.status, QpStatus::Optimal);
        assert_eq!(out.iterations, 1 + trace.steps.len());
        let r = kkt_residuals(&qp, &out);
        assert!(r.stationarity <= 1e-9 && r.primal <= 1e-9 && r.dual_min >= -1e-12);
    }
}
