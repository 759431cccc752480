//! Depth-first branch-and-bound for a single parameter value, accumulating
//! the active-set iteration count of every relaxation it solves.

use crate::error::Result;
use crate::numerics::Vector;
use crate::problem::{MpMiqp, Relaxation};
use crate::qpsolve::{self, QpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CutReason {
    /// Node was branched.
    None,
    /// Infeasible, or no better than the incumbent.
    Dominated,
    /// Relaxation optimum is integral; it became the incumbent.
    IntegerFeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub node: Relaxation,
    pub kappa: usize,
    pub objective: f64,
    pub cut: CutReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    /// Objective of the incumbent, `+∞` if none was found.
    pub j_best: f64,
    pub x_best: Option<Vector>,
    pub total_kappa: usize,
    /// Nodes in processing order.
    pub nodes: Vec<NodeRecord>,
}

impl SolveTrace {
    pub fn nodes_explored(&self) -> usize {
        self.nodes.len()
    }
}

/// Solves the MIQP at `theta`. Branching is on the lowest-index free binary;
/// the 1-child is pushed before the 0-child so the 0-branch is explored
/// first.
pub fn solve_miqp(p: &MpMiqp, theta: &[f64]) -> Result<SolveTrace> {
    p.instantiate(theta)?;
    let mut stack = vec![p.root()];
    let mut trace = SolveTrace {
        j_best: f64::INFINITY,
        x_best: None,
        total_kappa: 0,
        nodes: Vec::new(),
    };
    while let Some(node) = stack.pop() {
        let qp = p.assemble(&node);
        let out = qpsolve::solve(&qp, theta)?;
        trace.total_kappa += out.iterations;
        let cut = if out.objective >= trace.j_best {
            CutReason::Dominated
        } else if out.status == QpStatus::Optimal && qp.is_integer_feasible(&out.active_set.ineq_rows) {
            trace.j_best = out.objective;
            trace.x_best = Some(out.x.clone());
            CutReason::IntegerFeasible
        } else {
            let k = qp
                .branching_variable()
                .expect("a relaxation with every binary fixed is integer feasible");
            stack.push(node.fix(k, true));
            stack.push(node.fix(k, false));
            CutReason::None
        };
        trace.nodes.push(NodeRecord {
            node,
            kappa: out.iterations,
            objective: out.objective,
            cut,
        });
    }
    Ok(trace)
}

/// Exhaustive oracle: solves the QP of every complete binary assignment.
pub fn bruteforce_miqp(p: &MpMiqp, theta: &[f64]) -> Result<(f64, Option<Vector>)> {
    let nb = p.n_b();
    assert!(nb <= 16, "enumeration limited to 16 binaries");
    let mut best = (f64::INFINITY, None);
    for mask in 0u32..(1 << nb) {
        let mut r = Relaxation::default();
        for (bit, &i) in p.binary_indices.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                r.b1.insert(i);
            } else {
                r.b0.insert(i);
            }
        }
        let out = qpsolve::solve(&p.assemble(&r), theta)?;
        if out.status == QpStatus::Optimal && out.objective < best.0 {
            best = (out.objective, Some(out.x));
        }
    }
    Ok(best)
}
