//! Quadratic functions of the parameter and the conservative dominance test
//! behind the certifier's cut: a node is pruned on a region only when its
//! value function is proven no better than a stored upper bound at every
//! point of the region.
//!
//! The proof is an αBB branch-and-bound: the difference `g = J_node − J̄` is
//! underestimated on the region's bounding box by the convex quadratic
//! `g + α Σ (θᵢ − lᵢ)(θᵢ − uᵢ)`, which is minimized exactly with the QP
//! solver. Failing that, the box is bisected. The test can miss true
//! dominance but never reports a false one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Polyhedron;
use crate::numerics::{dot, min_eigenvalue, Matrix, Vector};
use crate::qpsolve::{solve_qp, Qp, QpStatus};

/// `½ θᵀQθ + qᵀθ + c`, or `+∞` everywhere when `infinite` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFunc {
    pub q_mat: Matrix,
    pub q: Vector,
    pub c: f64,
    pub infinite: bool,
}

impl QuadraticFunc {
    pub fn new(q_mat: Matrix, q: Vector, c: f64) -> Self {
        assert!(q_mat.is_square() && q_mat.rows() == q.len());
        Self {
            q_mat,
            q,
            c,
            infinite: false,
        }
    }

    pub fn infinite(dim: usize) -> Self {
        Self {
            q_mat: Matrix::zeros(dim, dim),
            q: vec![0.0; dim],
            c: 0.0,
            infinite: true,
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(Matrix::zeros(dim, dim), vec![0.0; dim], c)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn evaluate(&self, theta: &[f64]) -> f64 {
        if self.infinite {
            return f64::INFINITY;
        }
        0.5 * dot(theta, &self.q_mat.matvec(theta)) + dot(&self.q, theta) + self.c
    }

    /// `self − other` for finite functions.
    pub fn difference(&self, other: &QuadraticFunc) -> QuadraticFunc {
        debug_assert!(!self.infinite && !other.infinite);
        QuadraticFunc::new(
            self.q_mat.sub(&other.q_mat),
            self.q.iter().zip(&other.q).map(|(a, b)| a - b).collect(),
            self.c - other.c,
        )
    }
}

/// Value functions of the integer-feasible relaxations found so far on one
/// certification path. Append-only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundCollection {
    members: Vec<QuadraticFunc>,
}

impl BoundCollection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, j: QuadraticFunc) {
        debug_assert!(!j.infinite, "infinite bounds are never stored");
        if !j.infinite {
            self.members.push(j);
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &QuadraticFunc> {
        self.members.iter()
    }

    /// Pointwise minimum, `+∞` when empty.
    pub fn evaluate_min(&self, theta: &[f64]) -> f64 {
        self.members.iter().map(|j| j.evaluate(theta)).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    Proven,
    NotProven,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceConfig {
    /// `g ≥ −margin` on the region counts as dominance.
    pub margin: f64,
    pub max_depth: usize,
}

impl Default for DominanceConfig {
    fn default() -> Self {
        Self {
            margin: 1e-9,
            max_depth: 10,
        }
    }
}

/// Is `j_node(θ) ≥ j_bar(θ)` for all `θ` in `region`?
pub fn dominates(j_node: &QuadraticFunc, j_bar: &QuadraticFunc, region: &Polyhedron) -> Result<Dominance> {
    dominates_with(j_node, j_bar, region, &DominanceConfig::default())
}

pub fn dominates_with(
    j_node: &QuadraticFunc,
    j_bar: &QuadraticFunc,
    region: &Polyhedron,
    cfg: &DominanceConfig,
) -> Result<Dominance> {
    if j_node.infinite {
        return Ok(Dominance::Proven);
    }
    assert!(!j_bar.infinite, "upper bounds are finite");
    let g = j_node.difference(j_bar);
    let lmin = min_eigenvalue(&g.q_mat);
    let alpha = (-lmin).max(0.0) / 2.0 + 1e-8;
    let prover = Prover { g: &g, alpha, cfg };
    match prover.prove(region, 0)? {
        Piece::Proven => Ok(Dominance::Proven),
        Piece::Refuted | Piece::Open => Ok(Dominance::NotProven),
    }
}

/// True if some member of `bounds` is proven dominated by `j_node`.
pub fn any_dominates(j_node: &QuadraticFunc, bounds: &BoundCollection, region: &Polyhedron) -> Result<bool> {
    any_dominates_with(j_node, bounds, region, &DominanceConfig::default())
}

pub fn any_dominates_with(
    j_node: &QuadraticFunc,
    bounds: &BoundCollection,
    region: &Polyhedron,
    cfg: &DominanceConfig,
) -> Result<bool> {
    if j_node.infinite {
        return Ok(true);
    }
    for j_bar in bounds.iter() {
        if dominates_with(j_node, j_bar, region, cfg)? == Dominance::Proven {
            return Ok(true);
        }
    }
    Ok(false)
}

enum Piece {
    Proven,
    /// A point with `g < −margin` was found.
    Refuted,
    /// Depth exhausted without a proof.
    Open,
}

struct Prover<'a> {
    g: &'a QuadraticFunc,
    alpha: f64,
    cfg: &'a DominanceConfig,
}

impl Prover<'_> {
    fn violates(&self, theta: &[f64]) -> bool {
        self.g.evaluate(theta) < -self.cfg.margin
    }

    fn prove(&self, region: &Polyhedron, depth: usize) -> Result<Piece> {
        let (l, u) = region.bounding_box()?;
        let (center, _) = region.chebyshev_center()?;
        if self.violates(&center) {
            return Ok(Piece::Refuted);
        }
        for corner in box_corners(&l, &u) {
            let p = if region.contains(&corner) {
                corner
            } else {
                let dir: Vector = corner.iter().zip(&center).map(|(a, b)| b - a).collect();
                region.minimize_linear(&dir)?
            };
            if self.violates(&p) {
                return Ok(Piece::Refuted);
            }
        }

        // convex underestimator L = g + α Σ (θᵢ − lᵢ)(θᵢ − uᵢ) on the box
        let n = l.len();
        let mut hess = self.g.q_mat.clone();
        for i in 0..n {
            hess[(i, i)] += 2.0 * self.alpha;
        }
        let lin: Vector = (0..n).map(|i| self.g.q[i] - self.alpha * (l[i] + u[i])).collect();
        let c = self.g.c + self.alpha * dot(&l, &u);
        let qp = Qp {
            h: hess,
            f: lin,
            g: region.a().clone(),
            g_rhs: region.b().to_vec(),
            geq: Matrix::zeros(0, n),
            beq: Vec::new(),
        };
        let lower = match solve_qp(&qp) {
            Ok(out) if out.status == QpStatus::Optimal => {
                if self.violates(&out.x) {
                    return Ok(Piece::Refuted);
                }
                Some(out.objective + c)
            }
            Ok(_)
            | Err(Error::RankDeficientWorkingSet { .. })
            | Err(Error::NotPositiveDefinite { .. })
            | Err(Error::IterationCapExceeded { .. }) => None,
            Err(e) => return Err(e),
        };
        if lower.is_some_and(|v| v >= -self.cfg.margin) {
            return Ok(Piece::Proven);
        }
        if depth >= self.cfg.max_depth {
            return Ok(Piece::Open);
        }

        let k = (0..n)
            .max_by(|&i, &j| (u[i] - l[i]).total_cmp(&(u[j] - l[j])))
            .expect("nonzero dimension");
        let mid = 0.5 * (l[k] + u[k]);
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let lower_half = region.with_halfspace(&e, mid);
        e[k] = -1.0;
        let upper_half = region.with_halfspace(&e, -mid);
        let mut open = false;
        for piece in [lower_half, upper_half] {
            if piece.is_empty()? {
                continue;
            }
            match self.prove(&piece, depth + 1)? {
                Piece::Proven => {}
                Piece::Refuted => return Ok(Piece::Refuted),
                Piece::Open => open = true,
            }
        }
        Ok(if open { Piece::Open } else { Piece::Proven })
    }
}

fn box_corners(l: &[f64], u: &[f64]) -> Vec<Vector> {
    let n = l.len();
    (0..1usize << n)
        .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { u[i] } else { l[i] }).collect())
        .collect()
}
