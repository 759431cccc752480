//! Parametric replay of the dual active-set solver over a parameter region.
//!
//! For a fixed working set the iterate `x(θ)` and the multipliers `λ(θ)` are
//! affine in `θ`, while the step directions do not depend on `θ` at all.
//! Every decision of the online solver (which row is most violated, which
//! multiplier blocks first, whether the primal step is shorter) is therefore
//! a comparison of affine functions, and splitting the region along those
//! comparisons yields polyhedral leaves on which the whole iteration
//! sequence, and hence `κ`, is fixed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polyhedron, ZERO_NORMAL_TOL};
use crate::numerics::{dot, norm2, Cholesky, KktFactor, Matrix, Vector};
use crate::problem::{AssembledQp, MpMiqp, Relaxation};
use crate::pwq::QuadraticFunc;
use crate::qpsolve::{AddDirections, WorkingSet, PRIMAL_TOL, TIE_TOL};

/// Child regions whose largest inscribed ball is no wider than this are
/// dropped as lower-dimensional.
pub const FLAT_RADIUS: f64 = 1e-8;

/// `aᵀθ + c`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineFn {
    pub a: Vector,
    pub c: f64,
}

impl AffineFn {
    pub fn constant(dim: usize, c: f64) -> Self {
        Self { a: vec![0.0; dim], c }
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        dot(&self.a, theta) + self.c
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            a: self.a.iter().map(|v| v * s).collect(),
            c: self.c * s,
        }
    }

    /// `self·α + other·β`
    pub fn combine(&self, alpha: f64, other: &AffineFn, beta: f64) -> Self {
        Self {
            a: self.a.iter().zip(&other.a).map(|(x, y)| alpha * x + beta * y).collect(),
            c: alpha * self.c + beta * other.c,
        }
    }

    fn add_scaled(&mut self, other: &AffineFn, s: f64) {
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x += s * y;
        }
        self.c += s * other.c;
    }
}

/// Vector-valued `F θ + g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub f: Matrix,
    pub g: Vector,
}

impl AffineMap {
    pub fn eval(&self, theta: &[f64]) -> Vector {
        let mut v = self.f.matvec(theta);
        for (vi, gi) in v.iter_mut().zip(&self.g) {
            *vi += gi;
        }
        v
    }

    pub fn component(&self, i: usize) -> AffineFn {
        AffineFn {
            a: self.f.row(i).to_vec(),
            c: self.g[i],
        }
    }

    /// `rowᵀ (Fθ + g)` as an affine function.
    pub fn dot_row(&self, row: &[f64]) -> AffineFn {
        AffineFn {
            a: self.f.t_matvec(row),
            c: dot(row, &self.g),
        }
    }

    /// `self += z · t(θ)` for a constant vector `z`.
    fn add_outer(&mut self, z: &[f64], t: &AffineFn) {
        for (i, zi) in z.iter().enumerate() {
            if *zi == 0.0 {
                continue;
            }
            for (fij, aj) in self.f.row_mut(i).iter_mut().zip(&t.a) {
                *fij += zi * aj;
            }
            self.g[i] += zi * t.c;
        }
    }
}

/// A terminated branch of the replay.
#[derive(Debug, Clone, PartialEq)]
pub struct CertLeaf {
    pub region: Polyhedron,
    pub kappa: usize,
    pub active_set: WorkingSet,
    /// Value function on the leaf; infinite when the relaxation is infeasible.
    pub value: QuadraticFunc,
    /// Parametric optimizer; `None` when infeasible.
    pub x: Option<AffineMap>,
    pub path: String,
}

impl CertLeaf {
    pub fn is_infeasible(&self) -> bool {
        self.value.infinite
    }
}

/// A comparison that held identically (zero normal, zero offset) on a region
/// and was resolved by the lowest-index rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyWarning {
    pub path: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct QpCertOutput {
    pub leaves: Vec<CertLeaf>,
    pub warnings: Vec<DegeneracyWarning>,
}

/// Certifies relaxation `r` of `p` over `region`.
pub fn qpcert(p: &MpMiqp, r: &Relaxation, region: &Polyhedron) -> Result<QpCertOutput> {
    qpcert_assembled(&p.assemble(r), region)
}

pub fn qpcert_assembled(qp: &AssembledQp, region: &Polyhedron) -> Result<QpCertOutput> {
    Replay::new(qp)?.run(region)
}

/// `J(θ) = ½ x(θ)ᵀ H x(θ) + (f + Fθ)ᵀ x(θ)` expanded as a quadratic in `θ`.
pub fn value_function(x: &AffineMap, qp: &AssembledQp) -> QuadraticFunc {
    let xf = &x.f;
    let hx = qp.h.matmul(xf);
    let xt = xf.transpose();
    let ft_x = qp.f_lin.transpose().matmul(xf);
    let q = xt.matmul(&hx).add(&ft_x).add(&ft_x.transpose()).symmetrized();
    let hx0 = qp.h.matvec(&x.g);
    let mut lin = xt.matvec(&hx0);
    for (li, v) in lin.iter_mut().zip(xt.matvec(&qp.f_const)) {
        *li += v;
    }
    for (li, v) in lin.iter_mut().zip(qp.f_lin.t_matvec(&x.g)) {
        *li += v;
    }
    let c = 0.5 * dot(&x.g, &hx0) + dot(&qp.f_const, &x.g);
    QuadraticFunc::new(q, lin, c)
}

#[derive(Debug, Clone)]
struct State {
    region: Polyhedron,
    ws: WorkingSet,
    x: AffineMap,
    /// Aligned with `ws.ineq_rows`.
    lam: Vec<AffineFn>,
    pending: Option<(usize, AffineFn)>,
    kappa: usize,
    path: String,
}

/// Result of intersecting a region with one comparison.
enum Cut {
    Region(Polyhedron),
    Infeasible,
}

struct Replay<'a> {
    qp: &'a AssembledQp,
    chol: Cholesky,
    cap: usize,
    warnings: Vec<DegeneracyWarning>,
}

impl<'a> Replay<'a> {
    fn new(qp: &'a AssembledQp) -> Result<Self> {
        Ok(Self {
            qp,
            chol: Cholesky::new(&qp.h)?,
            cap: 10 * (qp.n() + qp.n_ineq() + qp.n_eq()),
            warnings: Vec::new(),
        })
    }

    fn nt(&self) -> usize {
        self.qp.n_theta()
    }

    fn slack(&self, x: &AffineMap, row: usize) -> AffineFn {
        let gx = x.dot_row(self.qp.g.row(row));
        AffineFn {
            a: self.qp.g_lin.row(row).iter().zip(&gx.a).map(|(w, v)| w - v).collect(),
            c: self.qp.g_const[row] - gx.c,
        }
    }

    /// Intersects `region` with `phi(θ) ≤ 0` (or `< 0` when `strict`). The
    /// strictness only matters when `phi` is constant; otherwise the closed
    /// halfspace is used.
    fn cut(&mut self, region: &Polyhedron, phi: &AffineFn, strict: bool, path: &str, what: &str) -> Cut {
        if norm2(&phi.a) <= ZERO_NORMAL_TOL {
            let tol = TIE_TOL * 1f64.max(phi.c.abs());
            if phi.c.abs() <= tol {
                self.warnings.push(DegeneracyWarning {
                    path: path.to_string(),
                    detail: format!("{what} tied identically; lowest row index wins"),
                });
            }
            let ok = if strict { phi.c < -tol } else { phi.c <= tol };
            return if ok { Cut::Region(region.clone()) } else { Cut::Infeasible };
        }
        Cut::Region(region.with_halfspace(&phi.a, -phi.c))
    }

    /// Applies all comparisons; `None` if the child region is empty or flat.
    fn child_region(
        &mut self,
        region: &Polyhedron,
        cuts: &[(AffineFn, bool)],
        path: &str,
        what: &str,
    ) -> Result<Option<Polyhedron>> {
        let mut out = region.clone();
        for (phi, strict) in cuts {
            match self.cut(&out, phi, *strict, path, what) {
                Cut::Region(r) => out = r,
                Cut::Infeasible => return Ok(None),
            }
        }
        if out == *region {
            return Ok(Some(out));
        }
        match out.chebyshev_center() {
            Err(Error::EmptyRegion) => Ok(None),
            Err(e) => Err(e),
            Ok((_, radius)) if radius <= FLAT_RADIUS => Ok(None),
            Ok(_) => Ok(Some(out.reduce()?)),
        }
    }

    fn initial_state(&self, region: &Polyhedron) -> Result<State> {
        let qp = self.qp;
        let nt = self.nt();
        let factor = KktFactor::with_cholesky(self.chol.clone(), &qp.geq)?;
        let (g, _) = factor.solve(&qp.f_const, &qp.beq);
        let mut f = Matrix::zeros(qp.n(), nt);
        let zeros = vec![0.0; qp.n_eq()];
        for k in 0..nt {
            let (col, _) = factor.solve(&qp.f_lin.column(k), &zeros);
            for (i, v) in col.iter().enumerate() {
                f[(i, k)] = *v;
            }
        }
        Ok(State {
            region: region.clone(),
            ws: WorkingSet::equalities_only(qp.n_eq()),
            x: AffineMap { f, g },
            lam: Vec::new(),
            pending: None,
            kappa: 1,
            path: String::new(),
        })
    }

    fn run(mut self, region: &Polyhedron) -> Result<QpCertOutput> {
        let mut leaves = Vec::new();
        let mut stack = vec![self.initial_state(region)?];
        while let Some(state) = stack.pop() {
            if state.kappa > self.cap {
                return Err(Error::IterationCapExceeded { cap: self.cap });
            }
            let children = match state.pending.clone() {
                None => self.select_row(state, &mut leaves)?,
                Some((p, lam_p)) => self.step(state, p, lam_p, &mut leaves)?,
            };
            // LIFO: reverse so the first child is processed first
            stack.extend(children.into_iter().rev());
        }
        leaves.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(QpCertOutput {
            leaves,
            warnings: self.warnings,
        })
    }

    fn optimal_leaf(&self, state: State) -> CertLeaf {
        let value = value_function(&state.x, self.qp);
        CertLeaf {
            region: state.region,
            kappa: state.kappa,
            active_set: state.ws,
            value,
            x: Some(state.x),
            path: state.path,
        }
    }

    /// Most-violated-row selection; the all-feasible child terminates.
    fn select_row(&mut self, state: State, leaves: &mut Vec<CertLeaf>) -> Result<Vec<State>> {
        let inactive: Vec<usize> = (0..self.qp.n_ineq()).filter(|i| !state.ws.contains_ineq(*i)).collect();
        let slacks: Vec<AffineFn> = inactive.iter().map(|&i| self.slack(&state.x, i)).collect();

        // s_i ≥ −tol for all i
        let opt_cuts: Vec<(AffineFn, bool)> = slacks
            .iter()
            .map(|s| (s.scaled(-1.0).combine(1.0, &AffineFn::constant(self.nt(), -PRIMAL_TOL), 1.0), false))
            .collect();
        let opt_path = format!("{}o", state.path);
        if let Some(region) = self.child_region(&state.region, &opt_cuts, &opt_path, "optimality")? {
            leaves.push(self.optimal_leaf(State {
                region,
                path: opt_path,
                ..state.clone()
            }));
        }

        let mut children = Vec::new();
        for (pi, &p) in inactive.iter().enumerate() {
            let sp = &slacks[pi];
            let mut cuts = vec![(sp.combine(1.0, &AffineFn::constant(self.nt(), PRIMAL_TOL), 1.0), false)];
            for (ki, &k) in inactive.iter().enumerate() {
                if k != p {
                    cuts.push((sp.combine(1.0, &slacks[ki], -1.0), k < p));
                }
            }
            let path = format!("{}v{:02}", state.path, p);
            if let Some(region) = self.child_region(&state.region, &cuts, &path, "violated-row choice")? {
                children.push(State {
                    region,
                    pending: Some((p, AffineFn::constant(self.nt(), 0.0))),
                    path,
                    ..state.clone()
                });
            }
        }
        Ok(children)
    }

    /// Dual/primal step for adding row `p`.
    fn step(&mut self, state: State, p: usize, lam_p: AffineFn, leaves: &mut Vec<CertLeaf>) -> Result<Vec<State>> {
        let qp = self.qp;
        let n_eq = state.ws.eq_rows.len();
        let row_p = qp.g.row(p).to_vec();
        let ws_matrix = state.ws.matrix(&qp.geq, &qp.g);
        let dir = AddDirections::compute(&self.chol, &ws_matrix, &row_p)?;
        let blocking = dir.blocking_positions(n_eq);
        let z_null = dir.z_is_null();

        if z_null && blocking.is_empty() {
            leaves.push(CertLeaf {
                region: state.region,
                kappa: state.kappa,
                active_set: state.ws,
                value: QuadraticFunc::infinite(self.nt()),
                x: None,
                path: format!("{}i", state.path),
            });
            return Ok(Vec::new());
        }

        // −d > 0 where d = row_p·z; t₂ = s_p/d = (−s_p)/(−d)
        let sp = self.slack(&state.x, p);
        let neg_d = if z_null { f64::NAN } else { -dot(&row_p, &dir.z) };
        let r_of = |k: usize| dir.r[n_eq + k];
        let row_of = |k: usize| state.ws.ineq_rows[k];

        let mut children = Vec::new();
        for &k in &blocking {
            let mut cuts = Vec::new();
            // λ_k/r_k vs λ_j/r_j  ⇔  r_j λ_k − r_k λ_j
            for &j in blocking.iter().filter(|&&j| j != k) {
                let phi = state.lam[k].combine(r_of(j), &state.lam[j], -r_of(k));
                cuts.push((phi, row_of(j) < row_of(k)));
            }
            if !z_null {
                // λ_k/r_k < (−s_p)/(−d)  ⇔  (−d) λ_k + r_k s_p < 0
                cuts.push((state.lam[k].combine(neg_d, &sp, r_of(k)), true));
            }
            let path = format!("{}d{:02}", state.path, row_of(k));
            let Some(region) = self.child_region(&state.region, &cuts, &path, "blocking choice")? else {
                continue;
            };
            let t = state.lam[k].scaled(1.0 / r_of(k));
            let mut child = self.advance(&state, &dir, &t, region, path);
            child.ws.ineq_rows.remove(k);
            child.lam.remove(k);
            let mut lp = lam_p.clone();
            lp.add_scaled(&t, 1.0);
            child.pending = Some((p, lp));
            children.push(child);
        }

        if !z_null {
            // t₂ ≤ λ_k/r_k  ⇔  r_k (−s_p) − (−d) λ_k ≤ 0
            let cuts: Vec<(AffineFn, bool)> = blocking
                .iter()
                .map(|&k| (sp.combine(-r_of(k), &state.lam[k], -neg_d), false))
                .collect();
            let path = format!("{}a", state.path);
            if let Some(region) = self.child_region(&state.region, &cuts, &path, "step-length choice")? {
                let t = sp.scaled(-1.0 / neg_d);
                let mut child = self.advance(&state, &dir, &t, region, path);
                let mut lp = lam_p;
                lp.add_scaled(&t, 1.0);
                child.ws.ineq_rows.push(p);
                child.lam.push(lp);
                child.pending = None;
                children.push(child);
            }
        }
        Ok(children)
    }

    /// Copy of `state` after a step of length `t(θ)` along the directions.
    fn advance(&self, state: &State, dir: &AddDirections, t: &AffineFn, region: Polyhedron, path: String) -> State {
        let n_eq = state.ws.eq_rows.len();
        let mut x = state.x.clone();
        x.add_outer(&dir.z, t);
        let lam = state
            .lam
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let mut l = l.clone();
                l.add_scaled(t, -dir.r[n_eq + k]);
                l
            })
            .collect();
        State {
            region,
            ws: state.ws.clone(),
            x,
            lam,
            pending: state.pending.clone(),
            kappa: state.kappa + 1,
            path,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::norm_inf;
    use crate::problem::random_mpmiqp;
    use crate::qpsolve::{solve, QpStatus};

    /// min ½x² + θx  s.t.  x ≥ 0, θ ∈ [−1, 1]
    fn scalar_family() -> MpMiqp {
        MpMiqp {
            h: Matrix::identity(1),
            f: vec![0.0],
            f_theta: Matrix::from_rows(&[[1.0]], 1),
            a: Matrix::from_rows(&[[-1.0]], 1),
            b: vec![0.0],
            w: Matrix::zeros(1, 1),
            binary_indices: vec![],
            theta0: Polyhedron::from_box(&[-1.0], &[1.0]),
        }
    }

    #[test]
    fn scalar_family_two_leaves() {
        let p = scalar_family();
        let out = qpcert(&p, &p.root(), &p.theta0).unwrap();
        assert_eq!(out.leaves.len(), 2);
        let at = |t: f64| out.leaves.iter().find(|l| l.region.contains(&[t]) && !l.region.contains(&[-t])).unwrap();

        let neg = at(-0.5);
        assert_eq!(neg.kappa, 1);
        let x = neg.x.as_ref().unwrap();
        assert!((x.eval(&[-0.5])[0] - 0.5).abs() < 1e-14);
        assert!((neg.value.evaluate(&[-0.5]) + 0.125).abs() < 1e-14);

        let pos = at(0.5);
        assert_eq!(pos.kappa, 2);
        assert_eq!(pos.active_set.ineq_rows, vec![0]);
        assert!(pos.x.as_ref().unwrap().eval(&[0.5])[0].abs() < 1e-14);
        assert!(pos.value.evaluate(&[0.5]).abs() < 1e-14);
    }

    #[test]
    fn loose_constraints_give_one_leaf() {
        let mut p = random_mpmiqp(3, 2, 0, 4, 2);
        p.b = vec![1e6; 4];
        p.w = Matrix::zeros(4, 2);
        let out = qpcert(&p, &p.root(), &p.theta0).unwrap();
        assert_eq!(out.leaves.len(), 1);
        assert_eq!(out.leaves[0].kappa, 1);
        assert!(out.leaves[0].active_set.ineq_rows.is_empty());
    }

    #[test]
    fn value_function_examples() {
        let p = scalar_family();
        let qp = p.assemble(&p.root());
        let x = AffineMap {
            f: Matrix::from_rows(&[[-1.0]], 1),
            g: vec![0.0],
        };
        let j = value_function(&x, &qp);
        assert!((j.evaluate(&[0.7]) + 0.245).abs() < 1e-14);

        let mut q2 = random_mpmiqp(1, 3, 0, 2, 2).assemble(&Relaxation::default());
        q2.f_lin = Matrix::zeros(3, 2);
        let zero = AffineMap {
            f: Matrix::zeros(3, 2),
            g: vec![0.0; 3],
        };
        let j = value_function(&zero, &q2);
        assert_eq!(j.evaluate(&[0.3, -0.4]), 0.0);
    }

    #[test]
    fn leaves_replay_online_solver() {
        for seed in 0..5 {
            let p = random_mpmiqp(seed, 2, 4, 6, 2);
            let r = p.root();
            let qp = p.assemble(&r);
            let out = qpcert(&p, &r, &p.theta0).unwrap();
            for leaf in &out.leaves {
                let Ok((c, rad)) = leaf.region.chebyshev_center() else { continue };
                if rad < 1e-6 {
                    continue;
                }
                let on = solve(&qp, &c).unwrap();
                assert_eq!(on.iterations, leaf.kappa, "seed {seed} leaf {}", leaf.path);
                assert_eq!(on.active_set.sorted_ineq(), leaf.active_set.sorted_ineq());
                match &leaf.x {
                    Some(x) => {
                        assert_eq!(on.status, QpStatus::Optimal);
                        let d: Vec<f64> = x.eval(&c).iter().zip(&on.x).map(|(a, b)| a - b).collect();
                        assert!(norm_inf(&d) <= 1e-6);
                        assert!((leaf.value.evaluate(&c) - on.objective).abs() <= 1e-8 * (1.0 + on.objective.abs()));
                    }
                    None => assert_eq!(on.status, QpStatus::Infeasible),
                }
            }
        }
    }
}
