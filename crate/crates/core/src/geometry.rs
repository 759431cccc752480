//! H-representation polyhedra in parameter space.
//!
//! Regions are closed: every inequality is non-strict, so two regions of a
//! partition may share boundary points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, lp_feasible, lp_solve, norm2, LpStatus, Matrix, Vector};

/// Membership slack used by [`Polyhedron::contains`].
pub const MEMBERSHIP_EPS: f64 = 1e-9;
/// Rows with a normal shorter than this are treated as constant constraints.
pub const ZERO_NORMAL_TOL: f64 = 1e-11;
/// Unit normals closer than this (componentwise) are treated as identical.
pub const PARALLEL_TOL: f64 = 1e-9;
const REDUNDANCY_TOL: f64 = 1e-9;

/// `{θ : A θ ≤ b}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    #[serde(rename = "A")]
    a: Matrix,
    b: Vector,
}

impl Polyhedron {
    pub fn new(a: Matrix, b: Vector) -> Self {
        assert_eq!(a.rows(), b.len(), "facet count mismatch");
        Self { a, b }
    }

    /// The whole of `R^dim`.
    pub fn universe(dim: usize) -> Self {
        Self::new(Matrix::zeros(0, dim), Vec::new())
    }

    /// Axis-aligned box `l ≤ θ ≤ u`, rows ordered `θ_i ≤ u_i, −θ_i ≤ −l_i`.
    pub fn from_box(l: &[f64], u: &[f64]) -> Self {
        assert_eq!(l.len(), u.len());
        let n = l.len();
        let mut a = Matrix::zeros(0, n);
        let mut b = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            a.push_row(&e);
            b.push(u[i]);
            e[i] = -1.0;
            a.push_row(&e);
            b.push(-l[i]);
        }
        Self { a, b }
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn n_facets(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `P ∩ {θ : aᵀθ ≤ β}`. The new row is scaled to unit norm unless its
    /// normal is numerically zero. A unit row parallel to an existing unit
    /// row (within [`PARALLEL_TOL`]) is merged into it, keeping the tighter
    /// offset.
    pub fn with_halfspace(&self, a: &[f64], beta: f64) -> Polyhedron {
        assert_eq!(a.len(), self.dim(), "halfspace dimension mismatch");
        let mut out = self.clone();
        let nrm = norm2(a);
        if nrm > ZERO_NORMAL_TOL {
            let row: Vector = a.iter().map(|v| v / nrm).collect();
            let twin = (0..out.n_facets()).find(|&i| {
                let r = out.a.row(i);
                (norm2(r) - 1.0).abs() <= PARALLEL_TOL
                    && r.iter().zip(&row).all(|(x, y)| (x - y).abs() <= PARALLEL_TOL)
            });
            match twin {
                Some(i) => out.b[i] = out.b[i].min(beta / nrm),
                None => {
                    out.a.push_row(&row);
                    out.b.push(beta / nrm);
                }
            }
        } else {
            out.a.push_row(a);
            out.b.push(beta);
        }
        out
    }

    /// Scales every row with a nonzero normal to unit Euclidean norm.
    pub fn normalize(&self) -> Polyhedron {
        let mut out = Polyhedron::universe(self.dim());
        for i in 0..self.n_facets() {
            out = out.with_halfspace(self.a.row(i), self.b[i]);
        }
        out
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        (0..self.n_facets()).all(|i| dot(self.a.row(i), theta) <= self.b[i] + MEMBERSHIP_EPS)
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(!lp_feasible(&self.a, &self.b)?)
    }

    /// Center and radius of the largest inscribed ball.
    pub fn chebyshev_center(&self) -> Result<(Vector, f64)> {
        let n = self.dim();
        let mut a = Matrix::zeros(0, n + 1);
        let mut b = Vec::with_capacity(self.n_facets() + 1);
        for i in 0..self.n_facets() {
            let row = self.a.row(i);
            let mut r = row.to_vec();
            r.push(norm2(row));
            a.push_row(&r);
            b.push(self.b[i]);
        }
        let mut r = vec![0.0; n + 1];
        r[n] = -1.0;
        a.push_row(&r);
        b.push(0.0);
        let mut c = vec![0.0; n + 1];
        c[n] = -1.0;
        let res = lp_solve(&c, &a, &b)?;
        match res.status {
            LpStatus::Infeasible => Err(Error::EmptyRegion),
            LpStatus::Unbounded => Err(Error::UnboundedRegion),
            LpStatus::Optimal => {
                let radius = res.optimizer[n].max(0.0);
                Ok((res.optimizer[..n].to_vec(), radius))
            }
        }
    }

    /// Minimizes `cᵀθ` over the region.
    pub fn minimize_linear(&self, c: &[f64]) -> Result<Vector> {
        let res = lp_solve(c, &self.a, &self.b)?;
        match res.status {
            LpStatus::Infeasible => Err(Error::EmptyRegion),
            LpStatus::Unbounded => Err(Error::UnboundedRegion),
            LpStatus::Optimal => Ok(res.optimizer),
        }
    }

    /// Drops every row whose removal leaves the feasible set unchanged.
    pub fn reduce(&self) -> Result<Polyhedron> {
        let m = self.n_facets();
        let mut keep = vec![true; m];
        for i in 0..m {
            let row = self.a.row(i);
            if norm2(row) <= ZERO_NORMAL_TOL {
                if self.b[i] >= -REDUNDANCY_TOL {
                    keep[i] = false;
                }
                continue;
            }
            let mut a = Matrix::zeros(0, self.dim());
            let mut b = Vec::new();
            for j in (0..m).filter(|&j| j != i && keep[j]) {
                a.push_row(self.a.row(j));
                b.push(self.b[j]);
            }
            // relaxed copy of row i keeps the LP bounded in its direction
            a.push_row(row);
            b.push(self.b[i] + 1.0);
            let neg: Vector = row.iter().map(|v| -v).collect();
            let res = lp_solve(&neg, &a, &b)?;
            match res.status {
                LpStatus::Optimal => {
                    if -res.objective <= self.b[i] + REDUNDANCY_TOL {
                        keep[i] = false;
                    }
                }
                // only reachable through round-off on slivers; keeping the
                // row is always safe
                LpStatus::Infeasible | LpStatus::Unbounded => {}
            }
        }
        let idx: Vec<usize> = (0..m).filter(|&i| keep[i]).collect();
        Ok(Polyhedron {
            a: self.a.select_rows(&idx),
            b: idx.iter().map(|&i| self.b[i]).collect(),
        })
    }

    /// Coordinate-wise bounds `(l, u)` over the region.
    pub fn bounding_box(&self) -> Result<(Vector, Vector)> {
        let n = self.dim();
        let mut l = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 0..n {
            let mut c = vec![0.0; n];
            c[i] = 1.0;
            l[i] = self.minimize_linear(&c)?[i];
            c[i] = -1.0;
            u[i] = self.minimize_linear(&c)?[i];
        }
        Ok((l, u))
    }

    /// True if the two regions, each shrunk inward by `shrink`, still meet.
    pub fn interiors_intersect(&self, other: &Polyhedron, shrink: f64) -> Result<bool> {
        assert_eq!(self.dim(), other.dim());
        let mut a = Matrix::zeros(0, self.dim());
        let mut b = Vec::new();
        for p in [self, other] {
            for i in 0..p.n_facets() {
                let row = p.a.row(i);
                let nrm = norm2(row);
                if nrm <= ZERO_NORMAL_TOL {
                    a.push_row(row);
                    b.push(p.b[i] - shrink);
                } else {
                    a.push_row(&row.iter().map(|v| v / nrm).collect::<Vec<_>>());
                    b.push(p.b[i] / nrm - shrink);
                }
            }
        }
        lp_feasible(&a, &b)
    }

    /// Vertices of a bounded 2-D region in counter-clockwise order.
    pub fn vertices_2d(&self) -> Result<Vec<Vector>> {
        if self.dim() != 2 {
            return Err(Error::UnsupportedDimension {
                expected: 2,
                actual: self.dim(),
            });
        }
        let mut pts: Vec<Vector> = Vec::new();
        let m = self.n_facets();
        for i in 0..m {
            for j in i + 1..m {
                let (r1, r2) = (self.a.row(i), self.a.row(j));
                let det = r1[0] * r2[1] - r1[1] * r2[0];
                if det.abs() < 1e-12 {
                    continue;
                }
                let x = (self.b[i] * r2[1] - r1[1] * self.b[j]) / det;
                let y = (r1[0] * self.b[j] - self.b[i] * r2[0]) / det;
                let p = vec![x, y];
                let inside = (0..m).all(|k| dot(self.a.row(k), &p) <= self.b[k] + 1e-7);
                if inside && !pts.iter().any(|q| (q[0] - x).abs() < 1e-9 && (q[1] - y).abs() < 1e-9) {
                    pts.push(p);
                }
            }
        }
        if pts.is_empty() {
            return Ok(pts);
        }
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        let cy = pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64;
        pts.sort_by(|p, q| (p[1] - cy).atan2(p[0] - cx).total_cmp(&(q[1] - cy).atan2(q[0] - cx)));
        Ok(pts)
    }
}

/// Inclusive uniform grid over the bounding box of `p0`, first coordinate
/// varying slowest. Degenerate axes contribute a single value.
pub fn grid(p0: &Polyhedron, points_per_axis: usize) -> Result<Vec<Vector>> {
    let (l, u) = p0.bounding_box()?;
    let axes: Vec<Vector> = l
        .iter()
        .zip(&u)
        .map(|(&lo, &hi)| {
            if points_per_axis <= 1 || hi - lo <= 0.0 {
                vec![if points_per_axis <= 1 { 0.5 * (lo + hi) } else { lo }]
            } else {
                let step = (hi - lo) / (points_per_axis - 1) as f64;
                (0..points_per_axis)
                    .map(|k| if k + 1 == points_per_axis { hi } else { lo + step * k as f64 })
                    .collect()
            }
        })
        .collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for v in axis {
                let mut p = prefix.clone();
                p.push(*v);
                next.push(p);
            }
        }
        out = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_box() -> Polyhedron {
        Polyhedron::from_box(&[-1.0, -1.0], &[1.0, 1.0])
    }

    fn triangle() -> Polyhedron {
        Polyhedron::new(
            Matrix::from_rows(&[[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], 2),
            vec![0.0, 0.0, 1.0],
        )
    }

    #[test]
    fn halfspace_examples() {
        let half = unit_box().with_halfspace(&[1.0, 0.0], 0.0);
        assert!(half.contains(&[-0.5, 0.9]) && !half.contains(&[0.5, 0.0]));
        let loose = unit_box().with_halfspace(&[1.0, 1.0], 2.0);
        assert_eq!(loose.n_facets(), 5);
        assert_eq!(loose.reduce().unwrap().n_facets(), 4);
        // parallel to θ₁ ≤ 1: merged, tighter offset kept
        let merged = unit_box().with_halfspace(&[2.0, 0.0], 1.0);
        assert_eq!(merged.n_facets(), 4);
        assert!(!merged.contains(&[0.6, 0.0]));
        assert_eq!(unit_box().with_halfspace(&[1.0, 0.0], 2.0), unit_box());
        assert!(unit_box().with_halfspace(&[1.0, 0.0], -2.0).is_empty().unwrap());
    }

    #[test]
    fn emptiness_examples() {
        assert!(!unit_box().is_empty().unwrap());
        let p = Polyhedron::new(Matrix::from_rows(&[[1.0], [-1.0]], 1), vec![0.0, -1.0]);
        assert!(p.is_empty().unwrap());
        let point = Polyhedron::from_box(&[0.0, 0.0], &[0.0, 0.0]);
        assert!(!point.is_empty().unwrap());
    }

    #[test]
    fn chebyshev_examples() {
        let (c, r) = unit_box().chebyshev_center().unwrap();
        assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12);
        assert!((r - 1.0).abs() < 1e-12);

        // incircle radius of a right triangle with legs 1: (a + b − c)/2
        let incircle = (1.0 + 1.0 - 2f64.sqrt()) / 2.0;
        let (c, r) = triangle().chebyshev_center().unwrap();
        assert!((r - incircle).abs() < 1e-12);
        assert!((c[0] - incircle).abs() < 1e-12 && (c[1] - incircle).abs() < 1e-12);

        let seg = Polyhedron::from_box(&[-1.0, 0.0], &[1.0, 0.0]);
        let (c, r) = seg.chebyshev_center().unwrap();
        assert_eq!(r, 0.0);
        assert!(seg.contains(&c));

        let empty = unit_box().with_halfspace(&[1.0, 0.0], -2.0);
        assert_eq!(empty.chebyshev_center().unwrap_err(), Error::EmptyRegion);
        let open = Polyhedron::new(Matrix::from_rows(&[[1.0, 0.0]], 2), vec![0.0]);
        assert_eq!(open.chebyshev_center().unwrap_err(), Error::UnboundedRegion);
    }

    #[test]
    fn reduce_examples() {
        let mut dup = unit_box();
        dup = dup.with_halfspace(&[1.0, 0.0], 1.0);
        assert_eq!(dup.reduce().unwrap().n_facets(), 4);
        assert_eq!(unit_box().with_halfspace(&[1.0, 0.0], 5.0).reduce().unwrap().n_facets(), 4);
        assert_eq!(unit_box().reduce().unwrap(), unit_box());
    }

    #[test]
    fn bounding_box_examples() {
        assert_eq!(unit_box().bounding_box().unwrap(), (vec![-1.0, -1.0], vec![1.0, 1.0]));
        let (l, u) = triangle().bounding_box().unwrap();
        assert_eq!((l, u), (vec![0.0, 0.0], vec![1.0, 1.0]));
        let (_, u) = unit_box().with_halfspace(&[1.0, 0.0], 0.0).bounding_box().unwrap();
        assert_eq!(u, vec![0.0, 1.0]);
        let open = Polyhedron::new(Matrix::from_rows(&[[1.0, 0.0]], 2), vec![0.0]);
        assert_eq!(open.bounding_box().unwrap_err(), Error::UnboundedRegion);
    }

    #[test]
    fn grid_examples() {
        let g = grid(&unit_box(), 2).unwrap();
        assert_eq!(g, vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![1.0, 1.0]]);
        assert_eq!(grid(&unit_box(), 100).unwrap().len(), 10000);
        let point = Polyhedron::from_box(&[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(grid(&point, 7).unwrap(), vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn contains_examples() {
        assert!(unit_box().contains(&[0.0, 0.0]));
        assert!(unit_box().contains(&[1.0 + 1e-12, 0.0]));
        assert!(!unit_box().contains(&[2.0, 0.0]));
    }

    fn random_polytope(rng: &mut ChaCha8Rng) -> Polyhedron {
        let mut p = unit_box();
        for _ in 0..rng.random_range(1..6) {
            let a = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            p = p.with_halfspace(&a, rng.random_range(0.05..1.0));
        }
        p
    }

    fn sample(rng: &mut ChaCha8Rng) -> Vector {
        vec![rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2)]
    }

    #[test]
    fn halfspace_never_enlarges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let parent = random_polytope(&mut rng);
        let child = parent.with_halfspace(&[0.3, -0.7], 0.1);
        let mut hits = 0;
        for _ in 0..10_000 {
            let t = sample(&mut rng);
            if child.contains(&t) {
                hits += 1;
                assert!(parent.contains(&t));
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn reduce_preserves_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let p = random_polytope(&mut rng).with_halfspace(&[1.0, 1.0], 3.0);
            let r = p.reduce().unwrap();
            assert!(r.n_facets() <= p.n_facets());
            for _ in 0..1000 {
                let t = sample(&mut rng);
                assert_eq!(p.contains(&t), r.contains(&t));
            }
        }
    }

    #[test]
    fn chebyshev_ball_is_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = random_polytope(&mut rng).normalize();
            let (c, r) = p.chebyshev_center().unwrap();
            assert!(r >= 0.0);
            for k in 0..64 {
                let ang = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                let q = [c[0] + r * ang.cos(), c[1] + r * ang.sin()];
                assert!(p.contains(&q));
            }
        }
    }

    #[test]
    fn shared_facet_is_not_interior_overlap() {
        let left = unit_box().with_halfspace(&[1.0, 0.0], 0.0);
        let right = unit_box().with_halfspace(&[-1.0, 0.0], 0.0);
        assert!(!left.interiors_intersect(&right, 1e-7).unwrap());
        assert!(left.interiors_intersect(&unit_box(), 1e-7).unwrap());
    }

    #[test]
    fn square_vertices() {
        let v = unit_box().vertices_2d().unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(triangle().vertices_2d().unwrap().len(), 3);
    }
}
