//! The multi-parametric MIQP family, node relaxations and their assembly
//! into dense QP data, a random instance generator, and the problem file.
//!
//! The family is
//!
//! ```text
//!     min  ½ xᵀHx + (f + F θ)ᵀx
//!     s.t. A x ≤ b + W θ
//!          x_i ∈ {0, 1},  i ∈ binary_indices
//! ```
//!
//! over `θ ∈ Θ⁰`.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{mat_in, mat_out, vec_in, vec_out, Num};
use crate::geometry::Polyhedron;
use crate::numerics::{add, min_eigenvalue, Matrix, Vector};
use crate::qpsolve::Qp;

/// Smallest admissible eigenvalue of the Hessian.
pub const MIN_HESSIAN_EIGENVALUE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MpMiqp {
    pub h: Matrix,
    pub f: Vector,
    pub f_theta: Matrix,
    pub a: Matrix,
    pub b: Vector,
    pub w: Matrix,
    pub binary_indices: Vec<usize>,
    pub theta0: Polyhedron,
}

impl MpMiqp {
    pub fn n(&self) -> usize {
        self.h.rows()
    }

    pub fn n_b(&self) -> usize {
        self.binary_indices.len()
    }

    pub fn n_c(&self) -> usize {
        self.n() - self.n_b()
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n_theta(&self) -> usize {
        self.f_theta.cols()
    }

    /// Checks shapes, symmetry and definiteness of `H`, the binary index list
    /// and that `Θ⁰` is nonempty and bounded.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        let (n, m, nt) = (self.n(), self.m(), self.n_theta());
        if !self.h.is_square() {
            return bad(format!("H is {:?}, expected square", self.h.shape()));
        }
        if self.f.len() != n {
            return bad(format!("f has length {}, expected {n}", self.f.len()));
        }
        if self.f_theta.rows() != n {
            return bad(format!("f_theta has {} rows, expected {n}", self.f_theta.rows()));
        }
        if self.a.cols() != n {
            return bad(format!("A has {} columns, expected {n}", self.a.cols()));
        }
        if self.b.len() != m {
            return bad(format!("b has length {}, expected {m}", self.b.len()));
        }
        if self.w.shape() != (m, nt) {
            return bad(format!("W is {:?}, expected ({m}, {nt})", self.w.shape()));
        }
        if self.theta0.dim() != nt {
            return bad(format!("theta0 has dimension {}, expected {nt}", self.theta0.dim()));
        }
        let finite = self.h.is_finite()
            && self.f_theta.is_finite()
            && self.a.is_finite()
            && self.w.is_finite()
            && self.f.iter().chain(&self.b).all(|v| v.is_finite());
        if !finite {
            return bad("problem data contains non-finite entries".into());
        }
        if !self.h.is_symmetric(1e-12 * (1.0 + self.h.max_abs())) {
            return bad("H is not symmetric".into());
        }
        let lmin = min_eigenvalue(&self.h);
        if lmin < MIN_HESSIAN_EIGENVALUE {
            return bad(format!("H has minimum eigenvalue {lmin:e} < {MIN_HESSIAN_EIGENVALUE:e}"));
        }
        if !self.binary_indices.windows(2).all(|w| w[0] < w[1]) {
            return bad("binary_indices must be strictly increasing".into());
        }
        if self.binary_indices.last().is_some_and(|&i| i >= n) {
            return bad("binary index out of range".into());
        }
        match self.theta0.bounding_box() {
            Ok(_) => Ok(()),
            Err(Error::EmptyRegion) => bad("theta0 is empty".into()),
            Err(Error::UnboundedRegion) => bad("theta0 is unbounded".into()),
            Err(e) => Err(e),
        }
    }

    /// The fixed-parameter problem data `f̄ = f + Fθ̄`, `b̄ = b + Wθ̄`.
    pub fn instantiate(&self, theta: &[f64]) -> Result<MiqpInstance> {
        assert_eq!(theta.len(), self.n_theta(), "parameter dimension mismatch");
        if !self.theta0.contains(theta) {
            return Err(Error::ParameterOutsideTheta0(theta.to_vec()));
        }
        Ok(MiqpInstance {
            h: self.h.clone(),
            f: add(&self.f, &self.f_theta.matvec(theta)),
            a: self.a.clone(),
            b: add(&self.b, &self.w.matvec(theta)),
            binary_indices: self.binary_indices.clone(),
        })
    }

    /// Assembles the QP relaxation of a node.
    pub fn assemble(&self, r: &Relaxation) -> AssembledQp {
        let n = self.n();
        let nt = self.n_theta();
        let mut g = self.a.clone();
        let mut g_const = self.b.clone();
        let mut g_lin = self.w.clone();
        let mut row_tags: Vec<RowTag> = (0..self.m()).map(RowTag::Original).collect();
        for &i in self.binary_indices.iter().filter(|i| r.is_free(**i)) {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            g.push_row(&e);
            g_const.push(1.0);
            g_lin.push_row(&vec![0.0; nt]);
            row_tags.push(RowTag::UpperBound(i));
            e[i] = -1.0;
            g.push_row(&e);
            g_const.push(0.0);
            g_lin.push_row(&vec![0.0; nt]);
            row_tags.push(RowTag::LowerBound(i));
        }
        let mut geq = Matrix::zeros(0, n);
        let mut beq = Vec::new();
        for &i in self.binary_indices.iter().filter(|i| !r.is_free(**i)) {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            geq.push_row(&e);
            beq.push(if r.b1.contains(&i) { 1.0 } else { 0.0 });
        }
        AssembledQp {
            h: self.h.clone(),
            f_const: self.f.clone(),
            f_lin: self.f_theta.clone(),
            g,
            g_const,
            g_lin,
            geq,
            beq,
            row_tags,
            free_binaries: self.binary_indices.iter().copied().filter(|&i| r.is_free(i)).collect(),
        }
    }

    pub fn root(&self) -> Relaxation {
        Relaxation::default()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ProblemFile {
            problem: self.clone(),
            relaxations: Vec::new(),
        };
        file.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MpMiqp> {
        Ok(ProblemFile::load(path)?.problem)
    }

    pub fn to_json(&self) -> Result<String> {
        ProblemFile {
            problem: self.clone(),
            relaxations: Vec::new(),
        }
        .to_json()
    }

    pub fn from_json(s: &str) -> Result<MpMiqp> {
        Ok(ProblemFile::from_json(s)?.problem)
    }
}

/// A single MIQP obtained by fixing `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MiqpInstance {
    pub h: Matrix,
    pub f: Vector,
    pub a: Matrix,
    pub b: Vector,
    pub binary_indices: Vec<usize>,
}

/// Binary fixings of a branch-and-bound node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Relaxation {
    pub b0: BTreeSet<usize>,
    pub b1: BTreeSet<usize>,
}

impl Relaxation {
    pub fn new(b0: BTreeSet<usize>, b1: BTreeSet<usize>) -> Result<Self> {
        if let Some(i) = b0.intersection(&b1).next() {
            return Err(Error::InvalidProblem(format!("binary {i} fixed to both 0 and 1")));
        }
        Ok(Self { b0, b1 })
    }

    pub fn is_free(&self, i: usize) -> bool {
        !self.b0.contains(&i) && !self.b1.contains(&i)
    }

    pub fn depth(&self) -> usize {
        self.b0.len() + self.b1.len()
    }

    /// Child with binary `k` fixed to `value`.
    pub fn fix(&self, k: usize, value: bool) -> Relaxation {
        debug_assert!(self.is_free(k));
        let mut child = self.clone();
        if value {
            child.b1.insert(k);
        } else {
            child.b0.insert(k);
        }
        child
    }

    /// Checks that the fixings refer to binaries of `p`.
    pub fn validate_for(&self, p: &MpMiqp) -> Result<()> {
        if let Some(i) = self.b0.intersection(&self.b1).next() {
            return Err(Error::InvalidProblem(format!("binary {i} fixed to both 0 and 1")));
        }
        if let Some(i) = self.b0.iter().chain(&self.b1).find(|i| p.binary_indices.binary_search(i).is_err()) {
            return Err(Error::InvalidProblem(format!("index {i} is not a binary variable")));
        }
        Ok(())
    }
}

impl fmt::Display for Relaxation {
    /// `0:{…} 1:{…}` with indices ascending.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &BTreeSet<usize>| s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "0:{{{}}} 1:{{{}}}", join(&self.b0), join(&self.b1))
    }
}

/// Provenance of an inequality row of an assembled relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowTag {
    /// Row `i` of `A x ≤ b + Wθ`.
    Original(usize),
    /// `x_i ≤ 1`
    UpperBound(usize),
    /// `−x_i ≤ 0`
    LowerBound(usize),
}

impl RowTag {
    pub fn bound_variable(self) -> Option<usize> {
        match self {
            RowTag::Original(_) => None,
            RowTag::UpperBound(i) | RowTag::LowerBound(i) => Some(i),
        }
    }
}

/// Dense QP data of a relaxation, affine in `θ`:
///
/// ```text
///     min  ½ xᵀHx + (f_const + f_lin θ)ᵀx
///     s.t. G x ≤ g_const + g_lin θ,   Geq x = beq
/// ```
///
/// Inequality rows are the original rows in input order followed by, for
/// each free binary in ascending order, its upper then lower bound row. The
/// online solver and the certifier both rely on this ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledQp {
    pub h: Matrix,
    pub f_const: Vector,
    pub f_lin: Matrix,
    pub g: Matrix,
    pub g_const: Vector,
    pub g_lin: Matrix,
    pub geq: Matrix,
    pub beq: Vector,
    pub row_tags: Vec<RowTag>,
    pub free_binaries: Vec<usize>,
}

impl AssembledQp {
    pub fn n(&self) -> usize {
        self.h.rows()
    }

    pub fn n_ineq(&self) -> usize {
        self.g.rows()
    }

    pub fn n_eq(&self) -> usize {
        self.geq.rows()
    }

    pub fn n_theta(&self) -> usize {
        self.f_lin.cols()
    }

    /// The QP at a fixed parameter.
    pub fn at(&self, theta: &[f64]) -> Qp {
        Qp {
            h: self.h.clone(),
            f: add(&self.f_const, &self.f_lin.matvec(theta)),
            g: self.g.clone(),
            g_rhs: add(&self.g_const, &self.g_lin.matvec(theta)),
            geq: self.geq.clone(),
            beq: self.beq.clone(),
        }
    }

    /// True if every free binary has one of its bound rows among `active`
    /// inequality rows.
    pub fn is_integer_feasible(&self, active: &[usize]) -> bool {
        let at_bound: BTreeSet<usize> = active
            .iter()
            .filter_map(|&r| self.row_tags[r].bound_variable())
            .collect();
        self.free_binaries.iter().all(|i| at_bound.contains(i))
    }

    /// Fixed branching order: the lowest-index free binary.
    pub fn branching_variable(&self) -> Option<usize> {
        self.free_binaries.first().copied()
    }
}

/// Random family with the distributions used for the benchmark instances:
/// `H = H̄H̄ᵀ` with standard normal `H̄`, standard normal `f` and `F`,
/// `A ~ U[0,1]`, `b ~ U[1,2]`, `W ~ U[0,2]`, `Θ⁰ = [−1,1]^{n_θ}`, binaries
/// last.
pub fn random_mpmiqp(seed: u64, n_c: usize, n_b: usize, m: usize, n_theta: usize) -> MpMiqp {
    let n = n_c + n_b;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = loop {
        let hb = Matrix::from_row_major(n, n, (0..n * n).map(|_| rng.sample(StandardNormal)).collect());
        let h = hb.matmul(&hb.transpose()).symmetrized();
        if min_eigenvalue(&h) >= MIN_HESSIAN_EIGENVALUE {
            break h;
        }
    };
    let normal = |rng: &mut ChaCha8Rng, k: usize| -> Vector { (0..k).map(|_| rng.sample(StandardNormal)).collect() };
    let uniform = |rng: &mut ChaCha8Rng, k: usize, lo: f64, hi: f64| -> Vector {
        let d = Uniform::new_inclusive(lo, hi).expect("valid range");
        (0..k).map(|_| rng.sample(d)).collect()
    };
    let f = normal(&mut rng, n);
    let f_theta = Matrix::from_row_major(n, n_theta, normal(&mut rng, n * n_theta));
    let a = Matrix::from_row_major(m, n, uniform(&mut rng, m * n, 0.0, 1.0));
    let b = uniform(&mut rng, m, 1.0, 2.0);
    let w = Matrix::from_row_major(m, n_theta, uniform(&mut rng, m * n_theta, 0.0, 2.0));
    MpMiqp {
        h,
        f,
        f_theta,
        a,
        b,
        w,
        binary_indices: (n_c..n).collect(),
        theta0: Polyhedron::from_box(&vec![-1.0; n_theta], &vec![1.0; n_theta]),
    }
}

/// Problem file contents: the family plus optional node records.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub problem: MpMiqp,
    pub relaxations: Vec<Relaxation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct ProblemRepr {
    n_c: usize,
    n_b: usize,
    m: usize,
    n_theta: usize,
    H: Vec<Vec<Num>>,
    f: Vec<Num>,
    f_theta: Vec<Vec<Num>>,
    A: Vec<Vec<Num>>,
    b: Vec<Num>,
    W: Vec<Vec<Num>>,
    binary_indices: Vec<usize>,
    theta0: RegionRepr,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    relaxations: Vec<RelaxationRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub(crate) struct RegionRepr {
    pub A: Vec<Vec<Num>>,
    pub b: Vec<Num>,
}

impl RegionRepr {
    pub fn from_region(p: &Polyhedron) -> Self {
        Self {
            A: mat_out(p.a()),
            b: vec_out(p.b()),
        }
    }

    pub fn to_region(&self, dim: usize, field: &str) -> std::result::Result<Polyhedron, String> {
        let a = mat_in(&self.A, dim, &format!("{field}.A"))?;
        if a.rows() != self.b.len() {
            return Err(format!(
                "field `{field}`: A has {} rows but b has {} entries",
                a.rows(),
                self.b.len()
            ));
        }
        Ok(Polyhedron::new(a, vec_in(&self.b)))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelaxationRepr {
    b0: Vec<usize>,
    b1: Vec<usize>,
}

fn field_error(message: String) -> Error {
    Error::Parse {
        line: 0,
        column: 0,
        message,
    }
}

impl ProblemFile {
    pub fn to_json(&self) -> Result<String> {
        let p = &self.problem;
        let repr = ProblemRepr {
            n_c: p.n_c(),
            n_b: p.n_b(),
            m: p.m(),
            n_theta: p.n_theta(),
            H: mat_out(&p.h),
            f: vec_out(&p.f),
            f_theta: mat_out(&p.f_theta),
            A: mat_out(&p.a),
            b: vec_out(&p.b),
            W: mat_out(&p.w),
            binary_indices: p.binary_indices.clone(),
            theta0: RegionRepr::from_region(&p.theta0),
            relaxations: self
                .relaxations
                .iter()
                .map(|r| RelaxationRepr {
                    b0: r.b0.iter().copied().collect(),
                    b1: r.b1.iter().copied().collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&repr)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let repr: ProblemRepr = serde_json::from_str(s)?;
        let n = repr.n_c + repr.n_b;
        let nt = repr.n_theta;
        let h = mat_in(&repr.H, n, "H").map_err(field_error)?;
        let f_theta = mat_in(&repr.f_theta, nt, "f_theta").map_err(field_error)?;
        let a = mat_in(&repr.A, n, "A").map_err(field_error)?;
        let w = mat_in(&repr.W, nt, "W").map_err(field_error)?;
        let theta0 = repr.theta0.to_region(nt, "theta0").map_err(field_error)?;
        let counts = [
            ("H", h.rows(), n),
            ("f", repr.f.len(), n),
            ("f_theta", f_theta.rows(), n),
            ("A", a.rows(), repr.m),
            ("b", repr.b.len(), repr.m),
            ("W", w.rows(), repr.m),
            ("binary_indices", repr.binary_indices.len(), repr.n_b),
        ];
        for (field, got, want) in counts {
            if got != want {
                return Err(field_error(format!("field `{field}`: {got} rows/entries, expected {want}")));
            }
        }
        let problem = MpMiqp {
            h,
            f: vec_in(&repr.f),
            f_theta,
            a,
            b: vec_in(&repr.b),
            w,
            binary_indices: repr.binary_indices,
            theta0,
        };
        problem.validate().map_err(|e| field_error(e.to_string()))?;
        let mut relaxations = Vec::with_capacity(repr.relaxations.len());
        for (k, r) in repr.relaxations.into_iter().enumerate() {
            let b0: BTreeSet<usize> = r.b0.into_iter().collect();
            let b1: BTreeSet<usize> = r.b1.into_iter().collect();
            let relax = Relaxation { b0, b1 };
            relax
                .validate_for(&problem)
                .map_err(|e| field_error(format!("field `relaxations[{k}]`: {e}")))?;
            relaxations.push(relax);
        }
        Ok(Self { problem, relaxations })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sub;

    #[test]
    fn root_assembly_counts() {
        let p = random_mpmiqp(1, 2, 4, 6, 2);
        let qp = p.assemble(&p.root());
        assert_eq!(qp.n_ineq(), 14);
        assert_eq!(qp.n_eq(), 0);
        assert_eq!(qp.row_tags[6], RowTag::UpperBound(2));
        assert_eq!(qp.row_tags[7], RowTag::LowerBound(2));
        assert_eq!(qp.row_tags[13], RowTag::LowerBound(5));
    }

    #[test]
    fn fully_fixed_assembly() {
        let p = random_mpmiqp(1, 2, 4, 6, 2);
        let r = Relaxation {
            b0: [2, 4].into(),
            b1: [3, 5].into(),
        };
        let qp = p.assemble(&r);
        assert_eq!(qp.n_ineq(), 6);
        assert_eq!(qp.n_eq(), 4);
        assert_eq!(qp.beq, vec![0.0, 1.0, 0.0, 1.0]);
        assert!(qp.is_integer_feasible(&[]));
        assert_eq!(qp.branching_variable(), None);
    }

    #[test]
    fn single_fixing_drops_bound_rows() {
        let p = random_mpmiqp(1, 2, 4, 6, 2);
        let qp = p.assemble(&p.root().fix(2, false));
        assert_eq!(qp.n_ineq(), 12);
        assert!(!qp.row_tags.iter().any(|t| t.bound_variable() == Some(2)));
        assert_eq!(qp.geq.row(0), &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(qp.beq, vec![0.0]);
        assert_eq!(qp.branching_variable(), Some(3));
    }

    #[test]
    fn overlapping_fixings_rejected() {
        assert!(Relaxation::new([1].into(), [1].into()).is_err());
    }

    #[test]
    fn instantiate_examples() {
        let p = random_mpmiqp(3, 2, 4, 6, 2);
        let inst = p.instantiate(&[0.0, 0.0]).unwrap();
        assert_eq!(inst.f, p.f);
        assert_eq!(inst.b, p.b);

        let mut q = p.clone();
        q.f_theta = Matrix::zeros(6, 2);
        q.w = Matrix::zeros(6, 2);
        q.w[(0, 0)] = 1.0;
        q.w[(1, 1)] = 1.0;
        let inst = q.instantiate(&[1.0, 0.0]).unwrap();
        assert_eq!(inst.b[0], q.b[0] + 1.0);
        assert_eq!(&inst.b[1..], &q.b[1..]);

        assert!(matches!(p.instantiate(&[1.5, 0.0]), Err(Error::ParameterOutsideTheta0(_))));
    }

    #[test]
    fn instantiate_matches_direct_arithmetic() {
        let p = random_mpmiqp(4, 2, 4, 6, 2);
        let theta = [0.3, -0.7];
        let inst = p.instantiate(&theta).unwrap();
        for i in 0..p.n() {
            let direct = p.f[i] + p.f_theta[(i, 0)] * theta[0] + p.f_theta[(i, 1)] * theta[1];
            assert!((inst.f[i] - direct).abs() <= 1e-14);
        }
        for i in 0..p.m() {
            let direct = p.b[i] + p.w[(i, 0)] * theta[0] + p.w[(i, 1)] * theta[1];
            assert!((inst.b[i] - direct).abs() <= 1e-14);
        }
    }

    #[test]
    fn rhs_is_affine_in_theta() {
        let p = random_mpmiqp(5, 2, 4, 6, 2);
        let (t1, t2) = ([0.2, -0.4], [-0.9, 0.6]);
        let mid = [0.5 * (t1[0] + t2[0]), 0.5 * (t1[1] + t2[1])];
        let b1 = p.instantiate(&t1).unwrap().b;
        let b2 = p.instantiate(&t2).unwrap().b;
        let bm = p.instantiate(&mid).unwrap().b;
        let lhs = add(&b1, &b2);
        let rhs: Vector = bm.iter().map(|v| 2.0 * v).collect();
        assert!(sub(&lhs, &rhs).iter().all(|d| d.abs() <= 1e-12));
    }

    #[test]
    fn generator_shapes_and_ranges() {
        let p = random_mpmiqp(1, 2, 4, 6, 2);
        assert_eq!(p.h.shape(), (6, 6));
        assert_eq!(p.f.len(), 6);
        assert_eq!(p.f_theta.shape(), (6, 2));
        assert_eq!(p.a.shape(), (6, 6));
        assert_eq!(p.b.len(), 6);
        assert_eq!(p.w.shape(), (6, 2));
        assert_eq!(p.binary_indices, vec![2, 3, 4, 5]);
        p.validate().unwrap();
        for seed in 0..100 {
            let p = random_mpmiqp(seed, 2, 4, 6, 2);
            assert!(p.b.iter().all(|v| (1.0..=2.0).contains(v)));
            assert!(p.w.as_slice().iter().all(|v| (0.0..=2.0).contains(v)));
            assert!(p.a.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(min_eigenvalue(&p.h) >= MIN_HESSIAN_EIGENVALUE);
        }
        assert_eq!(random_mpmiqp(9, 2, 4, 6, 2), random_mpmiqp(9, 2, 4, 6, 2));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let p = random_mpmiqp(2, 2, 4, 6, 2);
        p.save(&path).unwrap();
        let q = MpMiqp::load(&path).unwrap();
        assert_eq!(p, q);
        for (a, b) in p.h.as_slice().iter().zip(q.h.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn overlapping_relaxation_record_is_parse_error() {
        let p = random_mpmiqp(2, 2, 4, 6, 2);
        let mut v: serde_json::Value = serde_json::from_str(&p.to_json().unwrap()).unwrap();
        v["relaxations"] = serde_json::json!([{ "b0": [2], "b1": [2, 3] }]);
        let err = ProblemFile::from_json(&v.to_string()).unwrap_err();
        match err {
            Error::Parse { message, .. } => assert!(message.contains("relaxations[0]"), "{message}"),
            e => panic!("unexpected {e:?}"),
        }
        v["relaxations"] = serde_json::json!([{ "b0": [2], "b1": [3] }]);
        let ok = ProblemFile::from_json(&v.to_string()).unwrap();
        assert_eq!(ok.relaxations.len(), 1);
    }

    #[test]
    fn missing_field_is_named() {
        let p = random_mpmiqp(2, 2, 4, 6, 2);
        let mut v: serde_json::Value = serde_json::from_str(&p.to_json().unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("W");
        let err = MpMiqp::from_json(&serde_json::to_string_pretty(&v).unwrap()).unwrap_err();
        match err {
            Error::Parse { message, line, .. } => {
                assert!(message.contains("`W`"), "{message}");
                assert!(line > 0);
            }
            e => panic!("unexpected {e:?}"),
        }
    }
}
