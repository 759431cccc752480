//! Branch-and-bound for mixed-integer quadratic programs, together with a
//! parametric certifier that bounds its worst-case complexity over a
//! polyhedral parameter set.

pub mod bnb;
pub mod bnbcert;
pub mod error;
pub mod format;
pub mod geometry;
pub mod measure;
pub mod numerics;
pub mod problem;
pub mod pwq;
pub mod qpcert;
pub mod qpsolve;
pub mod validate;

pub use bnb::{bruteforce_miqp, solve_miqp, CutReason, SolveTrace};
pub use bnbcert::{certify, update_tree, CertOptions, CertPartition, FinalRegion};
pub use error::{Error, Result};
pub use geometry::{grid, Polyhedron};
pub use measure::{ComplexityMeasure, MeasureRegistry};
pub use problem::{random_mpmiqp, AssembledQp, MpMiqp, ProblemFile, Relaxation, RowTag};
pub use pwq::{BoundCollection, Dominance, DominanceConfig, QuadraticFunc};
pub use qpcert::{qpcert, CertLeaf, QpCertOutput};
pub use qpsolve::{solve_qp, QpOutcome, QpStatus};
pub use validate::{validate, ValidationReport};
