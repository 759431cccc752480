//! Parametric certification of the branch-and-bound solver: partitions the
//! parameter set into polyhedra, each carrying an upper bound on the
//! accumulated complexity of [`crate::bnb::solve_miqp`] there.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bnb::CutReason;
use crate::error::{Error, Result};
use crate::format::Num;
use crate::geometry::Polyhedron;
use crate::measure::ComplexityMeasure;
use crate::numerics::Vector;
use crate::problem::{AssembledQp, MpMiqp, RegionRepr, Relaxation};
use crate::pwq::{any_dominates_with, BoundCollection, DominanceConfig, QuadraticFunc};
use crate::qpcert::{qpcert_assembled, AffineMap, DegeneracyWarning};
use crate::qpsolve::WorkingSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertOptions {
    /// Worker threads; 1 processes tuples strictly one at a time.
    pub workers: usize,
    pub dominance: DominanceConfig,
}

impl Default for CertOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            dominance: DominanceConfig::default(),
        }
    }
}

/// A pending region together with its own copy of the node stack.
#[derive(Debug, Clone)]
pub struct CertTuple {
    pub region: Polyhedron,
    pub kappa: u64,
    pub tree: Vec<Relaxation>,
    pub bounds: BoundCollection,
    /// Optimizers of the members of `bounds`, in the same order.
    pub incumbents: Vec<AffineMap>,
    pub path_id: String,
    pub nodes_processed: usize,
}

impl CertTuple {
    fn root(p: &MpMiqp) -> Self {
        Self {
            region: p.theta0.clone(),
            kappa: 0,
            tree: vec![p.root()],
            bounds: BoundCollection::new(),
            incumbents: Vec::new(),
            path_id: String::new(),
            nodes_processed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FinalRegion {
    pub region: Polyhedron,
    pub kappa: u64,
    pub path_id: String,
    pub bounds: BoundCollection,
    pub incumbents: Vec<AffineMap>,
}

impl FinalRegion {
    /// Best certified integer-feasible optimizer at `theta`, if any was found
    /// on this path.
    pub fn explicit_solution(&self, theta: &[f64]) -> Option<(f64, Vector)> {
        let mut best: Option<(f64, &AffineMap)> = None;
        for (j, x) in self.bounds.iter().zip(&self.incumbents) {
            let v = j.evaluate(theta);
            if best.is_none_or(|(b, _)| v < b) {
                best = Some((v, x));
            }
        }
        best.map(|(v, x)| (v, x.eval(theta)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CertStats {
    pub kappa_max: u64,
    pub region_count: usize,
    pub t_cert_seconds: f64,
    pub engine_iterations: usize,
    pub leaves: usize,
    pub dominance_cuts: usize,
    pub integer_feasible: usize,
    pub branched: usize,
}

#[derive(Debug, Clone)]
pub struct CertPartition {
    pub measure: String,
    pub n_theta: usize,
    pub regions: Vec<FinalRegion>,
    pub warnings: Vec<DegeneracyWarning>,
    pub stats: CertStats,
}

/// The children produced by one node of one tuple.
struct Expansion {
    children: Vec<CertTuple>,
    warnings: Vec<DegeneracyWarning>,
    cuts: [usize; 3],
}

enum Step {
    Final(FinalRegion),
    Expanded(Expansion),
}

pub fn certify(p: &MpMiqp, measure: &dyn ComplexityMeasure, opts: &CertOptions) -> Result<CertPartition> {
    certify_observed(p, measure, opts, |_, _, _| {})
}

/// As [`certify`], calling `observe(iteration, pending, finished)` before
/// every engine iteration.
pub fn certify_observed<F>(
    p: &MpMiqp,
    measure: &dyn ComplexityMeasure,
    opts: &CertOptions,
    mut observe: F,
) -> Result<CertPartition>
where
    F: FnMut(usize, &[CertTuple], &[FinalRegion]),
{
    p.validate()?;
    let start = Instant::now();
    let engine = Engine::new(p, measure, opts);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::NumericalFailure(format!("thread pool: {e}")))?;
    let batch = if opts.workers > 1 { 4 * opts.workers } else { 1 };

    let mut stack = vec![CertTuple::root(p)];
    let mut finals = Vec::new();
    let mut warnings = Vec::new();
    let mut stats = CertStats::default();
    let mut iteration = 0;
    while !stack.is_empty() {
        observe(iteration, &stack, &finals);
        let take = batch.min(stack.len());
        let work: Vec<CertTuple> = stack.split_off(stack.len() - take);
        let steps: Vec<Result<Step>> = if take == 1 {
            work.into_iter().map(|t| engine.step(t)).collect()
        } else {
            pool.install(|| work.into_par_iter().map(|t| engine.step(t)).collect())
        };
        for step in steps {
            iteration += 1;
            if iteration % 10_000 == 0 {
                log::info!("{iteration} tuples processed, {} pending, {} regions", stack.len(), finals.len());
            }
            match step? {
                Step::Final(f) => finals.push(f),
                Step::Expanded(e) => {
                    stats.leaves += e.children.len();
                    stats.branched += e.cuts[0];
                    stats.dominance_cuts += e.cuts[1];
                    stats.integer_feasible += e.cuts[2];
                    warnings.extend(e.warnings);
                    // reversed so the first leaf is popped first
                    stack.extend(e.children.into_iter().rev());
                }
            }
        }
    }
    finals.sort_by(|a, b| a.path_id.cmp(&b.path_id));
    warnings.sort_by(|a, b| a.path.cmp(&b.path));
    stats.engine_iterations = iteration;
    stats.region_count = finals.len();
    stats.kappa_max = finals.iter().map(|f| f.kappa).max().unwrap_or(0);
    stats.t_cert_seconds = start.elapsed().as_secs_f64();
    log::info!(
        "certified {} regions, kappa_max {}, {:.3}s",
        stats.region_count,
        stats.kappa_max,
        stats.t_cert_seconds
    );
    Ok(CertPartition {
        measure: measure.name().to_string(),
        n_theta: p.n_theta(),
        regions: finals,
        warnings,
        stats,
    })
}

struct Engine<'a> {
    p: &'a MpMiqp,
    measure: &'a dyn ComplexityMeasure,
    dominance: DominanceConfig,
    node_cap: usize,
}

impl<'a> Engine<'a> {
    fn new(p: &'a MpMiqp, measure: &'a dyn ComplexityMeasure, opts: &CertOptions) -> Self {
        let node_cap = 1usize
            .checked_shl(p.n_b() as u32 + 1)
            .map_or(usize::MAX, |v| v - 1);
        Self {
            p,
            measure,
            dominance: opts.dominance,
            node_cap,
        }
    }

    fn step(&self, mut t: CertTuple) -> Result<Step> {
        let Some(r) = t.tree.pop() else {
            return Ok(Step::Final(FinalRegion {
                region: t.region,
                kappa: t.kappa,
                path_id: t.path_id,
                bounds: t.bounds,
                incumbents: t.incumbents,
            }));
        };
        if t.nodes_processed + 1 > self.node_cap {
            return Err(Error::NodeCapExceeded {
                cap: self.node_cap as u64,
                path: t.path_id,
            });
        }
        let qp = self.p.assemble(&r);
        let out = qpcert_assembled(&qp, &t.region)?;
        let node_tag = node_tag(&r);
        let mut cuts = [0; 3];
        let mut children = Vec::with_capacity(out.leaves.len());
        let warnings = out
            .warnings
            .into_iter()
            .map(|w| DegeneracyWarning {
                path: format!("{}/{}:{}", t.path_id, node_tag, w.path),
                detail: w.detail,
            })
            .collect();
        for leaf in out.leaves {
            let mut tree = t.tree.clone();
            let mut bounds = t.bounds.clone();
            let reason = update_tree(
                &mut tree,
                &leaf.region,
                &leaf.active_set,
                &leaf.value,
                &mut bounds,
                &qp,
                &r,
                &self.dominance,
            )?;
            let mut incumbents = t.incumbents.clone();
            match reason {
                CutReason::None => cuts[0] += 1,
                CutReason::Dominated => cuts[1] += 1,
                CutReason::IntegerFeasible => {
                    cuts[2] += 1;
                    incumbents.push(leaf.x.clone().expect("feasible leaf has an optimizer"));
                }
            }
            children.push(CertTuple {
                kappa: t.kappa + self.measure.leaf_cost(&leaf),
                path_id: format!("{}/{}:{}", t.path_id, node_tag, leaf.path),
                region: leaf.region,
                tree,
                bounds,
                incumbents,
                nodes_processed: t.nodes_processed + 1,
            });
        }
        Ok(Step::Expanded(Expansion {
            children,
            warnings,
            cuts,
        }))
    }
}

fn node_tag(r: &Relaxation) -> String {
    let mut fixed: Vec<(usize, char)> = r
        .b0
        .iter()
        .map(|&i| (i, '0'))
        .chain(r.b1.iter().map(|&i| (i, '1')))
        .collect();
    fixed.sort_unstable();
    if fixed.is_empty() {
        return "r".to_string();
    }
    fixed.iter().map(|(i, v)| format!("{i}{v}")).collect::<Vec<_>>().join(".")
}

/// Applies the cut conditions to one leaf of relaxation `r` (assembled as
/// `qp`): a dominated or infeasible leaf leaves `tree` alone, an
/// integer-feasible one extends `bounds`, anything else pushes the 1-child
/// and then the 0-child of the lowest free binary.
#[allow(clippy::too_many_arguments)]
pub fn update_tree(
    tree: &mut Vec<Relaxation>,
    region: &Polyhedron,
    active_set: &WorkingSet,
    j: &QuadraticFunc,
    bounds: &mut BoundCollection,
    qp: &AssembledQp,
    r: &Relaxation,
    cfg: &DominanceConfig,
) -> Result<CutReason> {
    if j.infinite || any_dominates_with(j, bounds, region, cfg)? {
        return Ok(CutReason::Dominated);
    }
    if qp.is_integer_feasible(&active_set.ineq_rows) {
        bounds.push(j.clone());
        return Ok(CutReason::IntegerFeasible);
    }
    let k = qp
        .branching_variable()
        .expect("a relaxation with every binary fixed is integer feasible");
    tree.push(r.fix(k, true));
    tree.push(r.fix(k, false));
    Ok(CutReason::None)
}

impl CertPartition {
    pub fn kappa_max(&self) -> u64 {
        self.regions.iter().map(|r| r.kappa).max().unwrap_or(0)
    }

    /// Maximum `κ` over the closed regions containing `theta`.
    pub fn lookup(&self, theta: &[f64]) -> Result<u64> {
        if theta.len() != self.n_theta {
            return Err(Error::UnsupportedDimension {
                expected: self.n_theta,
                actual: theta.len(),
            });
        }
        self.regions
            .iter()
            .filter(|r| r.region.contains(theta))
            .map(|r| r.kappa)
            .max()
            .ok_or_else(|| Error::NotCovered(theta.to_vec()))
    }

    /// Regions containing `theta`.
    pub fn containing<'s>(&'s self, theta: &'s [f64]) -> impl Iterator<Item = &'s FinalRegion> + 's {
        self.regions.iter().filter(move |r| r.region.contains(theta))
    }

    pub fn to_json(&self) -> Result<String> {
        let repr = PartitionRepr {
            measure: self.measure.clone(),
            n_theta: self.n_theta,
            regions: self
                .regions
                .iter()
                .map(|r| RegionRecord {
                    region: RegionRepr::from_region(&r.region),
                    kappa: r.kappa,
                    path_id: r.path_id.clone(),
                })
                .collect(),
            summary: Summary {
                kappa_max: self.kappa_max(),
                region_count: self.regions.len(),
                t_cert_seconds: Num(self.stats.t_cert_seconds),
            },
        };
        Ok(serde_json::to_string_pretty(&repr)?)
    }

    /// Reads a partition export. Only the regions and the summary survive
    /// the round trip; upper bounds and warnings are not stored.
    pub fn from_json(s: &str) -> Result<Self> {
        let repr: PartitionRepr = serde_json::from_str(s)?;
        let mut regions = Vec::with_capacity(repr.regions.len());
        for (k, rec) in repr.regions.into_iter().enumerate() {
            let region = rec
                .region
                .to_region(repr.n_theta, &format!("regions[{k}]"))
                .map_err(|message| Error::Parse {
                    line: 0,
                    column: 0,
                    message,
                })?;
            regions.push(FinalRegion {
                region,
                kappa: rec.kappa,
                path_id: rec.path_id,
                bounds: BoundCollection::new(),
                incumbents: Vec::new(),
            });
        }
        let stats = CertStats {
            kappa_max: repr.summary.kappa_max,
            region_count: repr.summary.region_count,
            t_cert_seconds: repr.summary.t_cert_seconds.0,
            ..CertStats::default()
        };
        if stats.region_count != regions.len() {
            return Err(Error::Parse {
                line: 0,
                column: 0,
                message: format!(
                    "field `summary.region_count`: {} but {} regions present",
                    stats.region_count,
                    regions.len()
                ),
            });
        }
        Ok(Self {
            measure: repr.measure,
            n_theta: repr.n_theta,
            regions,
            warnings: Vec::new(),
            stats,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionRepr {
    measure: String,
    n_theta: usize,
    regions: Vec<RegionRecord>,
    summary: Summary,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionRecord {
    #[serde(flatten)]
    region: RegionRepr,
    kappa: u64,
    path_id: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Summary {
    kappa_max: u64,
    region_count: usize,
    t_cert_seconds: Num,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnb::solve_miqp;
    use crate::measure::{Iterations, Nodes};
    use crate::numerics::Matrix;
    use crate::problem::random_mpmiqp;
    use crate::qpcert::qpcert;

    fn scalar_family(binaries: Vec<usize>) -> MpMiqp {
        // min ½x² − θx, x ≤ 0.5
        MpMiqp {
            h: Matrix::identity(1),
            f: vec![0.0],
            f_theta: Matrix::from_rows(&[[-1.0]], 1),
            a: Matrix::from_rows(&[[1.0]], 1),
            b: vec![0.5],
            w: Matrix::zeros(1, 1),
            binary_indices: binaries,
            theta0: Polyhedron::from_box(&[-1.0], &[1.0]),
        }
    }

    #[test]
    fn continuous_problem_matches_qpcert() {
        let p = scalar_family(vec![]);
        let part = certify(&p, &Iterations, &CertOptions::default()).unwrap();
        let leaves = qpcert(&p, &p.root(), &p.theta0).unwrap().leaves;
        assert_eq!(part.regions.len(), leaves.len());
        let mut kappas: Vec<u64> = leaves.iter().map(|l| l.kappa as u64).collect();
        let mut got: Vec<u64> = part.regions.iter().map(|r| r.kappa).collect();
        kappas.sort_unstable();
        got.sort_unstable();
        assert_eq!(kappas, got);
    }

    #[test]
    fn integral_root_single_node() {
        // min ½(x − 2)²: x clips to the upper bound for every θ
        let mut p = scalar_family(vec![0]);
        p.f = vec![-2.0];
        p.f_theta = Matrix::zeros(1, 1);
        p.b = vec![5.0];
        let part = certify(&p, &Nodes, &CertOptions::default()).unwrap();
        assert!(part.regions.iter().all(|r| r.kappa == 1));
        let it = certify(&p, &Iterations, &CertOptions::default()).unwrap();
        let root = qpcert(&p, &p.root(), &p.theta0).unwrap();
        for r in &it.regions {
            assert!(root.leaves.iter().any(|l| l.kappa as u64 == r.kappa));
        }
    }

    #[test]
    fn update_tree_cases() {
        let p = random_mpmiqp(3, 2, 2, 4, 2);
        let r = p.root();
        let qp = p.assemble(&r);
        let region = p.theta0.clone();
        let cfg = DominanceConfig::default();
        let mut tree = vec![];
        let mut bounds = BoundCollection::new();

        let reason = update_tree(
            &mut tree,
            &region,
            &WorkingSet::equalities_only(0),
            &QuadraticFunc::infinite(2),
            &mut bounds,
            &qp,
            &r,
            &cfg,
        )
        .unwrap();
        assert_eq!(reason, CutReason::Dominated);
        assert!(tree.is_empty());

        // bound rows of both free binaries: upper of x2 (row m), lower of x3 (row m+3)
        let ws = WorkingSet {
            eq_rows: vec![],
            ineq_rows: vec![p.m(), p.m() + 3],
        };
        let j = QuadraticFunc::constant(2, 1.0);
        let reason = update_tree(&mut tree, &region, &ws, &j, &mut bounds, &qp, &r, &cfg).unwrap();
        assert_eq!(reason, CutReason::IntegerFeasible);
        assert_eq!(bounds.len(), 1);
        assert!(tree.is_empty());

        let lower = QuadraticFunc::constant(2, 0.0);
        let ws = WorkingSet {
            eq_rows: vec![],
            ineq_rows: vec![p.m()],
        };
        let reason = update_tree(&mut tree, &region, &ws, &lower, &mut bounds, &qp, &r, &cfg).unwrap();
        assert_eq!(reason, CutReason::None);
        assert_eq!(tree.len(), 2);
        assert_eq!(tree[1], r.fix(2, false));
        assert_eq!(tree[0], r.fix(2, true));

        // 1.0 ≥ 1.0 everywhere
        let reason = update_tree(&mut tree, &region, &ws, &j, &mut bounds, &qp, &r, &cfg).unwrap();
        assert_eq!(reason, CutReason::Dominated);
        assert_eq!(tree.len(), 2);
    }

    fn partition_of(regions: Vec<(Polyhedron, u64)>) -> CertPartition {
        CertPartition {
            measure: "iterations".into(),
            n_theta: 1,
            regions: regions
                .into_iter()
                .enumerate()
                .map(|(i, (region, kappa))| FinalRegion {
                    region,
                    kappa,
                    path_id: i.to_string(),
                    bounds: BoundCollection::new(),
                    incumbents: vec![],
                })
                .collect(),
            warnings: vec![],
            stats: CertStats::default(),
        }
    }

    #[test]
    fn lookup_takes_max_on_shared_facet() {
        let part = partition_of(vec![
            (Polyhedron::from_box(&[-1.0], &[0.0]), 5),
            (Polyhedron::from_box(&[0.0], &[1.0]), 7),
        ]);
        assert_eq!(part.lookup(&[-0.5]).unwrap(), 5);
        assert_eq!(part.lookup(&[0.0]).unwrap(), 7);
        assert_eq!(part.lookup(&[1.5]), Err(Error::NotCovered(vec![1.5])));
    }

    #[test]
    fn export_round_trip() {
        let part = partition_of(vec![(Polyhedron::from_box(&[-1.0], &[1.0]), 3)]);
        let back = CertPartition::from_json(&part.to_json().unwrap()).unwrap();
        assert_eq!(back.regions.len(), 1);
        assert_eq!(back.regions[0].region, part.regions[0].region);
        assert_eq!(back.kappa_max(), 3);
        assert!(matches!(
            CertPartition::from_json("{\"measure\": 1}"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn sound_at_chebyshev_centers() {
        let p = random_mpmiqp(11, 2, 3, 5, 2);
        let part = certify(&p, &Iterations, &CertOptions::default()).unwrap();
        for r in &part.regions {
            let (c, _) = r.region.chebyshev_center().unwrap();
            let online = solve_miqp(&p, &c).unwrap();
            assert!(r.kappa >= online.total_kappa as u64);
            assert!(part.lookup(&c).unwrap() >= online.total_kappa as u64);
        }
    }

    #[test]
    fn workers_do_not_change_output() {
        let p = random_mpmiqp(5, 2, 3, 5, 2);
        let one = certify(&p, &Iterations, &CertOptions::default()).unwrap();
        let opts = CertOptions {
            workers: 4,
            ..CertOptions::default()
        };
        let four = certify(&p, &Iterations, &opts).unwrap();
        assert_eq!(one.regions.len(), four.regions.len());
        for (a, b) in one.regions.iter().zip(&four.regions) {
            assert_eq!(a.path_id, b.path_id);
            assert_eq!(a.kappa, b.kappa);
            assert_eq!(a.region, b.region);
        }
    }
}
