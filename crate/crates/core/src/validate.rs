//! Sampling comparison of a certified partition against the online solver.

use std::io::Write;

use rayon::prelude::*;

use crate::bnb::solve_miqp;
use crate::bnbcert::CertPartition;
use crate::error::{Error, Result};
use crate::geometry::grid;
use crate::measure::ComplexityMeasure;
use crate::numerics::Vector;
use crate::problem::MpMiqp;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationPoint {
    pub theta: Vector,
    pub kappa_cert: u64,
    pub kappa_online: u64,
}

impl ValidationPoint {
    pub fn gap(&self) -> i64 {
        self.kappa_cert as i64 - self.kappa_online as i64
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub points: Vec<ValidationPoint>,
    /// Sample points not contained in any region.
    pub not_covered: Vec<Vector>,
}

impl ValidationReport {
    pub fn min_gap(&self) -> Option<i64> {
        self.points.iter().map(ValidationPoint::gap).min()
    }

    pub fn max_gap(&self) -> Option<i64> {
        self.points.iter().map(ValidationPoint::gap).max()
    }

    pub fn equality_rate(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let eq = self.points.iter().filter(|p| p.gap() == 0).count();
        eq as f64 / self.points.len() as f64
    }

    /// Fraction of points with a strictly positive gap.
    pub fn positive_rate(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let pos = self.points.iter().filter(|p| p.gap() > 0).count();
        pos as f64 / self.points.len() as f64
    }

    /// No negative gap and full coverage.
    pub fn passed(&self) -> bool {
        self.not_covered.is_empty() && self.min_gap().is_none_or(|g| g >= 0)
    }

    /// `(gap, count)` pairs in increasing gap order.
    pub fn gap_histogram(&self) -> Vec<(i64, usize)> {
        let mut h = std::collections::BTreeMap::new();
        for p in &self.points {
            *h.entry(p.gap()).or_insert(0) += 1;
        }
        h.into_iter().collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n_theta = self.points.first().map_or(0, |p| p.theta.len());
        let mut header: Vec<String> = (1..=n_theta).map(|i| format!("theta{i}")).collect();
        header.extend(["kappa_cert", "kappa_online", "gap"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for p in &self.points {
            for t in &p.theta {
                write!(w, "{t:.16e},")?;
            }
            writeln!(w, "{},{},{}", p.kappa_cert, p.kappa_online, p.gap())?;
        }
        Ok(())
    }
}

/// Grid points of `Θ⁰` followed by the Chebyshev center of every region.
pub fn sample_points(p: &MpMiqp, partition: &CertPartition, points_per_axis: usize) -> Result<Vec<Vector>> {
    let mut pts: Vec<Vector> = grid(&p.theta0, points_per_axis)?
        .into_iter()
        .filter(|t| p.theta0.contains(t))
        .collect();
    for r in &partition.regions {
        pts.push(r.region.chebyshev_center()?.0);
    }
    Ok(pts)
}

/// Compares `partition.lookup` with the online cost under `measure` at
/// `points`, spread over `workers` threads.
pub fn validate_points(
    p: &MpMiqp,
    partition: &CertPartition,
    measure: &dyn ComplexityMeasure,
    points: Vec<Vector>,
    workers: usize,
) -> Result<ValidationReport> {
    if partition.n_theta != p.n_theta() {
        return Err(Error::UnsupportedDimension {
            expected: p.n_theta(),
            actual: partition.n_theta,
        });
    }
    let eval = |theta: Vector| -> Result<std::result::Result<ValidationPoint, Vector>> {
        let kappa_cert = match partition.lookup(&theta) {
            Ok(k) => k,
            Err(Error::NotCovered(t)) => return Ok(Err(t)),
            Err(e) => return Err(e),
        };
        let trace = solve_miqp(p, &theta)?;
        Ok(Ok(ValidationPoint {
            kappa_online: measure.online_cost(&trace),
            kappa_cert,
            theta,
        }))
    };
    let results: Vec<_> = if workers <= 1 {
        points.into_iter().map(eval).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::NumericalFailure(format!("thread pool: {e}")))?;
        pool.install(|| points.into_par_iter().map(eval).collect())
    };
    let mut report = ValidationReport::default();
    for r in results {
        match r? {
            Ok(pt) => report.points.push(pt),
            Err(theta) => report.not_covered.push(theta),
        }
    }
    Ok(report)
}

pub fn validate(
    p: &MpMiqp,
    partition: &CertPartition,
    measure: &dyn ComplexityMeasure,
    points_per_axis: usize,
    workers: usize,
) -> Result<ValidationReport> {
    let pts = sample_points(p, partition, points_per_axis)?;
    validate_points(p, partition, measure, pts, workers)
}
