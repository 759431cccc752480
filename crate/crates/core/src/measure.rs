//! Complexity measures, registered by name and chosen at run time.
//!
//! A measure assigns a cost to each certified relaxation leaf and, for
//! validation, the matching total to an online solve. The certifier adds
//! leaf costs along each path, so the pair must agree node by node.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::bnb::SolveTrace;
use crate::error::{Error, Result};
use crate::qpcert::CertLeaf;

pub trait ComplexityMeasure: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    /// Cost charged for solving one relaxation on this leaf.
    fn leaf_cost(&self, leaf: &CertLeaf) -> u64;

    /// Total cost of an online branch-and-bound run.
    fn online_cost(&self, trace: &SolveTrace) -> u64;
}

impl fmt::Debug for dyn ComplexityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexityMeasure({})", self.name())
    }
}

/// Active-set iterations (equality-constrained KKT solves).
#[derive(Debug, Clone, Copy, Default)]
pub struct Iterations;

impl ComplexityMeasure for Iterations {
    fn name(&self) -> &'static str {
        "iterations"
    }

    fn description(&self) -> &'static str {
        "accumulated active-set QP iterations over all relaxations"
    }

    fn leaf_cost(&self, leaf: &CertLeaf) -> u64 {
        leaf.kappa as u64
    }

    fn online_cost(&self, trace: &SolveTrace) -> u64 {
        trace.total_kappa as u64
    }
}

/// Branch-and-bound nodes (relaxations solved).
#[derive(Debug, Clone, Copy, Default)]
pub struct Nodes;

impl ComplexityMeasure for Nodes {
    fn name(&self) -> &'static str {
        "nodes"
    }

    fn description(&self) -> &'static str {
        "number of relaxations solved"
    }

    fn leaf_cost(&self, _leaf: &CertLeaf) -> u64 {
        1
    }

    fn online_cost(&self, trace: &SolveTrace) -> u64 {
        trace.nodes_explored() as u64
    }
}

#[derive(Clone)]
pub struct MeasureRegistry {
    entries: BTreeMap<&'static str, Arc<dyn ComplexityMeasure>>,
}

impl MeasureRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Iterations));
        r.register(Arc::new(Nodes));
        r
    }

    /// Registers `m`, replacing any measure of the same name.
    pub fn register(&mut self, m: Arc<dyn ComplexityMeasure>) {
        self.entries.insert(m.name(), m);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ComplexityMeasure>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownMeasure(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn ComplexityMeasure>> {
        self.entries.values()
    }
}

impl Default for MeasureRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

/// Looks `name` up in the built-in registry.
pub fn measure_by_name(name: &str) -> Result<Arc<dyn ComplexityMeasure>> {
    MeasureRegistry::with_builtins().get(name)
}
