//! Circuit representation: an immutable, layered DAG of input, sum, and
//! product units with log-space edge parameters.
//!
//! Circuits are constructed through [`CircuitBuilder`], which validates
//! smoothness and decomposability, inserts pass-through units so that sum and
//! product layers alternate, and duplicates multi-parent product units so
//! every product has exactly one parent. Units are stored in topological
//! order (children before parents) and additionally partitioned into layers
//! of equal depth for batched evaluation.

mod build;
mod support;
mod text;

pub use build::{CircuitBuilder, UnitSpec};
pub use support::{
    check_determinism, imbalance_report, support_sizes, DeterminismCheck, DeterminismReport,
    ImbalanceEntry, DEFAULT_EXACT_VAR_LIMIT,
};
pub(crate) use support::cached_determinism;
pub use text::{deserialize, serialize, FORMAT_TAG};

use crate::error::{Error, Result};
use crate::math::logsumexp;
use std::sync::OnceLock;

/// Dense identifier of a unit within one circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitId(pub u32);

impl UnitId {
    #[inline(always)]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for UnitId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitKind {
    Input,
    Sum,
    Product,
}

/// Set of variable indices, backed by a fixed-width bitmask.
#[derive(Clone, PartialEq, Eq)]
pub struct VarSet {
    bits: Box<[u64]>,
}

impl VarSet {
    pub fn empty(num_vars: usize) -> Self {
        VarSet {
            bits: vec![0u64; num_vars.div_ceil(64)].into_boxed_slice(),
        }
    }

    pub fn singleton(num_vars: usize, var: usize) -> Self {
        let mut s = Self::empty(num_vars);
        s.insert(var);
        s
    }

    #[inline]
    pub fn insert(&mut self, var: usize) {
        self.bits[var / 64] |= 1u64 << (var % 64);
    }

    #[inline]
    pub fn contains(&self, var: usize) -> bool {
        self.bits[var / 64] & (1u64 << (var % 64)) != 0
    }

    pub fn union_with(&mut self, other: &VarSet) {
        for (a, b) in self.bits.iter_mut().zip(other.bits.iter()) {
            *a |= *b;
        }
    }

    pub fn intersects(&self, other: &VarSet) -> bool {
        self.bits
            .iter()
            .zip(other.bits.iter())
            .any(|(a, b)| a & b != 0)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64).filter_map(move |b| {
                if bits & (1u64 << b) != 0 {
                    Some(w * 64 + b)
                } else {
                    None
                }
            })
        })
    }
}

impl std::fmt::Debug for VarSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// An immutable, validated probabilistic circuit.
///
/// Invariants established at construction:
/// - units are topologically ordered (children strictly before parents);
/// - exactly one root, every unit reachable from it;
/// - every sum unit is smooth, every product unit is decomposable;
/// - no sum unit feeds a sum unit and no product feeds a product;
/// - every product unit has exactly one parent.
pub struct Circuit {
    kinds: Vec<UnitKind>,
    child_start: Vec<u32>,
    children: Vec<UnitId>,
    input_spec: Vec<(u32, u32)>,
    scope: Vec<VarSet>,
    depth: Vec<u32>,
    layers: Vec<Vec<UnitId>>,
    root: UnitId,
    num_vars: usize,
    var_arity: Vec<u32>,
    sum_edge_start: Vec<u32>,
    num_sum_edges: usize,
    origin: Vec<Option<u32>>,
    det_cache: OnceLock<DeterminismReport>,
}

impl Circuit {
    #[inline]
    pub fn num_units(&self) -> usize {
        self.kinds.len()
    }

    #[inline]
    pub fn root(&self) -> UnitId {
        self.root
    }

    #[inline]
    pub fn kind(&self, u: UnitId) -> UnitKind {
        self.kinds[u.index()]
    }

    #[inline]
    pub fn children(&self, u: UnitId) -> &[UnitId] {
        let i = u.index();
        &self.children[self.child_start[i] as usize..self.child_start[i + 1] as usize]
    }

    /// (variable, matched value) for an input unit.
    #[inline]
    pub fn input_spec(&self, u: UnitId) -> (usize, u32) {
        let (v, a) = self.input_spec[u.index()];
        (v as usize, a)
    }

    #[inline]
    pub fn scope(&self, u: UnitId) -> &VarSet {
        &self.scope[u.index()]
    }

    #[inline]
    pub fn depth(&self, u: UnitId) -> usize {
        self.depth[u.index()] as usize
    }

    /// Units grouped by depth; `layers()[0]` holds all input units. Every
    /// unit's children live in strictly earlier layers.
    #[inline]
    pub fn layers(&self) -> &[Vec<UnitId>] {
        &self.layers
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    #[inline]
    pub fn var_arity(&self) -> &[u32] {
        &self.var_arity
    }

    #[inline]
    pub fn num_sum_edges(&self) -> usize {
        self.num_sum_edges
    }

    /// Range of this sum unit's edges in edge-indexed arrays
    /// ([`ParamVector`], flow accumulators). Empty for non-sum units.
    #[inline]
    pub fn sum_edges(&self, u: UnitId) -> std::ops::Range<usize> {
        let i = u.index();
        self.sum_edge_start[i] as usize..self.sum_edge_start[i + 1] as usize
    }

    pub fn units(&self) -> impl DoubleEndedIterator<Item = UnitId> + '_ {
        (0..self.num_units() as u32).map(UnitId)
    }

    pub fn sum_units(&self) -> impl DoubleEndedIterator<Item = UnitId> + '_ {
        self.units().filter(|&u| self.kind(u) == UnitKind::Sum)
    }

    /// Spec index this unit originated from, if it was not synthesized by
    /// the builder (pass-through or duplicate).
    pub fn origin(&self, u: UnitId) -> Option<usize> {
        self.origin[u.index()].map(|o| o as usize)
    }

    pub(crate) fn det_cache(&self) -> &OnceLock<DeterminismReport> {
        &self.det_cache
    }

    /// Total number of edges in the DAG (the circuit size |p|).
    pub fn num_edges(&self) -> usize {
        self.children.len()
    }
}

impl std::fmt::Debug for Circuit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Circuit")
            .field("units", &self.num_units())
            .field("edges", &self.num_edges())
            .field("vars", &self.num_vars)
            .field("root", &self.root)
            .field("layers", &self.layers.len())
            .finish()
    }
}

/// Log-space edge parameters, one entry per (sum unit, child) edge in the
/// circuit's edge order. For every sum unit the entries logsumexp to 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    log_theta: Vec<f64>,
}

impl ParamVector {
    /// Uniform parameters: every sum unit mixes its children equally.
    pub fn uniform(c: &Circuit) -> Self {
        let mut log_theta = vec![0.0; c.num_sum_edges()];
        for u in c.sum_units() {
            let r = c.sum_edges(u);
            let w = -((r.len() as f64).ln());
            log_theta[r].fill(w);
        }
        ParamVector { log_theta }
    }

    /// Per-sum-unit symmetric Dirichlet(1) draws, in log space.
    pub fn dirichlet(c: &Circuit, rng: &mut impl rand::Rng) -> Self {
        let mut log_theta = vec![0.0; c.num_sum_edges()];
        for u in c.sum_units() {
            let r = c.sum_edges(u);
            let mut total = 0.0;
            for e in r.clone() {
                let g: f64 = -(1.0 - rng.gen::<f64>()).ln();
                log_theta[e] = g;
                total += g;
            }
            let lt = total.ln();
            for e in r {
                log_theta[e] = log_theta[e].ln() - lt;
            }
        }
        ParamVector { log_theta }
    }

    pub(crate) fn from_raw(log_theta: Vec<f64>) -> Self {
        ParamVector { log_theta }
    }

    pub fn from_log(c: &Circuit, log_theta: Vec<f64>) -> Result<Self> {
        if log_theta.len() != c.num_sum_edges() {
            return Err(Error::ParamShape {
                got: log_theta.len(),
                expected: c.num_sum_edges(),
            });
        }
        let p = ParamVector { log_theta };
        p.validate(c)?;
        Ok(p)
    }

    /// Checks shape, finiteness (−∞ allowed) and per-unit normalization
    /// within 1e-10.
    pub fn validate(&self, c: &Circuit) -> Result<()> {
        if self.log_theta.len() != c.num_sum_edges() {
            return Err(Error::ParamShape {
                got: self.log_theta.len(),
                expected: c.num_sum_edges(),
            });
        }
        for (i, &t) in self.log_theta.iter().enumerate() {
            if t.is_nan() || t == f64::INFINITY {
                return Err(Error::NonFiniteValue(format!("parameter {i} is {t}")));
            }
        }
        for u in c.sum_units() {
            let lse = logsumexp(&self.log_theta[c.sum_edges(u)]);
            if lse.abs() > 1e-10 {
                return Err(Error::NonFiniteValue(format!(
                    "sum unit {u} is not normalized (logsumexp = {lse:e})"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn log_theta(&self) -> &[f64] {
        &self.log_theta
    }

    #[inline]
    pub fn log_theta_mut(&mut self) -> &mut [f64] {
        &mut self.log_theta
    }

    #[inline]
    pub fn theta(&self, edge: usize) -> f64 {
        self.log_theta[edge].exp()
    }

    pub fn len(&self) -> usize {
        self.log_theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_theta.is_empty()
    }

    /// Renormalizes every sum unit exactly (subtracts the logsumexp).
    pub fn renormalize(&mut self, c: &Circuit) {
        for u in c.sum_units() {
            let r = c.sum_edges(u);
            let lse = logsumexp(&self.log_theta[r.clone()]);
            if lse.is_finite() && lse != 0.0 {
                for e in r {
                    self.log_theta[e] -= lse;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal_mixture() -> (Circuit, ParamVector) {
        let mut b = CircuitBuilder::new();
        let hi = b.input(0, 1);
        let lo = b.input(0, 0);
        let root = b.sum_with_params(&[hi, lo], &[0.3f64.ln(), 0.7f64.ln()]);
        b.build_with_params(root).unwrap()
    }

    #[test]
    fn minimal_mixture_is_three_units() {
        let (c, p) = minimal_mixture();
        assert_eq!(c.num_units(), 3);
        assert_eq!(c.kind(c.root()), UnitKind::Sum);
        assert_eq!(c.scope(c.root()).iter().collect::<Vec<_>>(), vec![0]);
        assert_eq!(c.num_sum_edges(), 2);
        p.validate(&c).unwrap();
    }

    #[test]
    fn overlapping_product_scope_is_rejected() {
        let mut b = CircuitBuilder::new();
        let a = b.input(0, 1);
        let c = b.input(0, 0);
        let prod = b.product(&[a, c]);
        let err = b.build(prod).unwrap_err();
        match err {
            Error::DecomposabilityViolation { unit, .. } => assert_eq!(unit, 2),
            other => panic!("expected decomposability violation, got {other}"),
        }
    }

    #[test]
    fn non_smooth_sum_is_rejected() {
        let mut b = CircuitBuilder::new();
        let a = b.input(0, 1);
        let c = b.input(1, 0);
        let s = b.sum(&[a, c]);
        let err = b.build(s).unwrap_err();
        assert!(matches!(err, Error::SmoothnessViolation { unit: 2, .. }));
    }

    #[test]
    fn cycle_is_rejected() {
        // hand-rolled specs so we can point a child at a later unit and back
        let specs = vec![
            UnitSpec::Sum { children: vec![1] },
            UnitSpec::Sum { children: vec![0] },
        ];
        let b = CircuitBuilder::from_specs(specs);
        assert!(matches!(b.build(0), Err(Error::Cycle(_))));
    }

    #[test]
    fn multi_parent_product_is_duplicated() {
        let mut b = CircuitBuilder::new();
        let x1 = b.input(0, 1);
        let x0 = b.input(0, 0);
        let y1 = b.input(1, 1);
        let y0 = b.input(1, 0);
        let sx = b.sum(&[x1, x0]);
        let sy = b.sum(&[y1, y0]);
        let shared = b.product(&[sx, sy]);
        let s1 = b.sum(&[shared]);
        let s2 = b.sum(&[shared]);
        let p1 = b.product(&[s1]); // keep alternation in user input irrelevant:
        let root = b.sum(&[p1, s2]); // builder wraps the sum child s2 itself
        let c = b.build(root).unwrap();

        // every product unit has exactly one parent
        let mut parents = vec![0usize; c.num_units()];
        for u in c.units() {
            for &ch in c.children(u) {
                parents[ch.index()] += 1;
            }
        }
        for u in c.units() {
            if c.kind(u) == UnitKind::Product {
                assert_eq!(parents[u.index()], 1, "product {u} has multiple parents");
            }
        }
        // and no same-kind adjacency
        for u in c.units() {
            for &ch in c.children(u) {
                assert_ne!(
                    (c.kind(u) == UnitKind::Sum) && (c.kind(ch) == UnitKind::Sum),
                    true
                );
                assert!(!(c.kind(u) == UnitKind::Product && c.kind(ch) == UnitKind::Product));
            }
        }
    }

    #[test]
    fn layers_respect_topological_contract() {
        let (c, _) = minimal_mixture();
        for u in c.units() {
            for &ch in c.children(u) {
                assert!(c.depth(ch) < c.depth(u));
                assert!(ch.index() < u.index());
            }
        }
        assert_eq!(c.layers().len(), 2);
    }

    #[test]
    fn dirichlet_params_are_normalized_and_seeded() {
        use rand::SeedableRng;
        let (c, _) = minimal_mixture();
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let p1 = ParamVector::dirichlet(&c, &mut r1);
        let p2 = ParamVector::dirichlet(&c, &mut r2);
        assert_eq!(p1.log_theta(), p2.log_theta());
        p1.validate(&c).unwrap();
    }
}
