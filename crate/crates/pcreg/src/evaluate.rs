//! Batched forward and backward passes over a circuit.
//!
//! The forward pass fills a per-unit, per-sample table of log values; the
//! backward pass walks the DAG top-down, turning contexts into per-edge
//! flows. Two modes share the kernels:
//!
//! - `Deterministic`: sum units add their children without parameters. On a
//!   deterministic circuit this computes support indicators, and with a
//!   softened dataset the aggregated per-edge results are exactly the flows
//!   with respect to the implicitly softened dataset.
//! - `Weighted`: sum units apply their parameters, so the root value is the
//!   model likelihood and the backward pass yields *expected flows* — the
//!   posterior mass of each edge under the latent-variable view — which
//!   drive EM.
//!
//! All per-sample arithmetic stays in natural-log space; per-edge aggregates
//! are accumulated in linear space with compensated summation. The dataset
//! dimension is partitioned into fixed chunks that are processed in parallel
//! and merged in chunk order, so results are identical for any worker count.

use crate::circuit::{Circuit, ParamVector, UnitId, UnitKind};
use crate::data::WeightedDataset;
use crate::error::{Error, Result};
use crate::math::{fast_exp, logaddexp, Kahan};
use rayon::prelude::*;

/// Rows per evaluation chunk. Chosen so a chunk's value and context tables
/// for a mid-sized circuit stay cache-friendly.
pub const CHUNK_ROWS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// Alg-1 style: sum units ignore parameters (support semantics).
    Deterministic,
    /// Alg-3 style: sum units mix children by their parameters.
    Weighted,
}

/// Per-unit, per-sample log values produced by [`forward`].
pub struct ValueTable {
    log_values: Vec<f64>,
    num_units: usize,
    batch: usize,
    mode: EvalMode,
}

impl ValueTable {
    #[inline]
    pub fn batch(&self) -> usize {
        self.batch
    }

    #[inline]
    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    #[inline]
    pub fn log_value(&self, u: UnitId, sample: usize) -> f64 {
        self.log_values[u.index() * self.batch + sample]
    }

    #[inline]
    pub fn unit_row(&self, u: UnitId) -> &[f64] {
        &self.log_values[u.index() * self.batch..(u.index() + 1) * self.batch]
    }
}

/// Per-edge flows (or expected flows) aggregated over a dataset, plus the
/// aggregated context mass of every unit.
#[derive(Clone)]
pub struct FlowAccumulator {
    edges: Vec<Kahan>,
    context: Vec<Kahan>,
    total_weight: f64,
    zero_prob_samples: usize,
    mode: EvalMode,
}

impl FlowAccumulator {
    fn zeros(c: &Circuit, mode: EvalMode) -> Self {
        FlowAccumulator {
            edges: vec![Kahan::default(); c.num_sum_edges()],
            context: vec![Kahan::default(); c.num_units()],
            total_weight: 0.0,
            zero_prob_samples: 0,
            mode,
        }
    }

    #[inline]
    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    #[inline]
    pub fn edge_flow(&self, edge: usize) -> f64 {
        self.edges[edge].value()
    }

    pub fn edge_flows(&self) -> Vec<f64> {
        self.edges.iter().map(|k| k.value()).collect()
    }

    #[inline]
    pub fn context_mass(&self, u: UnitId) -> f64 {
        self.context[u.index()].value()
    }

    /// Σ of sample weights seen by the pass.
    #[inline]
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Samples whose root value was −∞ (no support / zero likelihood).
    #[inline]
    pub fn zero_probability_samples(&self) -> usize {
        self.zero_prob_samples
    }

    pub fn merge(&mut self, other: &FlowAccumulator) {
        debug_assert_eq!(self.edges.len(), other.edges.len());
        for (a, b) in self.edges.iter_mut().zip(&other.edges) {
            a.merge(*b);
        }
        for (a, b) in self.context.iter_mut().zip(&other.context) {
            a.merge(*b);
        }
        self.total_weight += other.total_weight;
        self.zero_prob_samples += other.zero_prob_samples;
    }

    /// Copy with Laplace pseudocounts folded in: every edge of a sum unit
    /// with k children gains α/k, and the total weight gains α.
    pub fn with_pseudocount(&self, c: &Circuit, alpha: f64) -> FlowAccumulator {
        let mut out = self.clone();
        if alpha > 0.0 {
            for u in c.sum_units() {
                let r = c.sum_edges(u);
                let add = alpha / r.len() as f64;
                for e in r {
                    out.edges[e].add(add);
                }
            }
            out.total_weight += alpha;
        }
        out
    }
}

/// Log-space leaf values per input unit: (match, miss).
fn leaf_weights(c: &Circuit, d: &WeightedDataset) -> Vec<(f64, f64)> {
    let beta = d.softening().unwrap_or(1.0);
    c.units()
        .map(|u| {
            if c.kind(u) != UnitKind::Input {
                return (0.0, 0.0);
            }
            let (var, _) = c.input_spec(u);
            let k = c.var_arity()[var];
            // the boolean rule keeps the full (1−β); k ≥ 3 follows the
            // categorical rule with (1−β)/k
            let miss = if k == 2 { 1.0 - beta } else { (1.0 - beta) / k as f64 };
            (beta.ln(), miss.ln())
        })
        .collect()
}

fn check_compatible(c: &Circuit, d: &WeightedDataset) -> Result<()> {
    if d.num_vars() != c.num_vars() {
        return Err(Error::ArityMismatch {
            dataset_vars: d.num_vars(),
            circuit_vars: c.num_vars(),
        });
    }
    for (v, (&da, &ca)) in d.var_arity().iter().zip(c.var_arity()).enumerate() {
        if da > ca {
            return Err(Error::NonFiniteValue(format!(
                "variable {v}: dataset arity {da} exceeds circuit arity {ca}"
            )));
        }
    }
    Ok(())
}

/// Forward pass over the whole dataset. The table holds one log value per
/// (unit, sample); for large datasets prefer [`accumulate_flows`] or
/// [`loglikelihood`], which stream over chunks instead.
pub fn forward(
    c: &Circuit,
    p: &ParamVector,
    d: &WeightedDataset,
    mode: EvalMode,
) -> Result<ValueTable> {
    p.validate(c)?;
    check_compatible(c, d)?;
    let leaves = leaf_weights(c, d);
    let batch = d.len();
    let mut log_values = vec![0.0; c.num_units() * batch];
    forward_chunk(c, p, d, 0..batch, mode, &leaves, &mut log_values, batch)?;
    Ok(ValueTable {
        log_values,
        num_units: c.num_units(),
        batch,
        mode,
    })
}

/// Backward pass: aggregates per-edge flows (Deterministic mode) or expected
/// flows (Weighted mode) over the dataset behind `v`.
pub fn backward(
    c: &Circuit,
    p: &ParamVector,
    d: &WeightedDataset,
    v: &ValueTable,
    mode: EvalMode,
) -> Result<FlowAccumulator> {
    if v.batch != d.len() || v.num_units != c.num_units() {
        return Err(Error::InconsistentTable {
            got: format!("{} units × {} samples", v.num_units, v.batch),
            expected: format!("{} units × {} samples", c.num_units(), d.len()),
        });
    }
    if v.mode != mode {
        return Err(Error::InconsistentTable {
            got: format!("{:?} value table", v.mode),
            expected: format!("{mode:?} value table"),
        });
    }
    let mut acc = FlowAccumulator::zeros(c, mode);
    backward_chunk(c, p, d, 0..d.len(), mode, &v.log_values, v.batch, &mut acc);
    Ok(acc)
}

/// Streaming forward+backward over the dataset: chunks are evaluated in
/// parallel and merged in chunk order.
pub fn accumulate_flows(
    c: &Circuit,
    p: &ParamVector,
    d: &WeightedDataset,
    mode: EvalMode,
) -> Result<FlowAccumulator> {
    p.validate(c)?;
    check_compatible(c, d)?;
    let leaves = leaf_weights(c, d);
    let n = d.len();
    let ranges: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(CHUNK_ROWS)
        .map(|s| s..(s + CHUNK_ROWS).min(n))
        .collect();
    let parts: Vec<Result<FlowAccumulator>> = ranges
        .into_par_iter()
        .map(|range| {
            let b = range.len();
            let mut vals = vec![0.0; c.num_units() * b];
            forward_chunk(c, p, d, range.clone(), mode, &leaves, &mut vals, b)?;
            let mut acc = FlowAccumulator::zeros(c, mode);
            backward_chunk(c, p, d, range, mode, &vals, b, &mut acc);
            Ok(acc)
        })
        .collect();
    let mut total = FlowAccumulator::zeros(c, mode);
    for part in parts {
        total.merge(&part?);
    }
    Ok(total)
}

/// Per-sample and mean log-likelihood on hard data.
#[derive(Clone, Debug)]
pub struct LlSummary {
    pub per_sample: Vec<f64>,
    /// Weighted mean; −∞ if any sample has zero probability.
    pub mean: f64,
    pub zero_prob_samples: usize,
}

pub fn loglikelihood(c: &Circuit, p: &ParamVector, d: &WeightedDataset) -> Result<LlSummary> {
    if let Some(beta) = d.softening() {
        if beta != 1.0 {
            return Err(Error::SoftenedLikelihood(beta));
        }
    }
    p.validate(c)?;
    check_compatible(c, d)?;
    let leaves = leaf_weights(c, d);
    let n = d.len();
    let ranges: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(CHUNK_ROWS)
        .map(|s| s..(s + CHUNK_ROWS).min(n))
        .collect();
    let parts: Vec<Result<Vec<f64>>> = ranges
        .par_iter()
        .map(|range| {
            let b = range.len();
            let mut vals = vec![0.0; c.num_units() * b];
            forward_chunk(c, p, d, range.clone(), EvalMode::Weighted, &leaves, &mut vals, b)?;
            let root = c.root().index();
            Ok(vals[root * b..(root + 1) * b].to_vec())
        })
        .collect();
    let mut per_sample = Vec::with_capacity(n);
    for part in parts {
        per_sample.extend(part?);
    }
    let mut acc = Kahan::default();
    let mut zero = 0usize;
    for (ll, &w) in per_sample.iter().zip(d.weights()) {
        if *ll == f64::NEG_INFINITY {
            zero += 1;
        } else {
            acc.add(w * ll);
        }
    }
    let total_w = d.total_weight();
    let mean = if zero > 0 {
        f64::NEG_INFINITY
    } else if total_w > 0.0 {
        acc.value() / total_w
    } else {
        0.0
    };
    Ok(LlSummary {
        per_sample,
        mean,
        zero_prob_samples: zero,
    })
}

#[allow(clippy::too_many_arguments)]
fn forward_chunk(
    c: &Circuit,
    p: &ParamVector,
    d: &WeightedDataset,
    rows: std::ops::Range<usize>,
    mode: EvalMode,
    leaves: &[(f64, f64)],
    vals: &mut [f64],
    b: usize,
) -> Result<()> {
    debug_assert_eq!(rows.len(), b);
    let theta = p.log_theta();
    let hard = d.softening().unwrap_or(1.0) == 1.0;
    let mut maxs = vec![0.0f64; b];
    let mut accs = vec![0.0f64; b];

    for layer in c.layers() {
        for &u in layer {
            let ui = u.index();
            match c.kind(u) {
                UnitKind::Input => {
                    let (var, a) = c.input_spec(u);
                    let col = &d.column(var)[rows.clone()];
                    let out = &mut vals[ui * b..(ui + 1) * b];
                    if hard {
                        for (o, &x) in out.iter_mut().zip(col) {
                            *o = if x as u32 == a { 0.0 } else { f64::NEG_INFINITY };
                        }
                    } else {
                        let (hit, miss) = leaves[ui];
                        for (o, &x) in out.iter_mut().zip(col) {
                            *o = if x as u32 == a { hit } else { miss };
                        }
                    }
                }
                UnitKind::Product => {
                    let children = c.children(u);
                    let (before, at) = vals.split_at_mut(ui * b);
                    let out = &mut at[..b];
                    let first = children[0].index();
                    out.copy_from_slice(&before[first * b..(first + 1) * b]);
                    for ch in &children[1..] {
                        let row = &before[ch.index() * b..(ch.index() + 1) * b];
                        for (o, &x) in out.iter_mut().zip(row) {
                            *o += x;
                        }
                    }
                }
                UnitKind::Sum => {
                    let children = c.children(u);
                    let edges = c.sum_edges(u);
                    if children.len() == 1 {
                        let t = if mode == EvalMode::Weighted {
                            theta[edges.start]
                        } else {
                            0.0
                        };
                        let (before, at) = vals.split_at_mut(ui * b);
                        let row = &before[children[0].index() * b..(children[0].index() + 1) * b];
                        for (o, &x) in at[..b].iter_mut().zip(row) {
                            *o = x + t;
                        }
                        continue;
                    }
                    maxs[..b].fill(f64::NEG_INFINITY);
                    for (ch, e) in children.iter().zip(edges.clone()) {
                        let t = if mode == EvalMode::Weighted { theta[e] } else { 0.0 };
                        let row = &vals[ch.index() * b..(ch.index() + 1) * b];
                        for (m, &x) in maxs[..b].iter_mut().zip(row) {
                            let v = x + t;
                            if v > *m {
                                *m = v;
                            }
                        }
                    }
                    accs[..b].fill(0.0);
                    for (ch, e) in children.iter().zip(edges) {
                        let t = if mode == EvalMode::Weighted { theta[e] } else { 0.0 };
                        let row = &vals[ch.index() * b..(ch.index() + 1) * b];
                        for ((acc, &m), &x) in accs[..b].iter_mut().zip(&maxs[..b]).zip(row) {
                            let v = x + t;
                            if v != f64::NEG_INFINITY {
                                *acc += fast_exp(v - m);
                            }
                        }
                    }
                    let out = &mut vals[ui * b..(ui + 1) * b];
                    for ((o, &m), &a) in out.iter_mut().zip(&maxs[..b]).zip(&accs[..b]) {
                        *o = if a > 0.0 { m + a.ln() } else { f64::NEG_INFINITY };
                    }
                }
            }
        }
    }

    let root = c.root().index();
    for &v in &vals[root * b..(root + 1) * b] {
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::NonFiniteValue(format!("root value {v}")));
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn backward_chunk(
    c: &Circuit,
    p: &ParamVector,
    d: &WeightedDataset,
    rows: std::ops::Range<usize>,
    mode: EvalMode,
    vals: &[f64],
    b: usize,
    acc: &mut FlowAccumulator,
) {
    let theta = p.log_theta();
    let weights = &d.weights()[rows.clone()];
    let mut ctx = vec![f64::NEG_INFINITY; c.num_units() * b];

    let root = c.root().index();
    {
        let root_vals = &vals[root * b..(root + 1) * b];
        let root_ctx = &mut ctx[root * b..(root + 1) * b];
        match mode {
            EvalMode::Deterministic => root_ctx.copy_from_slice(root_vals),
            // expected flows are posterior masses: normalize per sample
            EvalMode::Weighted => {
                for (cx, &v) in root_ctx.iter_mut().zip(root_vals) {
                    *cx = if v == f64::NEG_INFINITY { f64::NEG_INFINITY } else { 0.0 };
                }
            }
        }
        for &v in root_vals {
            if v == f64::NEG_INFINITY {
                acc.zero_prob_samples += 1;
            }
        }
    }

    for layer in c.layers().iter().rev() {
        for &u in layer {
            let ui = u.index();
            // parents live in later layers, so this unit's context is final
            {
                let row = &ctx[ui * b..(ui + 1) * b];
                let k = &mut acc.context[ui];
                for (&cx, &w) in row.iter().zip(weights) {
                    if cx != f64::NEG_INFINITY {
                        k.add(w * fast_exp(cx));
                    }
                }
            }
            match c.kind(u) {
                UnitKind::Input => {}
                UnitKind::Product => {
                    let (lower, here) = ctx.split_at_mut(ui * b);
                    let my = &here[..b];
                    for ch in c.children(u) {
                        let row = &mut lower[ch.index() * b..(ch.index() + 1) * b];
                        for (cc, &cx) in row.iter_mut().zip(my) {
                            if cx != f64::NEG_INFINITY {
                                *cc = logaddexp(*cc, cx);
                            }
                        }
                    }
                }
                UnitKind::Sum => {
                    let my_vals = &vals[ui * b..(ui + 1) * b];
                    for (ch, e) in c.children(u).iter().zip(c.sum_edges(u)) {
                        let t = if mode == EvalMode::Weighted { theta[e] } else { 0.0 };
                        let ch_vals = &vals[ch.index() * b..(ch.index() + 1) * b];
                        let (lower, here) = ctx.split_at_mut(ui * b);
                        let my_ctx = &here[..b];
                        let ch_ctx = &mut lower[ch.index() * b..(ch.index() + 1) * b];
                        let edge_acc = &mut acc.edges[e];
                        for j in 0..b {
                            let cx = my_ctx[j];
                            if cx == f64::NEG_INFINITY {
                                continue;
                            }
                            let cv = ch_vals[j];
                            if cv == f64::NEG_INFINITY {
                                continue;
                            }
                            let gv = my_vals[j];
                            if gv == f64::NEG_INFINITY {
                                continue;
                            }
                            let lf = cx + t + cv - gv;
                            edge_acc.add(weights[j] * fast_exp(lf));
                            ch_ctx[j] = logaddexp(ch_ctx[j], lf);
                        }
                    }
                }
            }
        }
    }
    acc.total_weight += weights.iter().sum::<f64>();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitBuilder;

    fn mixture(t1: f64, t2: f64) -> (Circuit, ParamVector) {
        let mut b = CircuitBuilder::new();
        let hi = b.input(0, 1);
        let lo = b.input(0, 0);
        let root = b.sum_with_params(&[hi, lo], &[t1.ln(), t2.ln()]);
        b.build_with_params(root).unwrap()
    }

    fn dataset(samples: &[u8]) -> WeightedDataset {
        let rows: Vec<Vec<u8>> = samples.iter().map(|&s| vec![s]).collect();
        WeightedDataset::from_rows(&rows, vec![2]).unwrap()
    }

    #[test]
    fn softened_leaf_value() {
        let (c, p) = mixture(0.3, 0.7);
        let d = dataset(&[1]).soften(0.9).unwrap();
        let v = forward(&c, &p, &d, EvalMode::Deterministic).unwrap();
        // unit 0 is the X=1 indicator
        assert!((v.log_value(UnitId(0), 0) - 0.9f64.ln()).abs() < 1e-12);
        assert!((v.log_value(UnitId(1), 0) - 0.1f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn weighted_root_is_likelihood() {
        let (c, p) = mixture(0.3, 0.7);
        let d = dataset(&[1]);
        let v = forward(&c, &p, &d, EvalMode::Weighted).unwrap();
        assert!((v.log_value(c.root(), 0) - 0.3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_flows_count_samples() {
        let (c, p) = mixture(0.3, 0.7);
        let d = dataset(&[1, 1, 1, 0]);
        let flows = accumulate_flows(&c, &p, &d, EvalMode::Deterministic).unwrap();
        let f = flows.edge_flows();
        assert!((f[0] - 3.0).abs() < 1e-12);
        assert!((f[1] - 1.0).abs() < 1e-12);
        assert!((flows.context_mass(c.root()) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn softened_flows_match_hand_computation() {
        // per-sample weights 0.9/0.1 summed over {1,1,1,0}
        let (c, p) = mixture(0.3, 0.7);
        let d = dataset(&[1, 1, 1, 0]).soften(0.9).unwrap();
        let flows = accumulate_flows(&c, &p, &d, EvalMode::Deterministic).unwrap();
        let f = flows.edge_flows();
        assert!((f[0] - 2.8).abs() < 1e-12, "{f:?}");
        assert!((f[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn beta_one_bit_matches_hard_pass() {
        let (c, p) = mixture(0.25, 0.75);
        let hard = dataset(&[1, 0, 1]);
        let soft = dataset(&[1, 0, 1]).soften(1.0).unwrap();
        let fh = accumulate_flows(&c, &p, &hard, EvalMode::Deterministic).unwrap();
        let fs = accumulate_flows(&c, &p, &soft, EvalMode::Deterministic).unwrap();
        assert_eq!(fh.edge_flows(), fs.edge_flows());
    }

    #[test]
    fn expected_flows_split_symmetric_children() {
        // non-deterministic sum over two identical indicators
        let mut b = CircuitBuilder::new();
        let a1 = b.input(0, 1);
        let a2 = b.input(0, 1);
        let root = b.sum_with_params(&[a1, a2], &[0.5f64.ln(), 0.5f64.ln()]);
        let (c, p) = b.build_with_params(root).unwrap();
        let d = dataset(&[1, 1]);
        let flows = accumulate_flows(&c, &p, &d, EvalMode::Weighted).unwrap();
        let f = flows.edge_flows();
        assert!((f[0] - 1.0).abs() < 1e-12);
        assert!((f[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expected_flow_mass_equals_total_weight() {
        let (c, p) = mixture(0.3, 0.7);
        let d = dataset(&[1, 0, 0, 1, 1])
            .with_weights(vec![1.0, 2.0, 0.5, 1.0, 1.0])
            .unwrap();
        let flows = accumulate_flows(&c, &p, &d, EvalMode::Weighted).unwrap();
        let sum: f64 = flows.edge_flows().iter().sum();
        assert!((sum - d.total_weight()).abs() < 1e-9);
    }

    #[test]
    fn loglikelihood_rejects_softened_data() {
        let (c, p) = mixture(0.5, 0.5);
        let d = dataset(&[1]).soften(0.9).unwrap();
        assert!(matches!(
            loglikelihood(&c, &p, &d),
            Err(Error::SoftenedLikelihood(_))
        ));
    }

    #[test]
    fn uniform_mixture_ll() {
        let (c, p) = mixture(0.5, 0.5);
        let d = dataset(&[1, 0, 1]);
        let ll = loglikelihood(&c, &p, &d).unwrap();
        assert!((ll.mean - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let (c, p) = mixture(0.5, 0.5);
        let d = WeightedDataset::from_rows(&[vec![0, 1]], vec![2, 2]).unwrap();
        assert!(matches!(
            forward(&c, &p, &d, EvalMode::Weighted),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn backward_rejects_mismatched_table() {
        let (c, p) = mixture(0.5, 0.5);
        let d4 = dataset(&[1, 0, 1, 0]);
        let d3 = dataset(&[1, 0, 1]);
        let v = forward(&c, &p, &d4, EvalMode::Weighted).unwrap();
        assert!(matches!(
            backward(&c, &p, &d3, &v, EvalMode::Weighted),
            Err(Error::InconsistentTable { .. })
        ));
    }

    #[test]
    fn zero_probability_samples_are_counted() {
        // root = [X=1] only
        let mut b = CircuitBuilder::new();
        let hi = b.input(0, 1);
        let root = b.sum_with_params(&[hi], &[0.0]);
        let (c, p) = b.build_with_params(root).unwrap();
        let d = dataset(&[1, 0, 0]);
        let ll = loglikelihood(&c, &p, &d).unwrap();
        assert_eq!(ll.zero_prob_samples, 2);
        assert_eq!(ll.mean, f64::NEG_INFINITY);
        let flows = accumulate_flows(&c, &p, &d, EvalMode::Weighted).unwrap();
        assert_eq!(flows.zero_probability_samples(), 2);
        assert!((flows.edge_flow(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chunked_and_single_pass_agree() {
        let (c, p) = mixture(0.2, 0.8);
        let samples: Vec<u8> = (0..CHUNK_ROWS as u32 * 3 + 17).map(|i| (i % 2) as u8).collect();
        let d = dataset(&samples);
        let v = forward(&c, &p, &d, EvalMode::Weighted).unwrap();
        let whole = backward(&c, &p, &d, &v, EvalMode::Weighted).unwrap();
        let chunked = accumulate_flows(&c, &p, &d, EvalMode::Weighted).unwrap();
        for e in 0..c.num_sum_edges() {
            assert!((whole.edge_flow(e) - chunked.edge_flow(e)).abs() < 1e-8);
        }
    }
}
