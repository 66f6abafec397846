//! Brute-force oracles, independent of the library's evaluation kernels.
//!
//! Everything here works by explicit enumeration over complete assignments
//! (and, for expected flows, by exact multilinear slopes — the circuit
//! polynomial is linear in every unit's value, so a two-point difference is
//! an exact derivative). These are the reference implementations the batched
//! log-space passes are tested against.

#![allow(dead_code)]

use pcreg::circuit::{Circuit, ParamVector, UnitId, UnitKind};
use pcreg::data::WeightedDataset;

/// All complete assignments in mixed-radix order.
pub fn assignments(var_arity: &[u32]) -> Vec<Vec<u8>> {
    let total: usize = var_arity.iter().map(|&a| a as usize).product();
    let mut out = Vec::with_capacity(total);
    let mut x = vec![0u8; var_arity.len()];
    for _ in 0..total {
        out.push(x.clone());
        for v in 0..var_arity.len() {
            x[v] += 1;
            if (x[v] as u32) < var_arity[v] {
                break;
            }
            x[v] = 0;
        }
    }
    out
}

/// Recursive linear-space evaluation of every unit at one assignment.
pub fn eval_units(c: &Circuit, p: &ParamVector, x: &[u8]) -> Vec<f64> {
    let mut val = vec![0.0f64; c.num_units()];
    for u in c.units() {
        val[u.index()] = match c.kind(u) {
            UnitKind::Input => {
                let (v, a) = c.input_spec(u);
                (x[v] as u32 == a) as u8 as f64
            }
            UnitKind::Product => c.children(u).iter().map(|ch| val[ch.index()]).product(),
            UnitKind::Sum => c
                .children(u)
                .iter()
                .zip(c.sum_edges(u))
                .map(|(ch, e)| p.theta(e) * val[ch.index()])
                .sum(),
        };
    }
    val
}

pub fn eval_root(c: &Circuit, p: &ParamVector, x: &[u8]) -> f64 {
    eval_units(c, p, x)[c.root().index()]
}

/// Evaluation with one unit's value overridden (for multilinear slopes).
fn eval_root_override(c: &Circuit, p: &ParamVector, x: &[u8], unit: UnitId, value: f64) -> f64 {
    let mut val = vec![0.0f64; c.num_units()];
    for u in c.units() {
        val[u.index()] = if u == unit {
            value
        } else {
            match c.kind(u) {
                UnitKind::Input => {
                    let (v, a) = c.input_spec(u);
                    (x[v] as u32 == a) as u8 as f64
                }
                UnitKind::Product => c.children(u).iter().map(|ch| val[ch.index()]).product(),
                UnitKind::Sum => c
                    .children(u)
                    .iter()
                    .zip(c.sum_edges(u))
                    .map(|(ch, e)| p.theta(e) * val[ch.index()])
                    .sum(),
            }
        };
    }
    val[c.root().index()]
}

/// Structural support membership of every unit at one assignment.
pub fn support(c: &Circuit, x: &[u8]) -> Vec<bool> {
    let mut s = vec![false; c.num_units()];
    for u in c.units() {
        s[u.index()] = match c.kind(u) {
            UnitKind::Input => {
                let (v, a) = c.input_spec(u);
                x[v] as u32 == a
            }
            UnitKind::Product => c.children(u).iter().all(|ch| s[ch.index()]),
            UnitKind::Sum => c.children(u).iter().any(|ch| s[ch.index()]),
        };
    }
    s
}

/// Contexts by their top-down definition: the root's context is its support;
/// elsewhere ctx(n) = (∪ parents' ctx) ∩ supp(n).
pub fn contexts(c: &Circuit, x: &[u8]) -> Vec<bool> {
    let supp = support(c, x);
    let mut ctx = vec![false; c.num_units()];
    ctx[c.root().index()] = supp[c.root().index()];
    // walk parents before children (units are topologically ordered)
    for u in c.units().rev() {
        if !ctx[u.index()] {
            continue;
        }
        for ch in c.children(u) {
            if supp[ch.index()] {
                ctx[ch.index()] = true;
            }
        }
    }
    ctx
}

/// Weight of assignment `x` in the softened distribution of `sample`.
pub fn soft_weight(sample: &[u8], x: &[u8], beta: f64, var_arity: &[u32]) -> f64 {
    sample
        .iter()
        .zip(x)
        .zip(var_arity)
        .map(|((&s, &v), &k)| {
            if s == v {
                beta
            } else if k == 2 {
                1.0 - beta
            } else {
                (1.0 - beta) / k as f64
            }
        })
        .product()
}

/// Weight of assignment `x` in the (unnormalized by 1/N) softened dataset:
/// Σ_i wᵢ·Pr_{xᵢ,β}(x).
pub fn softened_dataset_weight(d: &WeightedDataset, x: &[u8]) -> f64 {
    let beta = d.softening().unwrap_or(1.0);
    (0..d.len())
        .map(|i| {
            let sample: Vec<u8> = (0..d.num_vars()).map(|v| d.get(i, v)).collect();
            d.weights()[i] * soft_weight(&sample, x, beta, d.var_arity())
        })
        .sum()
}

/// Deterministic-circuit flows of every sum edge w.r.t. the (possibly
/// softened) dataset, by direct enumeration of the flow definition:
/// F(n,c)(D_β) = Σ_x W(x)·1{x ∈ ctx_n ∩ ctx_c}. Purely set-theoretic — the
/// parameters play no role.
pub fn det_flows_oracle(c: &Circuit, d: &WeightedDataset) -> Vec<f64> {
    let mut flows = vec![0.0f64; c.num_sum_edges()];
    for x in assignments(c.var_arity()) {
        let w = softened_dataset_weight(d, &x);
        if w == 0.0 {
            continue;
        }
        let ctx = contexts(c, &x);
        for u in c.sum_units() {
            if !ctx[u.index()] {
                continue;
            }
            for (ch, e) in c.children(u).iter().zip(c.sum_edges(u)) {
                if ctx[ch.index()] {
                    flows[e] += w;
                }
            }
        }
    }
    flows
}

/// Aggregated context mass per unit under the same enumeration semantics.
pub fn det_context_oracle(c: &Circuit, d: &WeightedDataset) -> Vec<f64> {
    let mut mass = vec![0.0f64; c.num_units()];
    for x in assignments(c.var_arity()) {
        let w = softened_dataset_weight(d, &x);
        if w == 0.0 {
            continue;
        }
        let ctx = contexts(c, &x);
        for u in c.units() {
            if ctx[u.index()] {
                mass[u.index()] += w;
            }
        }
    }
    mass
}

/// Per-assignment posterior edge masses: for sum edge (n,c),
/// Σ_{z ∋ (n,c)} p̂(x,z) = θ_(n,c)·value[c]·∂p(x)/∂value[n]. The partial
/// derivative is an exact two-point slope because the circuit polynomial is
/// multilinear in unit values.
fn edge_masses_at(c: &Circuit, p: &ParamVector, x: &[u8]) -> (f64, Vec<f64>) {
    let val = eval_units(c, p, x);
    let px = val[c.root().index()];
    let mut masses = vec![0.0f64; c.num_sum_edges()];
    if px <= 0.0 {
        return (px, masses);
    }
    for u in c.sum_units() {
        let d_u = if u == c.root() {
            1.0
        } else {
            let hi = eval_root_override(c, p, x, u, 1.0);
            let lo = eval_root_override(c, p, x, u, 0.0);
            hi - lo
        };
        if d_u == 0.0 {
            continue;
        }
        for (ch, e) in c.children(u).iter().zip(c.sum_edges(u)) {
            masses[e] = p.theta(e) * val[ch.index()] * d_u;
        }
    }
    (px, masses)
}

/// Expected flows by enumeration: every sample is expanded over the
/// assignments of its softened distribution (a single point for hard data)
/// and the posterior edge mass is renormalized by the sample's evidence.
pub fn expected_flows_oracle(c: &Circuit, p: &ParamVector, d: &WeightedDataset) -> Vec<f64> {
    let beta = d.softening().unwrap_or(1.0);
    let all: Vec<Vec<u8>> = if beta == 1.0 {
        Vec::new()
    } else {
        assignments(c.var_arity())
    };
    let mut flows = vec![0.0f64; c.num_sum_edges()];
    for i in 0..d.len() {
        let sample: Vec<u8> = (0..d.num_vars()).map(|v| d.get(i, v)).collect();
        let wi = d.weights()[i];
        let mut numer = vec![0.0f64; c.num_sum_edges()];
        let mut z = 0.0f64;
        if beta == 1.0 {
            let (px, masses) = edge_masses_at(c, p, &sample);
            z = px;
            numer = masses;
        } else {
            for x in &all {
                let w = soft_weight(&sample, x, beta, c.var_arity());
                if w == 0.0 {
                    continue;
                }
                let (px, masses) = edge_masses_at(c, p, x);
                z += w * px;
                for (n, m) in numer.iter_mut().zip(&masses) {
                    *n += w * m;
                }
            }
        }
        if z > 0.0 {
            for (f, n) in flows.iter_mut().zip(&numer) {
                *f += wi * n / z;
            }
        }
    }
    flows
}

/// Literal sum over hidden completions, for very small circuits: every sum
/// unit picks one child, p̂(x, z) multiplies chosen parameters along reached
/// sums and all parameters of unreached sums, and an edge's expected flow
/// sums p̂ over the completions whose induced tree uses it. Exponential in
/// the number of sum units; returns None beyond the budget.
pub fn expected_flows_z_enum(
    c: &Circuit,
    p: &ParamVector,
    d: &WeightedDataset,
    max_combos: usize,
) -> Option<Vec<f64>> {
    assert!(d.softening().unwrap_or(1.0) == 1.0, "hard data only");
    let sums: Vec<UnitId> = c.sum_units().collect();
    let mut combos: usize = 1;
    for &u in &sums {
        combos = combos.checked_mul(c.children(u).len())?;
        if combos > max_combos {
            return None;
        }
    }
    let sum_pos: std::collections::HashMap<UnitId, usize> =
        sums.iter().enumerate().map(|(i, &u)| (u, i)).collect();

    let mut flows = vec![0.0f64; c.num_sum_edges()];
    for i in 0..d.len() {
        let x: Vec<u8> = (0..d.num_vars()).map(|v| d.get(i, v)).collect();
        let wi = d.weights()[i];
        let mut numer = vec![0.0f64; c.num_sum_edges()];
        let mut z_total = 0.0f64;

        let mut choice = vec![0usize; sums.len()];
        loop {
            // chosen-branch evaluation
            let mut val = vec![0.0f64; c.num_units()];
            for u in c.units() {
                val[u.index()] = match c.kind(u) {
                    UnitKind::Input => {
                        let (v, a) = c.input_spec(u);
                        (x[v] as u32 == a) as u8 as f64
                    }
                    UnitKind::Product => {
                        c.children(u).iter().map(|ch| val[ch.index()]).product()
                    }
                    UnitKind::Sum => {
                        let pick = choice[sum_pos[&u]];
                        let e = c.sum_edges(u).start + pick;
                        p.theta(e) * val[c.children(u)[pick].index()]
                    }
                };
            }
            // reached units under this completion
            let mut reached = vec![false; c.num_units()];
            reached[c.root().index()] = true;
            for u in c.units().rev() {
                if !reached[u.index()] {
                    continue;
                }
                match c.kind(u) {
                    UnitKind::Input => {}
                    UnitKind::Product => {
                        for ch in c.children(u) {
                            reached[ch.index()] = true;
                        }
                    }
                    UnitKind::Sum => {
                        let pick = choice[sum_pos[&u]];
                        reached[c.children(u)[pick].index()] = true;
                    }
                }
            }
            // p̂(x, z): reached part from the evaluation, unreached sums
            // contribute their chosen parameter so Σ_z p̂ = p(x)
            let mut p_hat = val[c.root().index()];
            for (pos, &u) in sums.iter().enumerate() {
                if !reached[u.index()] {
                    p_hat *= p.theta(c.sum_edges(u).start + choice[pos]);
                }
            }
            z_total += p_hat;
            if p_hat > 0.0 {
                for (pos, &u) in sums.iter().enumerate() {
                    if reached[u.index()] {
                        numer[c.sum_edges(u).start + choice[pos]] += p_hat;
                    }
                }
            }
            // next completion
            let mut done = true;
            for (pos, &u) in sums.iter().enumerate() {
                choice[pos] += 1;
                if choice[pos] < c.children(u).len() {
                    done = false;
                    break;
                }
                choice[pos] = 0;
            }
            if done {
                break;
            }
        }
        if z_total > 0.0 {
            for (f, n) in flows.iter_mut().zip(&numer) {
                *f += wi * n / z_total;
            }
        }
    }
    Some(flows)
}

/// −Σ_x p(x)·ln p(x) by enumeration.
pub fn entropy_oracle(c: &Circuit, p: &ParamVector) -> f64 {
    let mut h = 0.0;
    for x in assignments(c.var_arity()) {
        let px = eval_root(c, p, x.as_slice());
        if px > 0.0 {
            h -= px * px.ln();
        }
    }
    h
}

/// Mean log-likelihood by enumeration-free direct evaluation.
pub fn ll_oracle(c: &Circuit, p: &ParamVector, d: &WeightedDataset) -> f64 {
    let mut total = 0.0;
    for i in 0..d.len() {
        let x: Vec<u8> = (0..d.num_vars()).map(|v| d.get(i, v)).collect();
        total += d.weights()[i] * eval_root(c, p, &x).ln();
    }
    total / d.total_weight()
}

/// Materializes the softened dataset D_β explicitly: one row per complete
/// assignment, weighted by Σᵢ wᵢ·Pr_{xᵢ,β}(x).
pub fn materialize_softened(d: &WeightedDataset) -> WeightedDataset {
    let all = assignments(d.var_arity());
    let weights: Vec<f64> = all.iter().map(|x| softened_dataset_weight(d, x)).collect();
    WeightedDataset::from_rows(&all, d.var_arity().to_vec())
        .unwrap()
        .with_weights(weights)
        .unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
