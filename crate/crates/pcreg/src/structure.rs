//! Structure construction: Chow-Liu trees over the observed variables and
//! their compilation into hidden Chow-Liu tree (HCLT) circuits.
//!
//! The HCLT replaces every observed variable of a Chow-Liu tree with a
//! categorical latent variable and hangs the observed variable off its
//! latent twin. Compilation materializes, per tree node `i` and latent state
//! `s`, a product unit multiplying the emission mixture of `X_i` with one
//! transition sum per child edge; the latent states become sum-unit branches,
//! which is exactly the deterministic-over-(X, Z) view that entropy
//! regularization needs.

use crate::circuit::{Circuit, CircuitBuilder};
use crate::data::WeightedDataset;
use crate::math::Kahan;
use rayon::prelude::*;

/// A rooted spanning tree over the observed variables.
#[derive(Clone, Debug)]
pub struct CLTree {
    /// Parent variable of each variable; `None` for the root.
    pub parent: Vec<Option<usize>>,
    /// Mutual information (nats) of the edge to the parent; 0 at the root.
    pub mi: Vec<f64>,
}

impl CLTree {
    pub fn num_vars(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.parent.iter().position(|p| p.is_none()).unwrap()
    }

    /// Children lists, index = variable.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.parent.len()];
        for (v, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                ch[*p].push(v);
            }
        }
        ch
    }
}

/// Maximum-spanning tree over pairwise mutual information, rooted at
/// variable 0. MI is estimated from the weighted empirical distribution with
/// `mi_pseudocount` added to every joint cell of the *normalized* table, so
/// the result is invariant to duplicating all samples. Ties break toward the
/// lexicographically smallest edge.
pub fn learn_clt(d: &WeightedDataset, mi_pseudocount: f64) -> CLTree {
    let k = d.num_vars();
    if k == 0 {
        return CLTree {
            parent: vec![],
            mi: vec![],
        };
    }
    if k == 1 {
        return CLTree {
            parent: vec![None],
            mi: vec![0.0],
        };
    }

    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
        .collect();
    let mi: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| pair_mi(d, i, j, mi_pseudocount))
        .collect();

    // Kruskal, sorted by (MI desc, then lexicographic edge)
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        mi[b].total_cmp(&mi[a]).then_with(|| pairs[a].cmp(&pairs[b]))
    });
    let mut dsu: Vec<usize> = (0..k).collect();
    fn find(dsu: &mut Vec<usize>, mut x: usize) -> usize {
        while dsu[x] != x {
            dsu[x] = dsu[dsu[x]];
            x = dsu[x];
        }
        x
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    let mut picked = 0;
    for e in order {
        let (i, j) = pairs[e];
        let (ri, rj) = (find(&mut dsu, i), find(&mut dsu, j));
        if ri != rj {
            dsu[ri] = rj;
            adj[i].push((j, mi[e]));
            adj[j].push((i, mi[e]));
            picked += 1;
            if picked == k - 1 {
                break;
            }
        }
    }

    // orient away from the root (variable 0)
    let mut parent = vec![None; k];
    let mut edge_mi = vec![0.0; k];
    let mut stack = vec![0usize];
    let mut seen = vec![false; k];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &(u, w) in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                parent[u] = Some(v);
                edge_mi[u] = w;
                stack.push(u);
            }
        }
    }
    CLTree {
        parent,
        mi: edge_mi,
    }
}

fn pair_mi(d: &WeightedDataset, i: usize, j: usize, pc: f64) -> f64 {
    let ai = d.var_arity()[i] as usize;
    let aj = d.var_arity()[j] as usize;
    let mut joint = vec![0.0f64; ai * aj];
    let ci = d.column(i);
    let cj = d.column(j);
    let mut acc: Vec<Kahan> = vec![Kahan::default(); ai * aj];
    for ((&xi, &xj), &w) in ci.iter().zip(cj).zip(d.weights()) {
        acc[xi as usize * aj + xj as usize].add(w);
    }
    let total: f64 = d.total_weight();
    if total <= 0.0 {
        return 0.0;
    }
    // smooth the normalized table so the estimate is scale-invariant
    let z = 1.0 + pc * (ai * aj) as f64;
    for (cell, k) in joint.iter_mut().zip(&acc) {
        *cell = (k.value() / total + pc) / z;
    }
    let mut pi = vec![0.0f64; ai];
    let mut pj = vec![0.0f64; aj];
    for a in 0..ai {
        for b in 0..aj {
            pi[a] += joint[a * aj + b];
            pj[b] += joint[a * aj + b];
        }
    }
    let mut mi = 0.0;
    for a in 0..ai {
        for b in 0..aj {
            let p = joint[a * aj + b];
            if p > 0.0 {
                mi += p * (p / (pi[a] * pj[b])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// HCLT shape hyperparameters.
#[derive(Clone, Copy, Debug)]
pub struct HcltSpec {
    /// Categories per latent variable.
    pub hidden_size: usize,
    /// Number of HCLT copies mixed under the root.
    pub num_mixtures: usize,
}

impl Default for HcltSpec {
    fn default() -> Self {
        HcltSpec {
            hidden_size: 12,
            num_mixtures: 1,
        }
    }
}

/// Compiles a Chow-Liu tree into the (non-deterministic) HCLT circuit.
///
/// Per tree node `i` with children `j…` and latent state `s`:
/// an emission sum over `X_i`'s indicators, one transition sum per child
/// `Σ_s' θ·F_{j,s'}`, and the product `F_{i,s}` tying them together. The
/// root mixes `F_{root,s}` over the latent prior; `num_mixtures > 1` wraps
/// independent copies under one extra sum. Parameters are left to the
/// caller (uniform, random, or learned).
pub fn compile_hclt(t: &CLTree, spec: &HcltSpec, arity: &[u32]) -> Circuit {
    assert!(spec.hidden_size >= 1 && spec.num_mixtures >= 1);
    assert_eq!(arity.len(), t.num_vars());
    let k = t.num_vars();
    let h = spec.hidden_size;
    let mut b = CircuitBuilder::new();
    b.set_var_arity(arity.to_vec());

    // indicators are shared across states and mixtures
    let indicators: Vec<Vec<usize>> = (0..k)
        .map(|v| (0..arity[v] as usize).map(|a| b.input(v, a)).collect())
        .collect();

    let children = t.children();
    let root_var = t.root();
    let mut mixture_roots = Vec::with_capacity(spec.num_mixtures);
    for _ in 0..spec.num_mixtures {
        // post-order over tree nodes so child fragments exist first
        let mut order = Vec::with_capacity(k);
        let mut stack = vec![(root_var, false)];
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                order.push(v);
            } else {
                stack.push((v, true));
                for &ch in &children[v] {
                    stack.push((ch, false));
                }
            }
        }

        // fragments[v][s] = product unit for (node v, latent state s)
        let mut fragments: Vec<Vec<usize>> = vec![Vec::new(); k];
        for &v in &order {
            let mut frags = Vec::with_capacity(h);
            for _s in 0..h {
                let emission = b.sum(&indicators[v]);
                let mut parts = vec![emission];
                for &ch in &children[v] {
                    parts.push(b.sum(&fragments[ch]));
                }
                frags.push(b.product(&parts));
            }
            fragments[v] = frags;
        }
        mixture_roots.push(b.sum(&fragments[root_var]));
    }

    let root = if spec.num_mixtures == 1 {
        mixture_roots[0]
    } else {
        b.sum(&mixture_roots)
    };
    b.build(root).expect("HCLT compilation produces a valid circuit")
}

/// Closed-form unit and edge counts of the compiled circuit, derived from
/// the compilation rule. Serves as an independent audit of `compile_hclt`.
///
/// Per mixture: K·h emission sums, (K−1)·h transition sums, and one state
/// fragment per (node, state) — duplicated once per incoming transition
/// edge, so the root variable keeps h fragments while every other node ends
/// up with h². Indicators are shared; `num_mixtures > 1` adds a top sum and
/// one pass-through product per copy.
pub fn hclt_size(t: &CLTree, spec: &HcltSpec, arity: &[u32]) -> (usize, usize) {
    let k = t.num_vars();
    let h = spec.hidden_size;
    let m = spec.num_mixtures;
    let arity_sum: usize = arity.iter().map(|&a| a as usize).sum();
    let children = t.children();
    let root = t.root();

    let per_units = k * h                    // emission sums
        + (k - 1) * h                        // transition sums
        + h + (k - 1) * h * h                // fragment products (with copies)
        + 1; // mixture root sum
    let nonroot_fanout: usize = (0..k)
        .filter(|&v| v != root)
        .map(|v| 1 + children[v].len())
        .sum();
    let per_edges = h * arity_sum            // emission edges
        + (k - 1) * h * h                    // transition edges
        + h * (1 + children[root].len())     // root-variable fragments
        + h * h * nonroot_fanout             // other fragments, h copies each
        + h; // mixture root edges

    let mut units = arity_sum + m * per_units;
    let mut edges = m * per_edges;
    if m > 1 {
        units += 1 + m; // top sum and one pass-through product per copy
        edges += 2 * m;
    }
    (units, edges)
}
