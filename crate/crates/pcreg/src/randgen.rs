//! Seeded random circuits and datasets, used by the oracle test suites and
//! the scaling benchmarks.
//!
//! Deterministic circuits are grown by Shannon-style pivot splits: a sum
//! unit's children fix a pivot variable (or pair) to distinct values, which
//! keeps child supports disjoint by construction. Non-deterministic circuits
//! mix several random decompositions of the same scope.

use crate::circuit::{Circuit, CircuitBuilder};
use crate::data::WeightedDataset;
use rand::Rng;

#[derive(Clone, Debug)]
pub struct RandomCircuitConfig {
    /// Chance of re-using an already generated fragment for a scope
    /// (creates shared, multi-parent structure).
    pub reuse_prob: f64,
    /// Chance an internal node decomposes as a product of two sub-scopes.
    pub product_prob: f64,
    /// Chance a pivot split uses two variables (4-way deterministic sums).
    pub wide_pivot_prob: f64,
    /// Chance one branch of a pivot split collapses to a full conjunction
    /// (produces strongly imbalanced supports).
    pub conjunction_prob: f64,
}

impl Default for RandomCircuitConfig {
    fn default() -> Self {
        RandomCircuitConfig {
            reuse_prob: 0.3,
            product_prob: 0.4,
            wide_pivot_prob: 0.2,
            conjunction_prob: 0.15,
        }
    }
}

struct DetGen<'a, R: Rng> {
    b: CircuitBuilder,
    rng: &'a mut R,
    cfg: RandomCircuitConfig,
    memo: Vec<(Vec<usize>, usize)>,
    indicators: Vec<[usize; 2]>,
}

impl<R: Rng> DetGen<'_, R> {
    fn fragment(&mut self, scope: &[usize]) -> usize {
        if self.rng.gen_bool(self.cfg.reuse_prob) {
            let hits: Vec<usize> = self
                .memo
                .iter()
                .filter(|(s, _)| s == scope)
                .map(|&(_, id)| id)
                .collect();
            if !hits.is_empty() {
                return hits[self.rng.gen_range(0..hits.len())];
            }
        }
        let id = self.generate(scope);
        self.memo.push((scope.to_vec(), id));
        id
    }

    fn conjunction(&mut self, scope: &[usize]) -> usize {
        let inds: Vec<usize> = scope
            .iter()
            .map(|&v| self.indicators[v][self.rng.gen_range(0..2usize)])
            .collect();
        if inds.len() == 1 {
            inds[0]
        } else {
            self.b.product(&inds)
        }
    }

    fn generate(&mut self, scope: &[usize]) -> usize {
        if scope.len() == 1 {
            let v = scope[0];
            return self.b.sum(&[self.indicators[v][0], self.indicators[v][1]]);
        }
        if scope.len() >= 2 && self.rng.gen_bool(self.cfg.product_prob) {
            // decomposable split
            let mut shuffled = scope.to_vec();
            for i in (1..shuffled.len()).rev() {
                let j = self.rng.gen_range(0..=i);
                shuffled.swap(i, j);
            }
            let cut = self.rng.gen_range(1..shuffled.len());
            let (mut left, mut right) = (shuffled[..cut].to_vec(), shuffled[cut..].to_vec());
            left.sort_unstable();
            right.sort_unstable();
            let l = self.fragment(&left);
            let r = self.fragment(&right);
            return self.b.product(&[l, r]);
        }
        // pivot split: children fix the pivot(s) to distinct values
        let use_pair = scope.len() >= 3 && self.rng.gen_bool(self.cfg.wide_pivot_prob);
        let pivots: Vec<usize> = if use_pair {
            let mut idx: Vec<usize> = (0..scope.len()).collect();
            let a = idx.swap_remove(self.rng.gen_range(0..idx.len()));
            let b = idx.swap_remove(self.rng.gen_range(0..idx.len()));
            vec![scope[a.min(b)], scope[a.max(b)]]
        } else {
            vec![scope[self.rng.gen_range(0..scope.len())]]
        };
        let rest: Vec<usize> = scope.iter().copied().filter(|v| !pivots.contains(v)).collect();
        let share_rest = !rest.is_empty() && self.rng.gen_bool(0.5);
        let shared = if share_rest { Some(self.fragment(&rest)) } else { None };

        let combos = 1usize << pivots.len();
        let mut children = Vec::with_capacity(combos);
        for combo in 0..combos {
            let pivot_inds: Vec<usize> = pivots
                .iter()
                .enumerate()
                .map(|(i, &v)| self.indicators[v][(combo >> i) & 1])
                .collect();
            if rest.is_empty() {
                children.push(if pivot_inds.len() == 1 {
                    pivot_inds[0]
                } else {
                    self.b.product(&pivot_inds)
                });
                continue;
            }
            let body = if self.rng.gen_bool(self.cfg.conjunction_prob) {
                self.conjunction(&rest)
            } else {
                match shared {
                    Some(s) => s,
                    None => self.fragment(&rest),
                }
            };
            let mut parts = pivot_inds;
            parts.push(body);
            children.push(self.b.product(&parts));
        }
        self.b.sum(&children)
    }
}

/// Smooth, decomposable, deterministic circuit over `num_vars` boolean
/// variables.
pub fn random_deterministic_circuit(
    rng: &mut impl Rng,
    num_vars: usize,
    cfg: &RandomCircuitConfig,
) -> Circuit {
    assert!(num_vars >= 1);
    let mut b = CircuitBuilder::new();
    let indicators: Vec<[usize; 2]> = (0..num_vars)
        .map(|v| [b.input(v, 0), b.input(v, 1)])
        .collect();
    let mut g = DetGen {
        b,
        rng,
        cfg: cfg.clone(),
        memo: Vec::new(),
        indicators,
    };
    let scope: Vec<usize> = (0..num_vars).collect();
    let root = g.generate(&scope);
    g.b.build(root).expect("generated circuit is valid")
}

/// Smooth, decomposable, generally non-deterministic circuit: sum units mix
/// several random decompositions of their scope.
pub fn random_nondeterministic_circuit(
    rng: &mut impl Rng,
    num_vars: usize,
    max_components: usize,
) -> Circuit {
    assert!(num_vars >= 1 && max_components >= 2);
    let mut b = CircuitBuilder::new();
    let indicators: Vec<[usize; 2]> = (0..num_vars)
        .map(|v| [b.input(v, 0), b.input(v, 1)])
        .collect();

    fn gen(
        b: &mut CircuitBuilder,
        rng: &mut impl Rng,
        indicators: &[[usize; 2]],
        scope: &[usize],
        max_components: usize,
    ) -> usize {
        if scope.len() == 1 {
            let v = scope[0];
            let k = rng.gen_range(2..=max_components);
            // repeated indicators make even leaf mixtures non-deterministic
            let children: Vec<usize> =
                (0..k).map(|_| indicators[v][rng.gen_range(0..2usize)]).collect();
            return b.sum(&children);
        }
        let k = rng.gen_range(2..=max_components);
        let mut components = Vec::with_capacity(k);
        for _ in 0..k {
            let mut shuffled = scope.to_vec();
            for i in (1..shuffled.len()).rev() {
                let j = rng.gen_range(0..=i);
                shuffled.swap(i, j);
            }
            let cut = rng.gen_range(1..shuffled.len());
            let left = {
                let mut s = shuffled[..cut].to_vec();
                s.sort_unstable();
                gen(b, rng, indicators, &s, max_components)
            };
            let right = {
                let mut s = shuffled[cut..].to_vec();
                s.sort_unstable();
                gen(b, rng, indicators, &s, max_components)
            };
            components.push(b.product(&[left, right]));
        }
        b.sum(&components)
    }

    let scope: Vec<usize> = (0..num_vars).collect();
    let root = gen(&mut b, rng, &indicators, &scope, max_components);
    b.build(root).expect("generated circuit is valid")
}

/// Uniform random categorical dataset with optional random weights.
pub fn random_dataset(
    rng: &mut impl Rng,
    n: usize,
    var_arity: &[u32],
    random_weights: bool,
) -> WeightedDataset {
    let rows: Vec<Vec<u8>> = (0..n)
        .map(|_| var_arity.iter().map(|&a| rng.gen_range(0..a) as u8).collect())
        .collect();
    let d = WeightedDataset::from_rows(&rows, var_arity.to_vec()).unwrap();
    if random_weights {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        d.with_weights(w).unwrap()
    } else {
        d
    }
}
