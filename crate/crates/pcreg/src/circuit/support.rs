//! Support reasoning: determinism checks, model counting, and the sum-unit
//! imbalanceness diagnostic.
//!
//! Supports are structural — parameters are assumed positive (the usual
//! w.l.o.g. assumption), so an edge with log θ = −∞ does not shrink them.

use super::{Circuit, UnitId, UnitKind};
use crate::error::{Error, Result};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scope-size cap for the exact bottom-up support computation.
pub const DEFAULT_EXACT_VAR_LIMIT: usize = 20;

#[derive(Clone, Copy, Debug)]
pub enum DeterminismCheck {
    /// Bottom-up support sets; fails with `ScopeTooLarge` past `max_vars`.
    Exact { max_vars: usize },
    /// Sampled refutation: evaluates `trials` random assignments and flags
    /// any sum unit with two active children. Can refute determinism but
    /// never certify it.
    Sampled { trials: usize, seed: u64 },
    /// Exact when scopes allow it, sampled refutation otherwise.
    Auto,
}

#[derive(Clone, Debug)]
pub struct DeterminismReport {
    /// Per-unit flag; `true` for every non-sum unit.
    pub per_unit: Vec<bool>,
    /// Whether the result is exact or only a failed refutation attempt.
    pub exact: bool,
}

impl DeterminismReport {
    pub fn all_deterministic(&self) -> bool {
        self.per_unit.iter().all(|&d| d)
    }

    pub fn violations(&self, c: &Circuit) -> Vec<UnitId> {
        c.sum_units().filter(|u| !self.per_unit[u.index()]).collect()
    }
}

/// Per-sum-unit determinism: are the children's supports pairwise disjoint?
pub fn check_determinism(c: &Circuit, mode: DeterminismCheck) -> Result<DeterminismReport> {
    match mode {
        DeterminismCheck::Exact { max_vars } => check_exact(c, max_vars),
        DeterminismCheck::Sampled { trials, seed } => Ok(check_sampled(c, trials, seed)),
        DeterminismCheck::Auto => {
            let widest = c.units().map(|u| c.scope(u).count()).max().unwrap_or(0);
            let cells_ok = c
                .units()
                .all(|u| scope_cells(c, u).map_or(false, |n| n <= 1 << DEFAULT_EXACT_VAR_LIMIT));
            if widest <= DEFAULT_EXACT_VAR_LIMIT && cells_ok {
                check_exact(c, DEFAULT_EXACT_VAR_LIMIT)
            } else {
                Ok(check_sampled(c, 2048, 0x5eed))
            }
        }
    }
}

/// Cached determinism status, computed on first use with `Auto`.
pub(crate) fn cached_determinism(c: &Circuit) -> &DeterminismReport {
    c.det_cache().get_or_init(|| {
        check_determinism(c, DeterminismCheck::Auto)
            .unwrap_or_else(|_| check_sampled(c, 2048, 0x5eed))
    })
}

/// Number of assignments over the unit's scope, None on overflow.
fn scope_cells(c: &Circuit, u: UnitId) -> Option<u64> {
    let mut n: u64 = 1;
    for v in c.scope(u).iter() {
        n = n.checked_mul(c.var_arity()[v] as u64)?;
        if n > (1 << 40) {
            return None;
        }
    }
    Some(n)
}

fn check_exact(c: &Circuit, max_vars: usize) -> Result<DeterminismReport> {
    let cell_cap = 1u64 << max_vars.min(40);
    for u in c.units() {
        match scope_cells(c, u) {
            Some(n) if n <= cell_cap => {}
            _ => {
                return Err(Error::ScopeTooLarge {
                    vars: c.scope(u).count(),
                    limit: max_vars,
                })
            }
        }
    }

    // Support of a unit as a bitset over the mixed-radix encoding of its
    // scope assignments (scope variables in ascending order).
    let mut supports: Vec<Vec<u64>> = Vec::with_capacity(c.num_units());
    let mut per_unit = vec![true; c.num_units()];

    for u in c.units() {
        let cells = scope_cells(c, u).unwrap() as usize;
        let words = cells.div_ceil(64);
        let sup = match c.kind(u) {
            UnitKind::Input => {
                let (_, value) = c.input_spec(u);
                let mut bits = vec![0u64; words];
                set_bit(&mut bits, value as usize);
                bits
            }
            UnitKind::Sum => {
                let mut bits = vec![0u64; words];
                let mut total_child_bits = 0usize;
                for &ch in c.children(u) {
                    // smoothness ⇒ identical scope ⇒ identical encoding
                    total_child_bits += popcount(&supports[ch.index()]);
                    for (a, b) in bits.iter_mut().zip(&supports[ch.index()]) {
                        *a |= *b;
                    }
                }
                if popcount(&bits) != total_child_bits {
                    per_unit[u.index()] = false;
                }
                bits
            }
            UnitKind::Product => {
                let mut stride_of = vec![0u64; c.num_vars()];
                let mut s: u64 = 1;
                for v in c.scope(u).iter() {
                    stride_of[v] = s;
                    s *= c.var_arity()[v] as u64;
                }
                let mut acc: Vec<u64> = vec![0];
                for &ch in c.children(u) {
                    let child_scope: Vec<usize> = c.scope(ch).iter().collect();
                    let offs: Vec<u64> = iter_bits(&supports[ch.index()])
                        .map(|idx| {
                            let mut rem = idx;
                            let mut out = 0u64;
                            for &v in &child_scope {
                                let a = c.var_arity()[v] as usize;
                                out += (rem % a) as u64 * stride_of[v];
                                rem /= a;
                            }
                            out
                        })
                        .collect();
                    let mut next = Vec::with_capacity(acc.len() * offs.len());
                    for &base in &acc {
                        for &off in &offs {
                            next.push(base + off);
                        }
                    }
                    acc = next;
                }
                let mut bits = vec![0u64; words];
                for idx in acc {
                    set_bit(&mut bits, idx as usize);
                }
                bits
            }
        };
        supports.push(sup);
    }

    Ok(DeterminismReport {
        per_unit,
        exact: true,
    })
}

fn set_bit(bits: &mut [u64], idx: usize) {
    bits[idx / 64] |= 1u64 << (idx % 64);
}

fn popcount(bits: &[u64]) -> usize {
    bits.iter().map(|b| b.count_ones() as usize).sum()
}

fn iter_bits(bits: &[u64]) -> impl Iterator<Item = usize> + '_ {
    bits.iter().enumerate().flat_map(|(w, &word)| {
        (0..64).filter_map(move |b| {
            if word & (1u64 << b) != 0 {
                Some(w * 64 + b)
            } else {
                None
            }
        })
    })
}

fn check_sampled(c: &Circuit, trials: usize, seed: u64) -> DeterminismReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_unit = vec![true; c.num_units()];
    let mut active = vec![false; c.num_units()];
    for _ in 0..trials {
        let x: Vec<u32> = c
            .var_arity()
            .iter()
            .map(|&a| rng.gen_range(0..a))
            .collect();
        for u in c.units() {
            active[u.index()] = match c.kind(u) {
                UnitKind::Input => {
                    let (v, a) = c.input_spec(u);
                    x[v] == a
                }
                UnitKind::Product => c.children(u).iter().all(|ch| active[ch.index()]),
                UnitKind::Sum => {
                    let n_active = c
                        .children(u)
                        .iter()
                        .filter(|ch| active[ch.index()])
                        .count();
                    if n_active > 1 {
                        per_unit[u.index()] = false;
                    }
                    n_active > 0
                }
            };
        }
    }
    DeterminismReport {
        per_unit,
        exact: false,
    }
}

fn ensure_deterministic(c: &Circuit) -> Result<()> {
    let report = cached_determinism(c);
    if let Some(&bad) = report.violations(c).first() {
        return Err(Error::NonDeterministicCircuit(bad));
    }
    Ok(())
}

/// Number of satisfying assignments over φ(n), for every unit. Exact only
/// for deterministic circuits (the sum rule needs disjoint child supports).
pub fn support_sizes(c: &Circuit) -> Result<Vec<BigUint>> {
    ensure_deterministic(c)?;
    let mut sizes: Vec<BigUint> = Vec::with_capacity(c.num_units());
    for u in c.units() {
        let s = match c.kind(u) {
            UnitKind::Input => BigUint::one(),
            UnitKind::Product => {
                let mut acc = BigUint::one();
                for &ch in c.children(u) {
                    acc *= &sizes[ch.index()];
                }
                acc
            }
            UnitKind::Sum => {
                let mut acc = BigUint::zero();
                for &ch in c.children(u) {
                    acc += &sizes[ch.index()];
                }
                acc
            }
        };
        sizes.push(s);
    }
    Ok(sizes)
}

#[derive(Clone, Debug)]
pub struct ImbalanceEntry {
    pub unit: UnitId,
    /// max child support / min child support; `inf` if it exceeds f64 range.
    pub ratio: f64,
    pub log10_ratio: f64,
}

/// Imbalanceness of qualifying sum units: the ratio between the largest and
/// smallest child support size, for sum units with at least `min_children`
/// children and a support of at least `min_support` assignments.
pub fn imbalance_report(
    c: &Circuit,
    min_children: usize,
    min_support: u64,
) -> Result<Vec<ImbalanceEntry>> {
    let sizes = support_sizes(c)?;
    let min_support = BigUint::from(min_support);
    let mut out = Vec::new();
    for u in c.sum_units() {
        let cs = c.children(u);
        if cs.len() < min_children || sizes[u.index()] < min_support {
            continue;
        }
        let mut max = &sizes[cs[0].index()];
        let mut min = max;
        for ch in &cs[1..] {
            let s = &sizes[ch.index()];
            if s > max {
                max = s;
            }
            if s < min {
                min = s;
            }
        }
        let (ratio, log10_ratio) = big_ratio(max, min);
        out.push(ImbalanceEntry {
            unit: u,
            ratio,
            log10_ratio,
        });
    }
    Ok(out)
}

/// ln of a positive BigUint, stable for values far beyond f64 range.
fn big_ln(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 53 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 53;
    let top = (x >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn big_ratio(max: &BigUint, min: &BigUint) -> (f64, f64) {
    if max.bits() <= 53 && min.bits() <= 53 {
        let r = max.to_f64().unwrap() / min.to_f64().unwrap();
        (r, r.log10())
    } else {
        let ln_r = big_ln(max) - big_ln(min);
        (ln_r.exp(), ln_r / std::f64::consts::LN_10)
    }
}
