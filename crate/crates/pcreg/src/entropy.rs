//! Exact entropy of deterministic circuits and top-down probabilities.
//!
//! For a deterministic circuit the entropy decomposes recursively: a sum
//! unit contributes −Σ θ log θ plus the θ-weighted child entropies, a
//! product unit adds its children, and an indicator leaf contributes 0. The
//! same recursion applied to a non-deterministic circuit yields the entropy
//! of the distribution over the observed variables *and* the latent branch
//! choices of every sum unit — the quantity entropy regularization targets
//! when training latent-variable circuits.

use crate::circuit::{cached_determinism, Circuit, ParamVector, UnitKind};
use crate::error::{Error, Result};
use crate::math::xlogx;

/// Per-unit entropies (nats) and top-down probabilities.
#[derive(Clone, Debug)]
pub struct EntropyTable {
    /// entropy of the distribution rooted at each unit, in nats
    pub ent: Vec<f64>,
    /// Pr_root(n): parameter-weighted path mass from the root
    pub topdown: Vec<f64>,
}

impl EntropyTable {
    pub fn root_entropy(&self, c: &Circuit) -> f64 {
        self.ent[c.root().index()]
    }
}

/// Exact entropy of a deterministic circuit over its observed variables.
///
/// Fails with `NonDeterministicCircuit` when the circuit is known (or can be
/// shown by sampling) to violate determinism.
pub fn circuit_entropy(c: &Circuit, p: &ParamVector) -> Result<EntropyTable> {
    let report = cached_determinism(c);
    if let Some(&bad) = report.violations(c).first() {
        return Err(Error::NonDeterministicCircuit(bad));
    }
    Ok(entropy_table(c, p))
}

/// Entropy over observed variables and latent sum-unit branches.
///
/// Applies the deterministic decomposition without checking determinism:
/// distinct children of a sum unit are treated as distinct latent states, so
/// the result is H over the augmented space (X, Z). For a deterministic
/// circuit this equals [`circuit_entropy`].
pub fn circuit_entropy_latent(c: &Circuit, p: &ParamVector) -> EntropyTable {
    entropy_table(c, p)
}

fn entropy_table(c: &Circuit, p: &ParamVector) -> EntropyTable {
    let mut ent = vec![0.0f64; c.num_units()];
    for layer in c.layers() {
        for &u in layer {
            match c.kind(u) {
                UnitKind::Input => {}
                UnitKind::Product => {
                    ent[u.index()] = c.children(u).iter().map(|ch| ent[ch.index()]).sum();
                }
                UnitKind::Sum => {
                    let mut h = 0.0;
                    for (ch, e) in c.children(u).iter().zip(c.sum_edges(u)) {
                        let theta = p.theta(e);
                        h += -xlogx(theta) + theta * ent[ch.index()];
                    }
                    ent[u.index()] = h;
                }
            }
        }
    }
    EntropyTable {
        ent,
        topdown: topdown_probabilities(c, p),
    }
}

/// Top-down probability of every unit: the root has mass 1, a product unit
/// receives θ·Pr(parent) along each incoming edge, and a sum unit receives
/// the plain sum of its parents' masses.
pub fn topdown_probabilities(c: &Circuit, p: &ParamVector) -> Vec<f64> {
    let mut prob = vec![0.0f64; c.num_units()];
    prob[c.root().index()] = 1.0;
    for layer in c.layers().iter().rev() {
        for &u in layer {
            let mass = prob[u.index()];
            if mass == 0.0 {
                continue;
            }
            match c.kind(u) {
                UnitKind::Input => {}
                UnitKind::Product => {
                    for ch in c.children(u) {
                        prob[ch.index()] += mass;
                    }
                }
                UnitKind::Sum => {
                    for (ch, e) in c.children(u).iter().zip(c.sum_edges(u)) {
                        prob[ch.index()] += p.theta(e) * mass;
                    }
                }
            }
        }
    }
    prob
}

/// Residual of the edge-sum entropy decomposition
/// H = −Σ_(n,c) Pr(n)·θ_(n,c)·log θ_(n,c): both sides are computed and the
/// absolute difference returned. Zero (up to float error) for circuits with
/// indicator leaves.
pub fn entropy_decomposition_check(c: &Circuit, p: &ParamVector) -> f64 {
    let table = entropy_table(c, p);
    let mut rhs = 0.0;
    for u in c.sum_units() {
        let pr = table.topdown[u.index()];
        for e in c.sum_edges(u) {
            rhs -= pr * xlogx(p.theta(e));
        }
    }
    (table.root_entropy(c) - rhs).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitBuilder;

    fn mixture_params(t: &[f64]) -> (Circuit, ParamVector) {
        let mut b = CircuitBuilder::new();
        let hi = b.input(0, 1);
        let lo = b.input(0, 0);
        let logs: Vec<f64> = t.iter().map(|x| x.ln()).collect();
        let root = b.sum_with_params(&[hi, lo], &logs);
        b.build_with_params(root).unwrap()
    }

    #[test]
    fn uniform_mixture_entropy_is_ln2() {
        let (c, p) = mixture_params(&[0.5, 0.5]);
        let t = circuit_entropy(&c, &p).unwrap();
        assert!((t.root_entropy(&c) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn product_of_mixtures_adds_entropies() {
        let mut b = CircuitBuilder::new();
        let x1 = b.input(0, 1);
        let x0 = b.input(0, 0);
        let y1 = b.input(1, 1);
        let y0 = b.input(1, 0);
        let u = 0.5f64.ln();
        let sx = b.sum_with_params(&[x1, x0], &[u, u]);
        let sy = b.sum_with_params(&[y1, y0], &[u, u]);
        let prod = b.product(&[sx, sy]);
        let root = b.sum_with_params(&[prod], &[0.0]);
        let (c, p) = b.build_with_params(root).unwrap();
        let t = circuit_entropy(&c, &p).unwrap();
        assert!((t.root_entropy(&c) - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn skewed_mixture_entropy() {
        // −(0.3 ln 0.3 + 0.7 ln 0.7)
        let (c, p) = mixture_params(&[0.3, 0.7]);
        let t = circuit_entropy(&c, &p).unwrap();
        let direct = -(0.3f64 * 0.3f64.ln() + 0.7 * 0.7f64.ln());
        assert!((t.root_entropy(&c) - direct).abs() < 1e-12);
        assert!((t.root_entropy(&c) - 0.6108643020548935).abs() < 1e-9);
    }

    #[test]
    fn zero_parameter_contributes_nothing() {
        let (c, p) = mixture_params(&[1.0, 0.0]);
        let t = circuit_entropy(&c, &p).unwrap();
        assert_eq!(t.root_entropy(&c), 0.0);
    }

    #[test]
    fn non_deterministic_circuit_is_rejected() {
        let mut b = CircuitBuilder::new();
        let a1 = b.input(0, 1);
        let a2 = b.input(0, 1);
        let root = b.sum_with_params(&[a1, a2], &[0.5f64.ln(), 0.5f64.ln()]);
        let (c, p) = b.build_with_params(root).unwrap();
        assert!(matches!(
            circuit_entropy(&c, &p),
            Err(Error::NonDeterministicCircuit(_))
        ));
        // the latent view treats the two branches as distinct states
        let t = circuit_entropy_latent(&c, &p);
        assert!((t.root_entropy(&c) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn topdown_root_and_single_path() {
        let (c, p) = mixture_params(&[0.3, 0.7]);
        let td = topdown_probabilities(&c, &p);
        assert_eq!(td[c.root().index()], 1.0);
        // indicator children carry their edge parameter
        assert!((td[0] - 0.3).abs() < 1e-12);
        assert!((td[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn topdown_accumulates_over_paths() {
        // shared sum unit reached over two paths with masses 0.2 and
        // 0.8·0.625 = 0.5, so Pr(m) = 0.7
        let mut b = CircuitBuilder::new();
        let x1 = b.input(0, 1);
        let x0 = b.input(0, 0);
        let u = 0.5f64.ln();
        let m = b.sum_with_params(&[x1, x0], &[u, u]);
        let other = b.sum_with_params(&[x1, x0], &[u, u]);
        let pa = b.product(&[m]);
        let pm2 = b.product(&[m]);
        let pother = b.product(&[other]);
        let smid = b.sum_with_params(&[pm2, pother], &[0.625f64.ln(), 0.375f64.ln()]);
        let pb = b.product(&[smid]);
        let root = b.sum_with_params(&[pa, pb], &[0.2f64.ln(), 0.8f64.ln()]);
        let (c, p) = b.build_with_params(root).unwrap();
        let td = topdown_probabilities(&c, &p);
        let m_final = c.units().find(|&uid| c.origin(uid) == Some(m)).unwrap();
        assert!((td[m_final.index()] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn decomposition_residual_is_tiny() {
        let (c, p) = mixture_params(&[0.3, 0.7]);
        assert!(entropy_decomposition_check(&c, &p) < 1e-12);
    }

    #[test]
    fn uniform_mixture_over_n_samples_has_entropy_ln_n() {
        // deterministic circuit encoding the empirical distribution of N
        // distinct 3-bit samples
        let n = 8usize;
        let mut b = CircuitBuilder::new();
        let mut products = Vec::new();
        for s in 0..n {
            let bits: Vec<usize> = (0..3).map(|v| (s >> v) & 1).collect();
            let inds: Vec<usize> = bits
                .iter()
                .enumerate()
                .map(|(v, &bit)| b.input(v, bit))
                .collect();
            products.push(b.product(&inds));
        }
        let w = (1.0 / n as f64).ln();
        let root = b.sum_with_params(&products, &vec![w; n]);
        let (c, p) = b.build_with_params(root).unwrap();
        let t = circuit_entropy(&c, &p).unwrap();
        assert!((t.root_entropy(&c) - (n as f64).ln()).abs() < 1e-9);
    }
}
