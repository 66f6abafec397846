//! Entropy regularization: coordinate ascent over sum units with a Newton
//! inner solver.
//!
//! Each outer iteration recomputes per-unit entropies, then sweeps the sum
//! units from the root down. For a sum unit with data vector `d`
//! (normalized flows), entropy weight `b = τ·Pr(n)`, and child entropies
//! `γ`, the updated log-parameters φ solve
//!
//! ```text
//! dᵢ·e^{−φᵢ} − b·φᵢ + b·γᵢ = y   for all i,    Σᵢ e^{φᵢ} = 1,
//! ```
//!
//! the stationarity system of the concave per-unit surrogate. The solver
//! alternates a closed-form update of the Lagrange value `y` with damped
//! Newton steps on each φᵢ and a renormalization, falling back to a
//! bisection on `y` (the constraint residual is monotone in `y`) if the
//! alternation stalls.

use super::TrainConfig;
use crate::circuit::{cached_determinism, Circuit, ParamVector, UnitId, UnitKind};
use crate::entropy::circuit_entropy_latent;
use crate::error::{Error, Result};
use crate::evaluate::{EvalMode, FlowAccumulator};
use crate::math::logsumexp;

/// Solution of the per-sum-unit stationarity system.
#[derive(Clone, Debug)]
pub struct SumUnitSolve {
    /// normalized log-parameters
    pub phi: Vec<f64>,
    /// Lagrange value at the solution
    pub y: f64,
    /// alternation iterations used
    pub iterations: usize,
    /// max_i |dᵢ e^{−φᵢ} − bφᵢ + bγᵢ − y| at the returned point
    pub kkt_residual: f64,
    /// whether the bisection fallback was engaged
    pub used_fallback: bool,
}

fn residual(d: &[f64], b: f64, gamma: &[f64], phi: &[f64]) -> (f64, f64) {
    let k = d.len();
    let mut y = 0.0;
    for i in 0..k {
        y += d[i] * (-phi[i]).exp() - b * phi[i] + b * gamma[i];
    }
    y /= k as f64;
    let mut res: f64 = 0.0;
    for i in 0..k {
        let g = d[i] * (-phi[i]).exp() - b * phi[i] + b * gamma[i];
        res = res.max((g - y).abs());
    }
    (y, res)
}

/// Root of dᵢ·e^{−φ} − bφ + bγᵢ = y in φ. The left side is convex and
/// strictly decreasing (b > 0), so Newton converges globally; steps are
/// clamped to a safe range.
fn solve_phi(d: f64, b: f64, gamma: f64, y: f64, start: f64) -> f64 {
    if d == 0.0 {
        return gamma - y / b;
    }
    let mut phi = start.clamp(-700.0, 700.0);
    for _ in 0..100 {
        let e = d * (-phi).exp();
        let g = e - b * phi + b * gamma - y;
        let step = g / (e + b);
        phi = (phi + step).clamp(-745.0, 709.0);
        if step.abs() < 1e-15 * (1.0 + phi.abs()) {
            break;
        }
    }
    phi
}

/// Solves the stationarity system for one sum unit.
///
/// `b = 0` reduces to closed-form maximum likelihood (θ ∝ d); if `b = 0` and
/// `Σd = 0` the unit is degenerate and an error is returned so the caller
/// can substitute uniform parameters.
pub fn solve_sum_unit(
    d: &[f64],
    b: f64,
    gamma: &[f64],
    phi_init: &[f64],
    iters: usize,
    tol: f64,
) -> Result<SumUnitSolve> {
    let k = d.len();
    assert!(k >= 1 && gamma.len() == k && phi_init.len() == k);
    debug_assert!(d.iter().all(|&x| x >= 0.0 && x.is_finite()));
    assert!(b >= 0.0 && b.is_finite());

    if b == 0.0 {
        let total: f64 = d.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateUnit);
        }
        let phi: Vec<f64> = d
            .iter()
            .map(|&x| if x == 0.0 { f64::NEG_INFINITY } else { (x / total).ln() })
            .collect();
        return Ok(SumUnitSolve {
            phi,
            y: total,
            iterations: 0,
            kkt_residual: 0.0,
            used_fallback: false,
        });
    }

    // finite starting point on the simplex
    let uniform = -(k as f64).ln();
    let mut phi: Vec<f64> = phi_init
        .iter()
        .map(|&x| if x.is_finite() { x.clamp(-700.0, 0.0) } else { uniform })
        .collect();
    let lse = logsumexp(&phi);
    for p in phi.iter_mut() {
        *p -= lse;
    }

    let mut y = 0.0;
    for it in 1..=iters {
        let (y_new, _) = residual(d, b, gamma, &phi);
        y = y_new;
        for i in 0..k {
            phi[i] = solve_phi(d[i], b, gamma[i], y, phi[i]);
        }
        let lse = logsumexp(&phi);
        for p in phi.iter_mut() {
            *p -= lse;
        }
        let (y_next, res) = residual(d, b, gamma, &phi);
        if res < tol {
            return Ok(SumUnitSolve {
                phi,
                y: y_next,
                iterations: it,
                kkt_residual: res,
                used_fallback: false,
            });
        }
    }

    // Bisection on y: logsumexp(φ(y)) is strictly decreasing in y.
    let h = |y: f64, phi: &mut [f64]| -> f64 {
        for i in 0..k {
            phi[i] = solve_phi(d[i], b, gamma[i], y, phi[i]);
        }
        logsumexp(phi)
    };
    let mut lo = y;
    let mut hi = y;
    let mut step = 1.0 + y.abs();
    while h(lo, &mut phi) <= 0.0 {
        lo -= step;
        step *= 2.0;
    }
    step = 1.0 + y.abs();
    while h(hi, &mut phi) >= 0.0 {
        hi += step;
        step *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid, &mut phi) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 * (1.0 + mid.abs()) {
            break;
        }
    }
    let lse = logsumexp(&phi);
    for p in phi.iter_mut() {
        *p -= lse;
    }
    let (y_fin, res) = residual(d, b, gamma, &phi);
    Ok(SumUnitSolve {
        phi,
        y: y_fin,
        iterations: iters,
        kkt_residual: res,
        used_fallback: true,
    })
}

/// Outcome of [`entropy_regularize`].
#[derive(Clone, Debug)]
pub struct EntRegOutcome {
    pub params: ParamVector,
    pub converged: bool,
    pub outer_iterations: usize,
    /// Objective Σ dₑ·log θₑ + τ·H after initialization and after each
    /// outer iteration.
    pub objective_trace: Vec<f64>,
    /// Alternation iterations of every inner solve (for convergence stats).
    pub solver_iterations: Vec<usize>,
    /// Sum units replaced by uniform parameters for lack of any signal.
    pub degenerate_units: Vec<UnitId>,
}

fn objective(c: &Circuit, d_edges: &[f64], tau: f64, p: &ParamVector) -> f64 {
    let mut data_term = 0.0;
    for (e, &d) in d_edges.iter().enumerate() {
        if d > 0.0 {
            data_term += d * p.log_theta()[e];
        }
    }
    let h = circuit_entropy_latent(c, p).ent[c.root().index()];
    data_term + tau * h
}

/// Maximizes Σ F/|D|·log θ + τ·H(p) over the parameters, holding the input
/// flows fixed. Converges monotonically to a stationary point; stops when
/// the objective gain drops below `cfg.entreg_outer_tol` or after
/// `cfg.entreg_outer_iters` iterations (flagged as `converged = false`).
///
/// Deterministic-mode flows require a deterministic circuit; expected flows
/// regularize the entropy over observed variables and latent branch choices.
pub fn entropy_regularize(
    c: &Circuit,
    flows: &FlowAccumulator,
    p_init: &ParamVector,
    tau: f64,
    cfg: &TrainConfig,
) -> Result<EntRegOutcome> {
    if tau < 0.0 || !tau.is_finite() {
        return Err(Error::Config(format!("tau must be finite and ≥ 0, got {tau}")));
    }
    if flows.mode() == EvalMode::Deterministic {
        let report = cached_determinism(c);
        if let Some(&bad) = report.violations(c).first() {
            return Err(Error::NonDeterministicCircuit(bad));
        }
    }
    p_init.validate(c)?;

    let w = flows.total_weight();
    let norm = if w > 0.0 { w } else { 1.0 };
    let d_edges: Vec<f64> = (0..c.num_sum_edges())
        .map(|e| (flows.edge_flow(e) / norm).max(0.0))
        .collect();

    let mut params = p_init.clone();
    let mut trace = vec![objective(c, &d_edges, tau, &params)];
    let mut best = params.clone();
    let mut best_obj = trace[0];
    let mut solver_iterations = Vec::new();
    let mut degenerate_units = Vec::new();
    let mut converged = false;
    let mut outer = 0;

    while outer < cfg.entreg_outer_iters {
        outer += 1;
        let ent = circuit_entropy_latent(c, &params).ent;
        let mut node_prob = vec![0.0f64; c.num_units()];
        node_prob[c.root().index()] = 1.0;

        for layer in c.layers().iter().rev() {
            for &u in layer {
                let mass = node_prob[u.index()];
                match c.kind(u) {
                    UnitKind::Input => {}
                    UnitKind::Product => {
                        for ch in c.children(u) {
                            node_prob[ch.index()] += mass;
                        }
                    }
                    UnitKind::Sum => {
                        let edges = c.sum_edges(u);
                        let children = c.children(u);
                        let b = tau * mass;
                        let d = &d_edges[edges.clone()];
                        let gamma: Vec<f64> =
                            children.iter().map(|ch| ent[ch.index()]).collect();
                        let phi_init = &params.log_theta()[edges.clone()];
                        match solve_sum_unit(d, b, &gamma, phi_init, cfg.newton_iters, cfg.newton_tol)
                        {
                            Ok(sol) => {
                                solver_iterations.push(sol.iterations);
                                params.log_theta_mut()[edges.clone()].copy_from_slice(&sol.phi);
                            }
                            Err(Error::DegenerateUnit) => {
                                let k = children.len() as f64;
                                params.log_theta_mut()[edges.clone()].fill(-k.ln());
                                degenerate_units.push(u);
                            }
                            Err(e) => return Err(e),
                        }
                        // push node_prob to grandchildren with the new θ
                        let theta = &params.log_theta()[edges];
                        for (ch, &t) in children.iter().zip(theta) {
                            node_prob[ch.index()] += t.exp() * mass;
                        }
                    }
                }
            }
        }

        let obj = objective(c, &d_edges, tau, &params);
        let gain = obj - trace[trace.len() - 1];
        trace.push(obj);
        if obj > best_obj {
            best_obj = obj;
            best = params.clone();
        }
        if gain.abs() < cfg.entreg_outer_tol {
            converged = true;
            break;
        }
    }

    Ok(EntRegOutcome {
        params: best,
        converged,
        outer_iterations: outer,
        objective_trace: trace,
        solver_iterations,
        degenerate_units,
    })
}

/// Objective value Σ dₑ log θₑ + τ·H for external monotonicity checks.
pub fn entreg_objective(
    c: &Circuit,
    flows: &FlowAccumulator,
    tau: f64,
    p: &ParamVector,
) -> f64 {
    let w = flows.total_weight();
    let norm = if w > 0.0 { w } else { 1.0 };
    let d_edges: Vec<f64> = (0..c.num_sum_edges())
        .map(|e| (flows.edge_flow(e) / norm).max(0.0))
        .collect();
    objective(c, &d_edges, tau, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mle_reduction_when_b_is_zero() {
        let sol = solve_sum_unit(&[3.0, 1.0], 0.0, &[0.0, 0.0], &[-0.5, -0.5], 50, 1e-12).unwrap();
        assert!((sol.phi[0] - 0.75f64.ln()).abs() < 1e-12);
        assert!((sol.phi[1] - 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_entropy_only_solution_is_uniform() {
        let sol = solve_sum_unit(&[0.0, 0.0], 1.0, &[0.0, 0.0], &[-0.7, -0.7], 50, 1e-12).unwrap();
        assert!((sol.phi[0] - 0.5f64.ln()).abs() < 1e-10);
        assert!((sol.phi[1] - 0.5f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn empty_data_prefers_high_entropy_child() {
        // children entropies 0 and 9·ln 2 ⇒ θ ∝ exp(H): (1/513, 512/513)
        let g2 = 9.0 * std::f64::consts::LN_2;
        let sol = solve_sum_unit(&[0.0, 0.0], 0.5, &[0.0, g2], &[-0.7, -0.7], 50, 1e-12).unwrap();
        assert!((sol.phi[0].exp() - 1.0 / 513.0).abs() < 1e-9, "{:?}", sol.phi);
        assert!((sol.phi[1].exp() - 512.0 / 513.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_unit_is_reported() {
        assert!(matches!(
            solve_sum_unit(&[0.0, 0.0], 0.0, &[0.0, 0.0], &[-0.7, -0.7], 50, 1e-10),
            Err(Error::DegenerateUnit)
        ));
    }

    #[test]
    fn kkt_conditions_hold() {
        let d = [0.6, 0.4];
        let b = 0.5;
        let gamma = [0.0, 0.0];
        let sol = solve_sum_unit(&d, b, &gamma, &[-0.7, -0.7], 50, 1e-12).unwrap();
        assert!(sol.kkt_residual < 1e-12);
        assert!(logsumexp(&sol.phi).abs() < 1e-12);
    }
}
