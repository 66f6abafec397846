//! Parameter estimation: closed-form maximum likelihood with Laplace
//! smoothing, EM through expected flows, the hybrid mini-/full-batch EM
//! schedule, and entropy regularization. All estimators compose with data
//! softening — they only see flows, and softened flows are produced by the
//! same passes.

mod entreg;

pub use entreg::{
    entreg_objective, entropy_regularize, solve_sum_unit, EntRegOutcome, SumUnitSolve,
};

use crate::circuit::{Circuit, ParamVector, UnitId};
use crate::data::WeightedDataset;
use crate::error::{Error, Result};
use crate::evaluate::{accumulate_flows, loglikelihood, EvalMode, FlowAccumulator};
use crate::math::logaddexp;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Training hyperparameters.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    /// Laplace pseudocount, split evenly over each sum unit's children.
    pub alpha: f64,
    /// Data softening factor β; `None` (or 1) trains on hard data.
    pub beta: Option<f64>,
    /// Entropy regularization strength τ.
    pub tau: f64,
    pub minibatch_epochs: usize,
    pub fullbatch_epochs: usize,
    pub batch_size: usize,
    /// Mini-batch step size η: θ ← (1−η)θ + ηθ_new. Full-batch uses η = 1.
    pub step_size: f64,
    pub newton_iters: usize,
    pub newton_tol: f64,
    pub entreg_outer_iters: usize,
    pub entreg_outer_tol: f64,
    /// Epochs between train/validation metric evaluations.
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.0,
            beta: None,
            tau: 0.0,
            minibatch_epochs: 0,
            fullbatch_epochs: 0,
            batch_size: 1024,
            step_size: 0.1,
            newton_iters: 100,
            newton_tol: 1e-10,
            entreg_outer_iters: 20,
            entreg_outer_tol: 1e-7,
            eval_every: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be ≥ 0, got {}", self.alpha));
        }
        if let Some(beta) = self.beta {
            if !(beta > 0.0 && beta <= 1.0) {
                return bad(format!("beta must lie in (0, 1], got {beta}"));
            }
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be ≥ 0, got {}", self.tau));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return bad(format!("step_size must lie in (0, 1], got {}", self.step_size));
        }
        if self.newton_iters == 0 || self.entreg_outer_iters == 0 {
            return bad("iteration limits must be positive".into());
        }
        if !(self.newton_tol > 0.0) || !(self.entreg_outer_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive".into());
        }
        Ok(())
    }
}

/// Closed-form MLE output; sum units that saw no flow (with α = 0) fall back
/// to uniform parameters and are listed here.
#[derive(Clone, Debug)]
pub struct MleResult {
    pub params: ParamVector,
    pub empty_sum_units: Vec<UnitId>,
}

/// θ_(n,c) = (F_(n,c) + α/|ch(n)|) / (Σ_c F + α), per sum unit.
pub fn mle_closed_form(c: &Circuit, flows: &FlowAccumulator, alpha: f64) -> MleResult {
    let mut log_theta = vec![0.0f64; c.num_sum_edges()];
    let mut empty = Vec::new();
    for u in c.sum_units() {
        let r = c.sum_edges(u);
        let k = r.len() as f64;
        let mut den = alpha;
        for e in r.clone() {
            den += flows.edge_flow(e).max(0.0);
        }
        if den <= 0.0 {
            log_theta[r].fill(-(k.ln()));
            empty.push(u);
            continue;
        }
        let add = alpha / k;
        let mut lse = f64::NEG_INFINITY;
        for e in r.clone() {
            let t = ((flows.edge_flow(e).max(0.0) + add) / den).ln();
            log_theta[e] = t;
            lse = logaddexp(lse, t);
        }
        if lse != 0.0 && lse.is_finite() {
            for e in r {
                log_theta[e] -= lse;
            }
        }
    }
    MleResult {
        params: ParamVector::from_raw(log_theta),
        empty_sum_units: empty,
    }
}

/// One full-batch EM update: expected flows at the current parameters, then
/// the closed-form M-step with Laplace smoothing folded into the ratio.
pub fn em_step(
    c: &Circuit,
    p: &ParamVector,
    d: &WeightedDataset,
    alpha: f64,
) -> Result<ParamVector> {
    let flows = accumulate_flows(c, p, d, EvalMode::Weighted)?;
    Ok(mle_closed_form(c, &flows, alpha).params)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainPhase {
    MiniBatch,
    FullBatch,
}

#[derive(Clone, Debug)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub phase: TrainPhase,
    /// Mean log-likelihood of the (hard) training data, when evaluated.
    pub train_ll: Option<f64>,
    pub valid_ll: Option<f64>,
    /// Zero-probability samples seen by this epoch's flow passes.
    pub zero_prob_samples: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParamVector,
    pub epochs: Vec<EpochMetrics>,
}

/// Hybrid EM: `minibatch_epochs` of shuffled mini-batch EM with step size η,
/// then `fullbatch_epochs` of full-batch EM. When τ > 0 every M-step runs
/// entropy regularization on the batch's expected flows (with Laplace
/// pseudocounts folded in) instead of the plain closed form.
pub fn train_em_hybrid(
    c: &Circuit,
    d: &WeightedDataset,
    cfg: &TrainConfig,
    valid: Option<&WeightedDataset>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train = match cfg.beta {
        Some(beta) if beta < 1.0 => d.clone().soften(beta)?,
        _ => d.clone().harden(),
    };
    let hard = d.clone().harden();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ParamVector::dirichlet(c, &mut rng);
    let mut epochs = Vec::new();
    let n = train.len();

    let m_step = |flows: &FlowAccumulator, current: &ParamVector| -> Result<ParamVector> {
        if cfg.tau > 0.0 {
            let folded = flows.with_pseudocount(c, cfg.alpha);
            Ok(entropy_regularize(c, &folded, current, cfg.tau, cfg)?.params)
        } else {
            Ok(mle_closed_form(c, flows, cfg.alpha).params)
        }
    };

    let mut epoch_no = 0usize;
    for _ in 0..cfg.minibatch_epochs {
        epoch_no += 1;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut zero = 0usize;
        for rows in order.chunks(cfg.batch_size) {
            let batch = train.select(rows);
            let flows = accumulate_flows(c, &params, &batch, EvalMode::Weighted)?;
            zero += flows.zero_probability_samples();
            let target = m_step(&flows, &params)?;
            mix_params(c, &mut params, &target, cfg.step_size);
        }
        epochs.push(epoch_metrics(
            c, &params, &hard, valid, epoch_no, TrainPhase::MiniBatch, zero, cfg,
        )?);
    }

    for _ in 0..cfg.fullbatch_epochs {
        epoch_no += 1;
        let flows = accumulate_flows(c, &params, &train, EvalMode::Weighted)?;
        let zero = flows.zero_probability_samples();
        params = m_step(&flows, &params)?;
        epochs.push(epoch_metrics(
            c, &params, &hard, valid, epoch_no, TrainPhase::FullBatch, zero, cfg,
        )?);
    }

    Ok(TrainOutcome { params, epochs })
}

#[allow(clippy::too_many_arguments)]
fn epoch_metrics(
    c: &Circuit,
    params: &ParamVector,
    hard: &WeightedDataset,
    valid: Option<&WeightedDataset>,
    epoch: usize,
    phase: TrainPhase,
    zero_prob_samples: usize,
    cfg: &TrainConfig,
) -> Result<EpochMetrics> {
    let evaluate_now = epoch % cfg.eval_every == 0;
    let (train_ll, valid_ll) = if evaluate_now {
        let t = loglikelihood(c, params, hard)?.mean;
        let v = match valid {
            Some(vd) => Some(loglikelihood(c, params, vd)?.mean),
            None => None,
        };
        (Some(t), v)
    } else {
        (None, None)
    };
    Ok(EpochMetrics {
        epoch,
        phase,
        train_ll,
        valid_ll,
        zero_prob_samples,
    })
}

/// θ ← (1−η)·θ + η·θ_target in probability space, then exact renormalize.
fn mix_params(c: &Circuit, params: &mut ParamVector, target: &ParamVector, eta: f64) {
    if eta >= 1.0 {
        *params = target.clone();
        return;
    }
    let l_keep = (1.0 - eta).ln();
    let l_new = eta.ln();
    let cur = params.log_theta_mut();
    let tgt = target.log_theta();
    for (a, &b) in cur.iter_mut().zip(tgt) {
        *a = logaddexp(*a + l_keep, b + l_new);
    }
    params.renormalize(c);
}
