//! The AIRL and Hybrid-AIRL loss functions, in both value form (for tests
//! and logging) and gradient form (for discriminator updates).
//!
//! Scores are always handled in log-space: with `z = f - log pi`,
//! `-log D = softplus(-z)` and `-log(1 - D) = softplus(z)`, so nothing here
//! can overflow for finite inputs.

use super::{DemoBatch, Discriminator};
use crate::agents::{supervised_sample, Policy};
use crate::error::{Error, Result};
use crate::nncore::{adam_step, AdamState, ParamGrads};

/// `D = exp(f) / (exp(f) + pi)` computed as `sigmoid(f - log pi)`.
pub fn disc_output(f_value: f64, logpi: f64) -> f64 {
    sigmoid(f_value - logpi)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean of `-f + log pi` over a batch: the policy loss whose negation is
/// the entropy-regularized learned return.
pub fn airl_policy_loss(f_values: &[f64], logpis: &[f64]) -> f64 {
    assert_eq!(f_values.len(), logpis.len(), "batch length mismatch");
    if f_values.is_empty() {
        return 0.0;
    }
    f_values.iter().zip(logpis).map(|(f, lp)| -f + lp).sum::<f64>() / f_values.len() as f64
}

/// Mean supervised imitation loss on expert pairs: cross-entropy
/// `-log pi(a_E|s)` for discrete actions, squared error between the policy
/// mean and the expert action for continuous ones.
pub fn supervised_policy_loss(policy: &mut Policy, batch: &DemoBatch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::state("supervised loss on an empty demo batch"));
    }
    let head = policy.head.clone();
    let mut total = 0.0;
    for i in 0..batch.len() {
        let out = policy.net.forward(&batch.obs[i])?.to_vec();
        let mask = if batch.masks.is_empty() { &[][..] } else { &batch.masks[i][..] };
        let (loss, _) = supervised_sample(&head, &out, &batch.actions[i], mask)?;
        total += loss;
    }
    Ok(total / batch.len() as f64)
}

/// `(1 - alpha) * airl + alpha * supervised`.
pub fn hybrid_policy_loss(airl_loss: f64, sup_loss: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config(format!("alpha must be in [0,1], got {alpha}")));
    }
    Ok((1.0 - alpha) * airl_loss + alpha * sup_loss)
}

/// Policy-generated discriminator inputs: observations, action encodings
/// (possibly noise-perturbed), the log-probabilities recorded at sampling
/// time, and the legal masks the actions were drawn under.
#[derive(Debug, Clone, Default)]
pub struct DiscBatch {
    pub obs: Vec<Vec<f64>>,
    pub act_enc: Vec<Vec<f64>>,
    pub logpi: Vec<f64>,
    pub masks: Vec<Vec<bool>>,
}

impl DiscBatch {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> DiscBatch {
        DiscBatch {
            obs: indices.iter().map(|&i| self.obs[i].clone()).collect(),
            act_enc: indices.iter().map(|&i| self.act_enc[i].clone()).collect(),
            logpi: indices.iter().map(|&i| self.logpi[i]).collect(),
            masks: indices.iter().map(|&i| self.masks[i].clone()).collect(),
        }
    }
}

/// Expert-side scores for the adversarial loss: `f` and `log pi` of the
/// expert action under the current policy.
fn expert_scores(
    disc: &mut Discriminator,
    policy: &mut Policy,
    expert: &DemoBatch,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut fs = Vec::with_capacity(expert.len());
    let mut lps = Vec::with_capacity(expert.len());
    for i in 0..expert.len() {
        let enc = disc.encode_action(&expert.actions[i])?;
        fs.push(disc.f_value(&expert.obs[i], &enc)?);
        let mask = if expert.masks.is_empty() { &[][..] } else { &expert.masks[i][..] };
        lps.push(policy.log_prob(&expert.obs[i], &expert.actions[i], mask)?);
    }
    Ok((fs, lps))
}

/// Binary cross-entropy of the discriminator:
/// `-E_expert[log D] - E_policy[log(1 - D)]`.
pub fn disc_adversarial_loss(
    expert: &DemoBatch,
    policy_batch: &DiscBatch,
    disc: &mut Discriminator,
    policy: &mut Policy,
) -> Result<f64> {
    if expert.is_empty() || policy_batch.is_empty() {
        return Err(Error::state("adversarial loss requires nonempty batches"));
    }
    let (expert_f, expert_lp) = expert_scores(disc, policy, expert)?;
    let mut loss = 0.0;
    for (f, lp) in expert_f.iter().zip(&expert_lp) {
        loss += softplus(-(f - lp)) / expert.len() as f64;
    }
    for i in 0..policy_batch.len() {
        let f = disc.f_value(&policy_batch.obs[i], &policy_batch.act_enc[i])?;
        loss += softplus(f - policy_batch.logpi[i]) / policy_batch.len() as f64;
    }
    Ok(loss)
}

/// Mean squared error between the reward head and the recorded env reward
/// over expert pairs.
pub fn disc_supervised_loss(expert: &DemoBatch, disc: &mut Discriminator) -> Result<f64> {
    let r_env = expert
        .r_env
        .as_ref()
        .ok_or_else(|| Error::config("supervised discriminator loss requires env rewards (set beta = 0 when demos lack them)"))?;
    if expert.is_empty() {
        return Err(Error::state("supervised loss on an empty batch"));
    }
    let mut loss = 0.0;
    for i in 0..expert.len() {
        let enc = disc.encode_action(&expert.actions[i])?;
        let f = disc.f_value(&expert.obs[i], &enc)?;
        let e = f - r_env[i];
        loss += e * e / expert.len() as f64;
    }
    Ok(loss)
}

/// `(1 - beta) * adversarial + beta * supervised`. The policy batch is
/// expected to carry any stochastic-regularization perturbation already;
/// the supervised term always reads unperturbed expert pairs and
/// ground-truth rewards.
pub fn hybrid_disc_loss(
    expert: &DemoBatch,
    policy_batch: &DiscBatch,
    disc: &mut Discriminator,
    policy: &mut Policy,
    beta: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::config(format!("beta must be in [0,1], got {beta}")));
    }
    let adv = disc_adversarial_loss(expert, policy_batch, disc, policy)?;
    if beta == 0.0 {
        return Ok(adv);
    }
    let sup = disc_supervised_loss(expert, disc)?;
    Ok((1.0 - beta) * adv + beta * sup)
}

/// Which loss family drives a discriminator update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossPath {
    /// Plain adversarial cross-entropy (the baseline).
    Airl,
    /// `(1 - beta)` adversarial + `beta` supervised.
    Hybrid { beta: f64 },
}

/// One gradient step on the discriminator parameters. Returns the loss at
/// the pre-update parameters. The policy is read-only here.
pub fn disc_update(
    disc: &mut Discriminator,
    opt: &mut AdamState,
    policy: &mut Policy,
    expert: &DemoBatch,
    policy_batch: &DiscBatch,
    path: LossPath,
) -> Result<f64> {
    if expert.is_empty() || policy_batch.is_empty() {
        return Err(Error::state("discriminator update requires nonempty batches"));
    }
    let (beta, r_env) = match path {
        LossPath::Airl => (0.0, None),
        LossPath::Hybrid { beta } => {
            if !(0.0..=1.0).contains(&beta) {
                return Err(Error::config(format!("beta must be in [0,1], got {beta}")));
            }
            if beta > 0.0 && expert.r_env.is_none() {
                return Err(Error::config(
                    "beta > 0 requires demos carrying env rewards (set beta = 0 otherwise)",
                ));
            }
            (beta, expert.r_env.as_ref())
        }
    };
    let adv_weight = 1.0 - beta;
    let mut grads = ParamGrads::zeros_like(&disc.net);
    let mut loss = 0.0;

    // Expert side of the adversarial term, plus the supervised term on the
    // same pairs.
    let n_e = expert.len() as f64;
    for i in 0..expert.len() {
        let enc = disc.encode_action(&expert.actions[i])?;
        let f = disc.f_value(&expert.obs[i], &enc)?;
        let mask = if expert.masks.is_empty() { &[][..] } else { &expert.masks[i][..] };
        let lp = policy.log_prob(&expert.obs[i], &expert.actions[i], mask)?;
        let z = f - lp;
        loss += adv_weight * softplus(-z) / n_e;
        // d softplus(-z)/df = -(1 - D); the policy side re-forwards below,
        // so the tape here is still valid for this sample.
        let mut upstream = adv_weight * -(1.0 - sigmoid(z)) / n_e;
        if let Some(r) = r_env {
            let e = f - r[i];
            loss += beta * e * e / n_e;
            upstream += beta * 2.0 * e / n_e;
        }
        disc.net.backward_into(&[upstream], &mut grads)?;
    }

    // Policy side of the adversarial term.
    let n_p = policy_batch.len() as f64;
    for i in 0..policy_batch.len() {
        let f = disc.f_value(&policy_batch.obs[i], &policy_batch.act_enc[i])?;
        let z = f - policy_batch.logpi[i];
        loss += adv_weight * softplus(z) / n_p;
        let upstream = adv_weight * sigmoid(z) / n_p;
        disc.net.backward_into(&[upstream], &mut grads)?;
    }

    if !loss.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite discriminator loss {loss}; grad max {:.3e}",
            grads.max_abs()
        )));
    }
    adam_step(&mut disc.net, &grads, opt)?;
    Ok(loss)
}
