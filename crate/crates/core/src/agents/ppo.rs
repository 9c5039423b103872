//! Proximal Policy Optimization with a clipped surrogate objective,
//! entropy bonus, and an optional supervised imitation term blended in for
//! hybrid reward-inference training.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::policy::{
    head_entropy, head_entropy_grad, head_log_prob, head_log_prob_grad, Policy, PolicyHead,
};
use super::rollout::RolloutBatch;
use crate::envs::Action;
use crate::error::{Error, Result};
use crate::nncore::{adam_step, AdamState, Network, ParamGrads};

#[derive(Debug, Clone)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub entropy_coef: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch: 256,
            lr: 3e-4,
            entropy_coef: 0.01,
        }
    }
}

/// Expert state-action pairs for the supervised term, weighted by alpha.
/// Discrete actions contribute cross-entropy, continuous ones the squared
/// error between the policy mean and the expert action.
#[derive(Debug)]
pub struct SupervisedBatch<'a> {
    pub obs: &'a [Vec<f64>],
    pub actions: &'a [Action],
    pub masks: &'a [Vec<bool>],
    pub alpha: f64,
}

#[derive(Debug, Clone, Default)]
pub struct PpoDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub supervised_loss: f64,
}

/// Per-sample supervised loss and its gradient w.r.t. the head output.
pub fn supervised_sample(
    head: &PolicyHead,
    out: &[f64],
    action: &Action,
    mask: &[bool],
) -> Result<(f64, Vec<f64>)> {
    match head {
        PolicyHead::Discrete { .. } => {
            let lp = head_log_prob(head, out, action, mask)?;
            let mut grad = head_log_prob_grad(head, out, action, mask)?;
            grad.iter_mut().for_each(|g| *g = -*g);
            Ok((-lp, grad))
        }
        PolicyHead::Gaussian { low, .. } => {
            let a = action.continuous()?;
            let dim = low.len();
            let mut loss = 0.0;
            let mut grad = vec![0.0; out.len()];
            for d in 0..dim {
                let e = out[d] - a[d];
                loss += e * e;
                grad[d] = 2.0 * e;
            }
            Ok((loss, grad))
        }
    }
}

/// One PPO update over the rollout: normalizes advantages, then runs
/// `epochs` passes of minibatch clipped-surrogate steps on the policy and
/// squared-error regression on the value net.
///
/// With `sup = Some(batch)` the policy gradient optimizes
/// `(1 - alpha) * (clip loss - entropy bonus) + alpha * supervised loss`;
/// with `None` it is plain PPO.
pub fn ppo_update(
    policy: &mut Policy,
    policy_opt: &mut AdamState,
    value_net: &mut Network,
    value_opt: &mut AdamState,
    rollout: &mut RolloutBatch,
    cfg: &PpoConfig,
    sup: Option<&SupervisedBatch<'_>>,
    update_rng: &mut ChaCha8Rng,
    demo_rng: &mut ChaCha8Rng,
) -> Result<PpoDiagnostics> {
    if rollout.is_empty() {
        return Err(Error::state("ppo_update on an empty rollout"));
    }
    if rollout.advantages.len() != rollout.len() {
        return Err(Error::state("advantages missing; run compute_gae first"));
    }
    rollout.normalize_advantages();

    let head = policy.head.clone();
    let (alpha, ppo_weight) = match sup {
        Some(s) => {
            if !(0.0..=1.0).contains(&s.alpha) {
                return Err(Error::config(format!("alpha must be in [0,1], got {}", s.alpha)));
            }
            (s.alpha, 1.0 - s.alpha)
        }
        None => (0.0, 1.0),
    };

    let mut grads = ParamGrads::zeros_like(&policy.net);
    let mut vgrads = ParamGrads::zeros_like(value_net);
    let mut diag = PpoDiagnostics::default();
    let mut minibatches = 0usize;
    let mut indices: Vec<usize> = (0..rollout.len()).collect();

    for _epoch in 0..cfg.epochs {
        indices.shuffle(update_rng);
        for chunk in indices.chunks(cfg.minibatch.max(1)) {
            let mb = chunk.len() as f64;
            grads.zero();
            vgrads.zero();
            let mut mb_policy_loss = 0.0;
            let mut mb_value_loss = 0.0;
            let mut mb_entropy = 0.0;
            let mut mb_clipped = 0usize;

            for &i in chunk {
                let out = policy.net.forward(&rollout.obs[i])?.to_vec();
                let mask = &rollout.masks[i];
                let logp_new = head_log_prob(&head, &out, &rollout.actions[i], mask)?;
                let ratio = (logp_new - rollout.log_probs[i]).exp();
                let adv = rollout.advantages[i];
                let s1 = ratio * adv;
                let s2 = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
                let surr = s1.min(s2);
                mb_policy_loss += -surr;
                if (ratio - 1.0).abs() > cfg.clip {
                    mb_clipped += 1;
                }
                let entropy = head_entropy(&head, &out, mask);
                mb_entropy += entropy;

                // d(-surr)/dlogp: zero when the clipped branch saturates.
                let dsurr_dlogp = if s1 <= s2 { adv * ratio } else { 0.0 };
                let dlogp = head_log_prob_grad(&head, &out, &rollout.actions[i], mask)?;
                let dent = head_entropy_grad(&head, &out, mask);
                let scale = ppo_weight / mb;
                let upstream: Vec<f64> = dlogp
                    .iter()
                    .zip(&dent)
                    .map(|(dl, de)| {
                        scale * (-dsurr_dlogp * dl - cfg.entropy_coef * de)
                    })
                    .collect();
                policy.net.backward_into(&upstream, &mut grads)?;

                let v = value_net.forward(&rollout.obs[i])?[0];
                let err = v - rollout.returns[i];
                mb_value_loss += err * err;
                value_net.backward_into(&[2.0 * err / mb], &mut vgrads)?;
            }

            // Supervised imitation term on a matching-size expert minibatch.
            if let Some(s) = sup {
                if alpha > 0.0 && !s.obs.is_empty() {
                    let mut sup_loss = 0.0;
                    let n_demo = chunk.len().min(s.obs.len());
                    for _ in 0..n_demo {
                        let j = rand::Rng::gen_range(demo_rng, 0..s.obs.len());
                        let out = policy.net.forward(&s.obs[j])?.to_vec();
                        let mask = if s.masks.is_empty() { &[][..] } else { &s.masks[j][..] };
                        let (loss, dout) = supervised_sample(&head, &out, &s.actions[j], mask)?;
                        sup_loss += loss / n_demo as f64;
                        let upstream: Vec<f64> =
                            dout.iter().map(|g| alpha * g / n_demo as f64).collect();
                        policy.net.backward_into(&upstream, &mut grads)?;
                    }
                    diag.supervised_loss += sup_loss;
                    mb_policy_loss = ppo_weight * mb_policy_loss + alpha * sup_loss * mb;
                }
            }

            let mb_policy_loss = mb_policy_loss / mb;
            let mb_value_loss = mb_value_loss / mb;
            if !mb_policy_loss.is_finite() || !mb_value_loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite PPO losses (policy {mb_policy_loss}, value {mb_value_loss}) \
                     at minibatch {minibatches}; grad max {:.3e}",
                    grads.max_abs()
                )));
            }
            adam_step(&mut policy.net, &grads, policy_opt)?;
            adam_step(value_net, &vgrads, value_opt)?;

            diag.policy_loss += mb_policy_loss;
            diag.value_loss += mb_value_loss;
            diag.entropy += mb_entropy / mb;
            diag.clip_fraction += mb_clipped as f64 / mb;
            minibatches += 1;
        }
    }
    let n = minibatches.max(1) as f64;
    diag.policy_loss /= n;
    diag.value_loss /= n;
    diag.entropy /= n;
    diag.clip_fraction /= n;
    diag.supervised_loss /= n;
    Ok(diag)
}
