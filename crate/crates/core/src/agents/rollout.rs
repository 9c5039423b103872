//! Rollout collection: whole episodes gathered under the current policy.

use rand::Rng;

use super::policy::Policy;
use crate::envs::{Action, Env};
use crate::error::Result;
use crate::nncore::Network;

/// Index-aligned training data from one collection phase. `rewards` holds
/// whatever signal the caller is optimizing (environment or learned);
/// `env_rewards` always keeps the environment's own signal for logging.
#[derive(Debug, Clone, Default)]
pub struct RolloutBatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub log_probs: Vec<f64>,
    pub masks: Vec<Vec<bool>>,
    pub rewards: Vec<f64>,
    pub env_rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Bootstrap value when the batch ends mid-episode (0 otherwise).
    pub last_value: f64,
    /// Return of each completed episode, for logging.
    pub episode_returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn mean_episode_return(&self) -> f64 {
        if self.episode_returns.is_empty() {
            0.0
        } else {
            self.episode_returns.iter().sum::<f64>() / self.episode_returns.len() as f64
        }
    }

    /// Normalizes advantages to mean 0, std 1 in place.
    pub fn normalize_advantages(&mut self) {
        let n = self.advantages.len();
        if n == 0 {
            return;
        }
        let mean = self.advantages.iter().sum::<f64>() / n as f64;
        let var =
            self.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt().max(1e-8);
        for a in &mut self.advantages {
            *a = (*a - mean) / std;
        }
    }
}

/// Runs whole episodes until at least `min_steps` transitions are gathered.
/// Episode seeds are drawn from `env_rng`; actions from `policy_rng`. The
/// value net fills per-step estimates for GAE.
pub fn collect_rollout<R: Rng + ?Sized>(
    env: &mut dyn Env,
    policy: &mut Policy,
    value_net: &mut Network,
    min_steps: usize,
    env_rng: &mut R,
    policy_rng: &mut R,
) -> Result<RolloutBatch> {
    let mut batch = RolloutBatch::default();
    while batch.len() < min_steps {
        let mut state = env.reset(env_rng.gen());
        let mut ep_return = 0.0;
        loop {
            let (action, log_prob) = policy.sample(&state.obs, &state.legal_mask, policy_rng)?;
            let value = value_net.forward(&state.obs)?[0];
            let step = env.step(&action)?;
            batch.obs.push(state.obs.clone());
            batch.actions.push(action);
            batch.log_probs.push(log_prob);
            batch.masks.push(state.legal_mask.clone());
            batch.rewards.push(step.reward);
            batch.env_rewards.push(step.reward);
            batch.values.push(value);
            batch.dones.push(step.state.done);
            ep_return += step.reward;
            state = step.state;
            if state.done {
                break;
            }
        }
        batch.episode_returns.push(ep_return);
    }
    batch.last_value = 0.0; // batches always end on an episode boundary
    Ok(batch)
}
