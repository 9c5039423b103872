//! DQN: replay buffer, target network, Huber TD updates, and linearly
//! annealed epsilon-greedy exploration. Legal-action masks are respected
//! in both the argmax and the exploration draw.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nncore::{adam_step, AdamState, Network, ParamGrads};

#[derive(Debug, Clone)]
pub struct DqnConfig {
    pub gamma: f64,
    pub lr: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_sync: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_steps: usize,
    pub learn_start: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            gamma: 0.99,
            lr: 5e-4,
            replay_capacity: 50_000,
            batch_size: 64,
            target_sync: 1000,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_steps: 20_000,
            learn_start: 1000,
        }
    }
}

impl DqnConfig {
    /// Linearly annealed exploration rate at an environment step.
    pub fn epsilon_at(&self, step: usize) -> f64 {
        if self.eps_decay_steps == 0 {
            return self.eps_end;
        }
        let frac = (step as f64 / self.eps_decay_steps as f64).min(1.0);
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }
}

/// Online and target Q-networks mapping observation -> one value per action.
#[derive(Debug, Clone)]
pub struct QFunction {
    pub net: Network,
    pub target: Network,
}

impl QFunction {
    pub fn new(obs_dim: usize, hidden: &[usize], n_actions: usize, seed: u64) -> Result<QFunction> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(n_actions);
        let net = crate::nncore::init_network(&sizes, seed)?;
        let target = net.clone();
        Ok(QFunction { net, target })
    }

    /// Copies online parameters into the target network.
    pub fn sync(&mut self) {
        self.target = self.net.clone();
    }

    /// Greedy legal action under the online net (lowest index on ties).
    pub fn greedy(&self, obs: &[f64], mask: &[bool]) -> Result<usize> {
        let q = self.net.apply(obs)?;
        argmax_legal(&q, mask).ok_or_else(|| Error::state("empty legal mask"))
    }

    fn max_target(&self, obs: &[f64], mask: &[bool]) -> Result<f64> {
        let q = self.target.apply(obs)?;
        let best = argmax_legal(&q, mask).ok_or_else(|| Error::state("empty legal mask"))?;
        Ok(q[best])
    }
}

fn argmax_legal(values: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if mask.is_empty() || mask[i] {
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// One stored transition. `next_mask` is required to restrict the target
/// argmax to legal successor actions.
#[derive(Debug, Clone)]
pub struct ReplayEntry {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub next_mask: Vec<bool>,
    pub done: bool,
}

/// Uniform ring-buffer replay.
#[derive(Debug, Default)]
pub struct Replay {
    buf: VecDeque<ReplayEntry>,
    capacity: usize,
}

impl Replay {
    pub fn new(capacity: usize) -> Replay {
        Replay { buf: VecDeque::with_capacity(capacity.min(1 << 20)), capacity }
    }

    pub fn push(&mut self, entry: ReplayEntry) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(entry);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        (0..n).map(|_| rng.gen_range(0..self.buf.len())).collect()
    }

    pub fn get(&self, idx: usize) -> &ReplayEntry {
        &self.buf[idx]
    }
}

/// One TD update on a sampled minibatch with Huber loss (delta = 1).
/// Targets are `r + gamma * max_legal Q_target(s')` with terminal masking.
pub fn dqn_update(
    q: &mut QFunction,
    replay: &Replay,
    indices: &[usize],
    gamma: f64,
    opt: &mut AdamState,
) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::state("dqn_update with an empty minibatch"));
    }
    let mut grads = ParamGrads::zeros_like(&q.net);
    let n = indices.len() as f64;
    let mut total_loss = 0.0;
    let n_actions = q.net.output_dim();
    for &idx in indices {
        let entry = replay.get(idx);
        let target = if entry.done {
            entry.reward
        } else {
            entry.reward + gamma * q.max_target(&entry.next_obs, &entry.next_mask)?
        };
        let values = q.net.forward(&entry.obs)?.to_vec();
        let e = values[entry.action] - target;
        let (loss, dloss) = if e.abs() <= 1.0 { (0.5 * e * e, e) } else { (e.abs() - 0.5, e.signum()) };
        total_loss += loss / n;
        let mut upstream = vec![0.0; n_actions];
        upstream[entry.action] = dloss / n;
        q.net.backward_into(&upstream, &mut grads)?;
    }
    if !total_loss.is_finite() {
        return Err(Error::Numerical(format!("non-finite TD loss {total_loss}")));
    }
    adam_step(&mut q.net, &grads, opt)?;
    Ok(total_loss)
}

/// Epsilon-greedy action: uniform over legal actions with probability
/// `eps`, otherwise the greedy legal action.
pub fn epsilon_greedy<R: Rng + ?Sized>(
    q: &QFunction,
    obs: &[f64],
    mask: &[bool],
    eps: f64,
    rng: &mut R,
) -> Result<usize> {
    if rng.gen::<f64>() < eps {
        let legal: Vec<usize> = (0..q.net.output_dim())
            .filter(|&a| mask.is_empty() || mask[a])
            .collect();
        if legal.is_empty() {
            return Err(Error::state("empty legal mask"));
        }
        Ok(legal[rng.gen_range(0..legal.len())])
    } else {
        q.greedy(obs, mask)
    }
}
