//! Stochastic policies: masked categorical over discrete actions, diagonal
//! Gaussian over continuous ones. Both expose exact log-probabilities and
//! the gradients of log-probability and entropy with respect to the
//! network's output head.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::envs::{Action, ActionSpace};
use crate::error::{Error, Result};
use crate::nncore::Network;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Log-probabilities over all actions with illegal entries at -inf.
/// An empty mask means every action is legal.
pub fn masked_log_softmax(logits: &[f64], mask: &[bool]) -> Vec<f64> {
    let legal = |i: usize| mask.is_empty() || mask[i];
    let mut max = f64::NEG_INFINITY;
    for (i, &z) in logits.iter().enumerate() {
        if legal(i) && z > max {
            max = z;
        }
    }
    let mut log_sum = 0.0;
    for (i, &z) in logits.iter().enumerate() {
        if legal(i) {
            log_sum += (z - max).exp();
        }
    }
    let log_z = max + log_sum.ln();
    logits
        .iter()
        .enumerate()
        .map(|(i, &z)| if legal(i) { z - log_z } else { f64::NEG_INFINITY })
        .collect()
}

/// What the network's output head parameterizes.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyHead {
    /// `n` logits, softmax over the legal-action mask.
    Discrete { n: usize },
    /// `dim` means followed by `dim` log-stds (clamped to
    /// [`LOG_STD_MIN`, `LOG_STD_MAX`]).
    Gaussian { low: Vec<f64>, high: Vec<f64> },
}

/// A policy is a network plus the action-space interpretation of its head.
#[derive(Debug, Clone)]
pub struct Policy {
    pub net: Network,
    pub head: PolicyHead,
}

impl Policy {
    /// Builds a policy network `obs_dim -> hidden -> head` for `space`.
    pub fn new(obs_dim: usize, hidden: &[usize], space: &ActionSpace, seed: u64) -> Result<Policy> {
        let (head, out_dim) = match space {
            ActionSpace::Discrete { n } => (PolicyHead::Discrete { n: *n }, *n),
            ActionSpace::Continuous { low, high } => (
                PolicyHead::Gaussian { low: low.clone(), high: high.clone() },
                2 * low.len(),
            ),
        };
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(out_dim);
        Ok(Policy { net: crate::nncore::init_network(&sizes, seed)?, head })
    }

    pub fn action_space(&self) -> ActionSpace {
        match &self.head {
            PolicyHead::Discrete { n } => ActionSpace::Discrete { n: *n },
            PolicyHead::Gaussian { low, high } => {
                ActionSpace::Continuous { low: low.clone(), high: high.clone() }
            }
        }
    }

    /// Exact log-probability of `action` given the recorded forward output.
    pub fn log_prob(&mut self, obs: &[f64], action: &Action, mask: &[bool]) -> Result<f64> {
        let out = self.net.forward(obs)?.to_vec();
        head_log_prob(&self.head, &out, action, mask)
    }

    /// Samples an action; deterministic given the RNG state.
    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        obs: &[f64],
        mask: &[bool],
        rng: &mut R,
    ) -> Result<(Action, f64)> {
        let out = self.net.forward(obs)?.to_vec();
        match &self.head {
            PolicyHead::Discrete { n } => {
                let logp = masked_log_softmax(&out[..*n], mask);
                let u: f64 = rng.gen();
                let mut cum = 0.0;
                let mut pick = None;
                for (i, lp) in logp.iter().enumerate() {
                    if lp.is_finite() {
                        cum += lp.exp();
                        if u < cum {
                            pick = Some(i);
                            break;
                        }
                    }
                }
                // Guard against cum rounding just below 1.
                let a = pick.unwrap_or_else(|| {
                    logp.iter().rposition(|lp| lp.is_finite()).expect("nonempty legal mask")
                });
                Ok((Action::Discrete(a), logp[a]))
            }
            PolicyHead::Gaussian { low, .. } => {
                let dim = low.len();
                let mut a = Vec::with_capacity(dim);
                for d in 0..dim {
                    let mean = out[d];
                    let std = out[dim + d].clamp(LOG_STD_MIN, LOG_STD_MAX).exp();
                    let z: f64 = rng.sample(StandardNormal);
                    a.push(mean + std * z);
                }
                let action = Action::Continuous(a);
                let lp = head_log_prob(&self.head, &out, &action, mask)?;
                Ok((action, lp))
            }
        }
    }

    /// Greedy action: argmax over legal logits (lowest index wins ties) or
    /// the Gaussian mean.
    pub fn greedy(&self, obs: &[f64], mask: &[bool]) -> Result<Action> {
        let out = self.net.apply(obs)?;
        match &self.head {
            PolicyHead::Discrete { n } => {
                let mut best = None;
                for i in 0..*n {
                    if mask.is_empty() || mask[i] {
                        let better = match best {
                            None => true,
                            Some((_, bz)) => out[i] > bz,
                        };
                        if better {
                            best = Some((i, out[i]));
                        }
                    }
                }
                let (a, _) = best.ok_or_else(|| Error::state("empty legal mask"))?;
                Ok(Action::Discrete(a))
            }
            PolicyHead::Gaussian { low, .. } => Ok(Action::Continuous(out[..low.len()].to_vec())),
        }
    }
}

/// Log-probability under a head output vector.
pub fn head_log_prob(head: &PolicyHead, out: &[f64], action: &Action, mask: &[bool]) -> Result<f64> {
    match head {
        PolicyHead::Discrete { n } => {
            let a = action.discrete()?;
            if a >= *n {
                return Err(Error::config(format!("action {a} out of range 0..{n}")));
            }
            if !(mask.is_empty() || mask[a]) {
                return Err(Error::config(format!("action {a} is illegal under the mask")));
            }
            Ok(masked_log_softmax(&out[..*n], mask)[a])
        }
        PolicyHead::Gaussian { low, .. } => {
            let a = action.continuous()?;
            let dim = low.len();
            if a.len() != dim {
                return Err(Error::shape(dim, a.len(), "continuous action"));
            }
            let mut lp = 0.0;
            for d in 0..dim {
                let mean = out[d];
                let log_std = out[dim + d].clamp(LOG_STD_MIN, LOG_STD_MAX);
                let std = log_std.exp();
                let z = (a[d] - mean) / std;
                lp += -0.5 * z * z - log_std - 0.5 * (2.0 * std::f64::consts::PI).ln();
            }
            Ok(lp)
        }
    }
}

/// Gradient of `log pi(action|obs)` with respect to the head output.
pub fn head_log_prob_grad(
    head: &PolicyHead,
    out: &[f64],
    action: &Action,
    mask: &[bool],
) -> Result<Vec<f64>> {
    match head {
        PolicyHead::Discrete { n } => {
            let a = action.discrete()?;
            let logp = masked_log_softmax(&out[..*n], mask);
            let mut grad = vec![0.0; out.len()];
            for i in 0..*n {
                if logp[i].is_finite() {
                    grad[i] = -logp[i].exp();
                }
            }
            grad[a] += 1.0;
            Ok(grad)
        }
        PolicyHead::Gaussian { low, .. } => {
            let a = action.continuous()?;
            let dim = low.len();
            let mut grad = vec![0.0; out.len()];
            for d in 0..dim {
                let mean = out[d];
                let raw = out[dim + d];
                let log_std = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
                let std = log_std.exp();
                let z = (a[d] - mean) / std;
                grad[d] = z / std;
                // Hard clamp: no gradient outside the clamp range.
                if raw > LOG_STD_MIN && raw < LOG_STD_MAX {
                    grad[dim + d] = z * z - 1.0;
                }
            }
            Ok(grad)
        }
    }
}

/// Entropy of the action distribution at a head output.
pub fn head_entropy(head: &PolicyHead, out: &[f64], mask: &[bool]) -> f64 {
    match head {
        PolicyHead::Discrete { n } => {
            let logp = masked_log_softmax(&out[..*n], mask);
            -logp
                .iter()
                .filter(|lp| lp.is_finite())
                .map(|lp| lp.exp() * lp)
                .sum::<f64>()
        }
        PolicyHead::Gaussian { low, .. } => {
            let dim = low.len();
            let mut h = 0.0;
            for d in 0..dim {
                let log_std = out[dim + d].clamp(LOG_STD_MIN, LOG_STD_MAX);
                h += log_std + 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln());
            }
            h
        }
    }
}

/// Gradient of the entropy with respect to the head output.
pub fn head_entropy_grad(head: &PolicyHead, out: &[f64], mask: &[bool]) -> Vec<f64> {
    match head {
        PolicyHead::Discrete { n } => {
            let logp = masked_log_softmax(&out[..*n], mask);
            let h = -logp
                .iter()
                .filter(|lp| lp.is_finite())
                .map(|lp| lp.exp() * lp)
                .sum::<f64>();
            let mut grad = vec![0.0; out.len()];
            for i in 0..*n {
                if logp[i].is_finite() {
                    grad[i] = -logp[i].exp() * (logp[i] + h);
                }
            }
            grad
        }
        PolicyHead::Gaussian { low, .. } => {
            let dim = low.len();
            let mut grad = vec![0.0; out.len()];
            for d in 0..dim {
                let raw = out[dim + d];
                if raw > LOG_STD_MIN && raw < LOG_STD_MAX {
                    grad[dim + d] = 1.0;
                }
            }
            grad
        }
    }
}
