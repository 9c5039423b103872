//! Generalized advantage estimation.

use super::rollout::RolloutBatch;

/// Fills `advantages` and `returns` on the rollout using GAE(gamma, lambda).
/// Episode boundaries (done flags) cut the recursion; a rollout that ends
/// mid-episode bootstraps from `rollout.last_value`.
pub fn compute_gae(rollout: &mut RolloutBatch, gamma: f64, lambda: f64) {
    let n = rollout.len();
    rollout.advantages = vec![0.0; n];
    rollout.returns = vec![0.0; n];
    let mut gae = 0.0;
    for t in (0..n).rev() {
        let nonterminal = if rollout.dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 == n {
            rollout.last_value
        } else if rollout.dones[t] {
            0.0
        } else {
            rollout.values[t + 1]
        };
        let delta = rollout.rewards[t] + gamma * next_value * nonterminal - rollout.values[t];
        gae = delta + gamma * lambda * nonterminal * gae;
        rollout.advantages[t] = gae;
        rollout.returns[t] = gae + rollout.values[t];
    }
}
