//! Policy representations and the two RL learners used by the pipeline:
//! PPO for control tasks and reward-inference inner loops, DQN for poker.

mod dqn;
mod gae;
mod policy;
mod ppo;
mod rollout;
mod train;

pub use dqn::{dqn_update, epsilon_greedy, DqnConfig, QFunction, Replay, ReplayEntry};
pub use gae::compute_gae;
pub use policy::{
    head_entropy, head_entropy_grad, head_log_prob, head_log_prob_grad, masked_log_softmax,
    Policy, PolicyHead,
};
pub use ppo::{ppo_update, supervised_sample, PpoConfig, PpoDiagnostics, SupervisedBatch};
pub use rollout::{collect_rollout, RolloutBatch};
pub use train::{
    evaluate_policy_greedy, evaluate_q_greedy, train_dqn, train_ppo, DqnTrainConfig,
    PpoTrainConfig, RewardFn,
};
