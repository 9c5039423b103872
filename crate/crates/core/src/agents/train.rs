//! Plain RL training loops (environment reward or an injected reward
//! function) and greedy evaluation helpers. These drive both expert
//! training and the RL phase on learned rewards.

use rand::Rng;

use super::dqn::{dqn_update, epsilon_greedy, DqnConfig, QFunction, Replay, ReplayEntry};
use super::policy::Policy;
use super::ppo::{ppo_update, PpoConfig};
use super::rollout::collect_rollout;
use crate::envs::{Action, ActionSpace, Env};
use crate::error::{Error, Result};
use crate::logging::CurvePoint;
use crate::nncore::{AdamState, Network};

/// Alternative per-step reward: `(obs, action) -> reward`. When absent the
/// environment reward is used.
pub type RewardFn<'a> = &'a dyn Fn(&[f64], &Action) -> Result<f64>;

#[derive(Debug, Clone)]
pub struct DqnTrainConfig {
    pub dqn: DqnConfig,
    pub train_steps: usize,
    pub hidden: Vec<usize>,
    pub log_every: usize,
}

impl Default for DqnTrainConfig {
    fn default() -> Self {
        DqnTrainConfig {
            dqn: DqnConfig::default(),
            train_steps: 150_000,
            hidden: vec![64, 64],
            log_every: 2000,
        }
    }
}

/// Trains a DQN on a discrete env. Curves log the environment-reward
/// episode returns (a moving window mean) and the TD loss, regardless of
/// which reward signal drives learning.
pub fn train_dqn(
    env: &mut dyn Env,
    cfg: &DqnTrainConfig,
    seed: u64,
    reward_fn: Option<RewardFn<'_>>,
) -> Result<(QFunction, Vec<CurvePoint>)> {
    let n_actions = match env.action_space() {
        ActionSpace::Discrete { n } => n,
        ActionSpace::Continuous { .. } => {
            return Err(Error::config("DQN requires a discrete action space"));
        }
    };
    let mut q = QFunction::new(env.obs_dim(), &cfg.hidden, n_actions, seed ^ 0x9d39)?;
    let mut opt = AdamState::new(&q.net, cfg.dqn.lr);
    let mut replay = Replay::new(cfg.dqn.replay_capacity);
    let mut env_rng = crate::rng::stream(seed, "dqn.env");
    let mut explore_rng = crate::rng::stream(seed, "dqn.explore");
    let mut sample_rng = crate::rng::stream(seed, "dqn.replay");

    let mut curves = Vec::new();
    let mut recent_returns: Vec<f64> = Vec::new();
    let mut td_accum = 0.0;
    let mut td_count = 0usize;
    let mut step = 0usize;

    while step < cfg.train_steps {
        let mut state = env.reset(env_rng.gen());
        let mut ep_return = 0.0;
        loop {
            let eps = cfg.dqn.epsilon_at(step);
            let action = epsilon_greedy(&q, &state.obs, &state.legal_mask, eps, &mut explore_rng)?;
            let res = env.step(&Action::Discrete(action))?;
            let train_reward = match reward_fn {
                Some(f) => f(&state.obs, &Action::Discrete(action))?,
                None => res.reward,
            };
            ep_return += res.reward;
            replay.push(ReplayEntry {
                obs: state.obs.clone(),
                action,
                reward: train_reward,
                next_obs: res.state.obs.clone(),
                next_mask: res.state.legal_mask.clone(),
                done: res.state.done,
            });
            state = res.state;
            step += 1;

            if replay.len() >= cfg.dqn.learn_start.max(cfg.dqn.batch_size) {
                let idx = replay.sample_indices(cfg.dqn.batch_size, &mut sample_rng);
                td_accum += dqn_update(&mut q, &replay, &idx, cfg.dqn.gamma, &mut opt)?;
                td_count += 1;
            }
            if step % cfg.dqn.target_sync == 0 {
                q.sync();
            }
            if step % cfg.log_every == 0 {
                let mean_ret = if recent_returns.is_empty() {
                    f64::NAN
                } else {
                    recent_returns.iter().sum::<f64>() / recent_returns.len() as f64
                };
                if mean_ret.is_finite() {
                    curves.push(CurvePoint::new(step as u64, "episode_return", mean_ret));
                }
                if td_count > 0 {
                    curves.push(CurvePoint::new(step as u64, "td_loss", td_accum / td_count as f64));
                    td_accum = 0.0;
                    td_count = 0;
                }
            }
            if state.done || step >= cfg.train_steps {
                break;
            }
        }
        recent_returns.push(ep_return);
        if recent_returns.len() > 20 {
            recent_returns.remove(0);
        }
    }
    Ok((q, curves))
}

#[derive(Debug, Clone)]
pub struct PpoTrainConfig {
    pub ppo: PpoConfig,
    pub iterations: usize,
    pub rollout_steps: usize,
    pub hidden: Vec<usize>,
}

impl Default for PpoTrainConfig {
    fn default() -> Self {
        PpoTrainConfig {
            ppo: PpoConfig::default(),
            iterations: 150,
            rollout_steps: 2048,
            hidden: vec![64, 64],
        }
    }
}

/// Trains a PPO agent; mirrors [`train_dqn`]'s reward-override contract.
pub fn train_ppo(
    env: &mut dyn Env,
    cfg: &PpoTrainConfig,
    seed: u64,
    reward_fn: Option<RewardFn<'_>>,
) -> Result<(Policy, Network, Vec<CurvePoint>)> {
    let mut policy = Policy::new(env.obs_dim(), &cfg.hidden, &env.action_space(), seed ^ 0x51a3)?;
    let mut value = crate::nncore::init_network(
        &[&[env.obs_dim()], &cfg.hidden[..], &[1]].concat(),
        seed ^ 0x77f1,
    )?;
    let mut p_opt = AdamState::new(&policy.net, cfg.ppo.lr);
    let mut v_opt = AdamState::new(&value, cfg.ppo.lr);
    let mut env_rng = crate::rng::stream(seed, "ppo.env");
    let mut policy_rng = crate::rng::stream(seed, "ppo.sample");
    let mut update_rng = crate::rng::stream(seed, "ppo.update");
    let mut demo_rng = crate::rng::stream(seed, "ppo.demo");

    let mut curves = Vec::new();
    let mut env_steps = 0u64;
    for _iter in 0..cfg.iterations {
        let mut rollout = collect_rollout(
            env,
            &mut policy,
            &mut value,
            cfg.rollout_steps,
            &mut env_rng,
            &mut policy_rng,
        )?;
        env_steps += rollout.len() as u64;
        if let Some(f) = reward_fn {
            for t in 0..rollout.len() {
                rollout.rewards[t] = f(&rollout.obs[t], &rollout.actions[t])?;
            }
        }
        super::gae::compute_gae(&mut rollout, cfg.ppo.gamma, cfg.ppo.lambda);
        let diag = ppo_update(
            &mut policy,
            &mut p_opt,
            &mut value,
            &mut v_opt,
            &mut rollout,
            &cfg.ppo,
            None,
            &mut update_rng,
            &mut demo_rng,
        )?;
        curves.push(CurvePoint::new(env_steps, "episode_return", rollout.mean_episode_return()));
        curves.push(CurvePoint::new(env_steps, "policy_loss", diag.policy_loss));
        curves.push(CurvePoint::new(env_steps, "value_loss", diag.value_loss));
        curves.push(CurvePoint::new(env_steps, "entropy", diag.entropy));
    }
    Ok((policy, value, curves))
}

/// Mean env return of the greedy policy over `episodes` episodes.
pub fn evaluate_policy_greedy(
    env: &mut dyn Env,
    policy: &Policy,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = crate::rng::stream(seed, "eval.policy");
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut state = env.reset(rng.gen());
        loop {
            let action = policy.greedy(&state.obs, &state.legal_mask)?;
            let res = env.step(&action)?;
            total += res.reward;
            state = res.state;
            if state.done {
                break;
            }
        }
    }
    Ok(total / episodes.max(1) as f64)
}

/// Mean env return of the greedy Q-policy over `episodes` episodes.
pub fn evaluate_q_greedy(
    env: &mut dyn Env,
    q: &QFunction,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = crate::rng::stream(seed, "eval.q");
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut state = env.reset(rng.gen());
        loop {
            let action = q.greedy(&state.obs, &state.legal_mask)?;
            let res = env.step(&Action::Discrete(action))?;
            total += res.reward;
            state = res.state;
            if state.done {
                break;
            }
        }
    }
    Ok(total / episodes.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_env, EnvId};

    #[test]
    fn dqn_smoke_on_leduc() {
        let mut env = make_env(EnvId::Leduc);
        let cfg = DqnTrainConfig {
            train_steps: 400,
            dqn: DqnConfig { learn_start: 64, target_sync: 100, ..Default::default() },
            hidden: vec![16],
            log_every: 100,
        };
        let (q, curves) = train_dqn(&mut *env, &cfg, 0, None).unwrap();
        assert!(!curves.is_empty());
        let ret = evaluate_q_greedy(&mut *env, &q, 50, 1).unwrap();
        assert!(ret.is_finite());
    }

    #[test]
    fn ppo_smoke_on_pendulum() {
        let mut env = make_env(EnvId::Pendulum);
        let cfg = PpoTrainConfig {
            iterations: 2,
            rollout_steps: 200,
            hidden: vec![8],
            ..Default::default()
        };
        let (policy, _, curves) = train_ppo(&mut *env, &cfg, 0, None).unwrap();
        assert_eq!(curves.iter().filter(|c| c.metric == "episode_return").count(), 2);
        let ret = evaluate_policy_greedy(&mut *env, &policy, 3, 2).unwrap();
        assert!(ret <= 0.0);
    }

    #[test]
    fn reward_override_changes_training_signal_only() {
        let mut env = make_env(EnvId::MountainCar);
        let constant: RewardFn<'_> = &|_, _| Ok(0.5);
        let cfg = DqnTrainConfig {
            train_steps: 300,
            dqn: DqnConfig { learn_start: 32, ..Default::default() },
            hidden: vec![8],
            log_every: 100,
        };
        let (_, curves) = train_dqn(&mut *env, &cfg, 3, Some(constant)).unwrap();
        // Episode returns are still counted in env reward (-1 per step).
        for c in curves.iter().filter(|c| c.metric == "episode_return") {
            assert!(c.value <= -100.0);
        }
    }
}
