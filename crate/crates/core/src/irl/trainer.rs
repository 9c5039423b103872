//! The alternating reward-inference loop: collect rollouts under the
//! current policy, update the discriminator to separate expert pairs from
//! (perturbed) policy pairs, then update the policy with PPO on the
//! entropy-regularized learned reward `f(s,a) - log pi(a|s)`.
//!
//! The `Airl` code path is the plain baseline; `Hairl` adds the
//! alpha-weighted supervised policy term, the beta-weighted supervised
//! reward term, and stochastic regularization. With all three gated off
//! and shared seeds the two paths produce identical iterates.

use rand::seq::SliceRandom;
use rand::Rng;

use super::losses::{disc_update, DiscBatch, LossPath};
use super::noise::{noise_sigmas, perturb_actions};
use super::{DemoBatch, Discriminator, HybridConfig};
use crate::agents::{collect_rollout, compute_gae, ppo_update, Policy, SupervisedBatch};
use crate::envs::{Action, ActionSpace, Env};
use crate::error::{Error, Result};
use crate::expert::DemoSet;
use crate::logging::CurvePoint;
use crate::nncore::{AdamState, Network};

/// Which loss family the run optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IrlAlgo {
    Airl,
    Hairl,
}

impl std::str::FromStr for IrlAlgo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "airl" => Ok(IrlAlgo::Airl),
            "hairl" => Ok(IrlAlgo::Hairl),
            other => Err(Error::config(format!("unknown algo '{other}' (expected airl or hairl)"))),
        }
    }
}

impl std::fmt::Display for IrlAlgo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IrlAlgo::Airl => "airl",
            IrlAlgo::Hairl => "hairl",
        })
    }
}

/// Final artifacts of one reward-inference run.
#[derive(Debug, Clone)]
pub struct IrlOutput {
    pub policy: Policy,
    pub value: Network,
    pub discriminator: Discriminator,
    pub curves: Vec<CurvePoint>,
}

/// Flattened demonstration arrays the loop samples from.
struct DemoArrays {
    obs: Vec<Vec<f64>>,
    actions: Vec<Action>,
    masks: Vec<Vec<bool>>,
    r_env: Option<Vec<f64>>,
}

impl DemoArrays {
    fn build(demos: &DemoSet, strip_folds: bool, need_rewards: bool) -> Result<DemoArrays> {
        let steps = demos.flat_steps(strip_folds);
        if steps.is_empty() {
            return Err(Error::config("demo set is empty after filtering"));
        }
        let r_env = if need_rewards {
            let mut rs = Vec::with_capacity(steps.len());
            for s in &steps {
                rs.push(s.r_env.ok_or_else(|| {
                    Error::config(
                        "beta > 0 requires demos carrying env rewards; these demos lack them",
                    )
                })?);
            }
            Some(rs)
        } else {
            None
        };
        Ok(DemoArrays {
            obs: steps.iter().map(|s| s.obs.clone()).collect(),
            actions: steps.iter().map(|s| s.action.clone()).collect(),
            masks: steps.iter().map(|s| s.mask.clone()).collect(),
            r_env,
        })
    }

    fn len(&self) -> usize {
        self.obs.len()
    }

    fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DemoBatch {
        let mut batch = DemoBatch::default();
        let mut rs = self.r_env.as_ref().map(|_| Vec::with_capacity(n));
        for _ in 0..n {
            let i = rng.gen_range(0..self.len());
            batch.obs.push(self.obs[i].clone());
            batch.actions.push(self.actions[i].clone());
            batch.masks.push(self.masks[i].clone());
            if let (Some(rs), Some(all)) = (rs.as_mut(), self.r_env.as_ref()) {
                rs.push(all[i]);
            }
        }
        batch.r_env = rs;
        batch
    }
}

/// Running standardizer for the learned reward (optional knob).
#[derive(Debug, Default)]
struct RewardNormalizer {
    count: f64,
    mean: f64,
    m2: f64,
}

impl RewardNormalizer {
    fn update(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn normalize(&self, x: f64) -> f64 {
        if self.count < 2.0 {
            return x;
        }
        let std = (self.m2 / self.count).sqrt().max(1e-8);
        (x - self.mean) / std
    }
}

/// Runs `cfg.iterations` of alternating discriminator / policy updates and
/// returns the final policy, reward net, and per-iteration metric curves
/// (`disc_loss`, `policy_loss`, `env_return`, `reward_mean`, and
/// `alignment` for discrete envs at the probe cadence).
pub fn irl_train(
    algo: IrlAlgo,
    cfg: &HybridConfig,
    env: &mut dyn Env,
    demos: &DemoSet,
    seed: u64,
) -> Result<IrlOutput> {
    cfg.validate()?;
    if demos.is_empty() {
        return Err(Error::config("demo set is empty"));
    }
    if demos.obs_dim != env.obs_dim() {
        return Err(Error::config(format!(
            "demo observation dim {} does not match env {} ({})",
            demos.obs_dim,
            env.obs_dim(),
            env.id()
        )));
    }
    if demos.action_space != env.action_space() {
        return Err(Error::config("demo action space does not match the env"));
    }
    let beta = match algo {
        IrlAlgo::Airl => 0.0,
        IrlAlgo::Hairl => cfg.beta,
    };
    let alpha = match algo {
        IrlAlgo::Airl => 0.0,
        IrlAlgo::Hairl => cfg.alpha,
    };
    let sr_active = algo == IrlAlgo::Hairl && cfg.sr_active();
    let demo_arrays = DemoArrays::build(demos, cfg.strip_folds, beta > 0.0)?;

    let space = env.action_space();
    let mut policy = Policy::new(env.obs_dim(), &cfg.hidden, &space, seed ^ 0x11)?;
    let mut value = crate::nncore::init_network(
        &[&[env.obs_dim()], &cfg.hidden[..], &[1]].concat(),
        seed ^ 0x22,
    )?;
    let mut disc = Discriminator::new(env.obs_dim(), &cfg.hidden, &space, seed ^ 0x33)?;

    let ppo_cfg = cfg.ppo.to_config(cfg.gamma);
    let mut p_opt = AdamState::new(&policy.net, ppo_cfg.lr);
    let mut v_opt = AdamState::new(&value, ppo_cfg.lr);
    let mut d_opt = AdamState::new(&disc.net, cfg.disc_lr);

    let mut env_rng = crate::rng::stream(seed, "irl.env");
    let mut policy_rng = crate::rng::stream(seed, "irl.sample");
    let mut update_rng = crate::rng::stream(seed, "irl.ppo");
    let mut ppo_demo_rng = crate::rng::stream(seed, "irl.ppo.demo");
    let mut disc_shuffle_rng = crate::rng::stream(seed, "irl.disc.shuffle");
    let mut disc_demo_rng = crate::rng::stream(seed, "irl.disc.demo");
    let mut sr_rng = crate::rng::stream(seed, "irl.sr");

    let discrete = matches!(space, ActionSpace::Discrete { .. });
    let mut normalizer = RewardNormalizer::default();
    let mut curves = Vec::new();

    for iter in 0..cfg.iterations {
        let mut rollout = collect_rollout(
            env,
            &mut policy,
            &mut value,
            cfg.rollout_steps,
            &mut env_rng,
            &mut policy_rng,
        )?;

        // Discriminator phase on the fresh policy batch.
        let mut pbatch = DiscBatch {
            obs: rollout.obs.clone(),
            act_enc: Vec::with_capacity(rollout.len()),
            logpi: rollout.log_probs.clone(),
            masks: rollout.masks.clone(),
        };
        for a in &rollout.actions {
            pbatch.act_enc.push(disc.encode_action(a)?);
        }
        let mut disc_loss_sum = 0.0;
        let mut disc_loss_count = 0usize;
        let mut indices: Vec<usize> = (0..pbatch.len()).collect();
        for _ in 0..cfg.disc_epochs {
            indices.shuffle(&mut disc_shuffle_rng);
            for chunk in indices.chunks(cfg.disc_minibatch) {
                let mut policy_mb = pbatch.select(chunk);
                if sr_active {
                    let sigmas = noise_sigmas(
                        policy_mb.len(),
                        cfg.sigma_start,
                        cfg.sigma_end,
                        cfg.sr_shape,
                    )?;
                    policy_mb = perturb_actions(&policy_mb, &sigmas, &space, &mut sr_rng)?;
                }
                let expert_mb = demo_arrays.sample(chunk.len(), &mut disc_demo_rng);
                let path = match algo {
                    IrlAlgo::Airl => LossPath::Airl,
                    IrlAlgo::Hairl => LossPath::Hybrid { beta },
                };
                disc_loss_sum +=
                    disc_update(&mut disc, &mut d_opt, &mut policy, &expert_mb, &policy_mb, path)?;
                disc_loss_count += 1;
            }
        }

        // Policy phase: entropy-regularized learned reward.
        let mut reward_sum = 0.0;
        for t in 0..rollout.len() {
            let f = disc.reward(&rollout.obs[t], &rollout.actions[t])?;
            let mut r = f - rollout.log_probs[t];
            if cfg.reward_standardize {
                normalizer.update(r);
                r = normalizer.normalize(r);
            }
            reward_sum += r;
            rollout.rewards[t] = r;
        }
        compute_gae(&mut rollout, cfg.gamma, ppo_cfg.lambda);
        let sup_holder;
        let sup = if algo == IrlAlgo::Hairl && alpha > 0.0 {
            sup_holder = SupervisedBatch {
                obs: &demo_arrays.obs,
                actions: &demo_arrays.actions,
                masks: &demo_arrays.masks,
                alpha,
            };
            Some(&sup_holder)
        } else {
            None
        };
        let diag = ppo_update(
            &mut policy,
            &mut p_opt,
            &mut value,
            &mut v_opt,
            &mut rollout,
            &ppo_cfg,
            sup,
            &mut update_rng,
            &mut ppo_demo_rng,
        )
        .map_err(|e| match e {
            Error::Numerical(msg) => {
                Error::Numerical(format!("iteration {iter}: {msg} (algo {algo}, seed {seed})"))
            }
            other => other,
        })?;

        let it = iter as u64;
        curves.push(CurvePoint::new(it, "disc_loss", disc_loss_sum / disc_loss_count.max(1) as f64));
        curves.push(CurvePoint::new(it, "policy_loss", diag.policy_loss));
        curves.push(CurvePoint::new(it, "env_return", rollout.mean_episode_return()));
        curves.push(CurvePoint::new(it, "reward_mean", reward_sum / rollout.len() as f64));
        if discrete && (iter % cfg.log_every.max(1) == 0 || iter + 1 == cfg.iterations) {
            let alignment = crate::eval::action_alignment(&policy, demos)?;
            curves.push(CurvePoint::new(it, "alignment", alignment));
        }
    }

    Ok(IrlOutput { policy, value, discriminator: disc, curves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_env, EnvId};
    use crate::expert::{DemoStep, Trajectory};

    fn synthetic_mc_demos(n_traj: usize) -> DemoSet {
        // A hand-scripted "expert": thrust along the velocity sign, which is
        // the classic energy-pumping policy for MountainCar.
        let mut env = make_env(EnvId::MountainCar);
        let mut trajectories = Vec::new();
        let mut total = 0.0;
        for i in 0..n_traj {
            let mut state = env.reset(i as u64);
            let mut steps = Vec::new();
            loop {
                let v = state.obs[1];
                let a = if v >= 0.0 { 2 } else { 0 };
                let res = env.step(&Action::Discrete(a)).unwrap();
                steps.push(DemoStep {
                    obs: state.obs.clone(),
                    action: Action::Discrete(a),
                    r_env: Some(res.reward),
                    done: res.state.done,
                    mask: state.legal_mask.clone(),
                });
                total += res.reward;
                state = res.state;
                if state.done {
                    break;
                }
            }
            trajectories.push(Trajectory { seed: i as u64, steps });
        }
        DemoSet {
            env: EnvId::MountainCar,
            obs_dim: 2,
            action_space: ActionSpace::Discrete { n: 3 },
            trajectories,
            mean_return: total / n_traj as f64,
            seeds: vec![0],
        }
    }

    fn tiny_cfg() -> HybridConfig {
        HybridConfig {
            iterations: 3,
            rollout_steps: 220,
            disc_minibatch: 64,
            hidden: vec![16],
            log_every: 1,
            ..Default::default()
        }
    }

    #[test]
    fn hybrid_run_produces_curves_and_artifacts() {
        let mut env = make_env(EnvId::MountainCar);
        let demos = synthetic_mc_demos(3);
        let out = irl_train(IrlAlgo::Hairl, &tiny_cfg(), &mut *env, &demos, 0).unwrap();
        assert_eq!(
            out.curves.iter().filter(|c| c.metric == "disc_loss").count(),
            3
        );
        assert!(out.curves.iter().any(|c| c.metric == "alignment"));
        assert_eq!(out.discriminator.net.input_dim(), 5);
    }

    #[test]
    fn gated_hybrid_matches_airl_exactly() {
        let mut env_a = make_env(EnvId::MountainCar);
        let mut env_b = make_env(EnvId::MountainCar);
        let demos = synthetic_mc_demos(3);
        let cfg_zero = HybridConfig {
            alpha: 0.0,
            beta: 0.0,
            sigma_start: 0.0,
            sigma_end: 0.0,
            ..tiny_cfg()
        };
        let airl = irl_train(IrlAlgo::Airl, &cfg_zero, &mut *env_a, &demos, 7).unwrap();
        let hairl = irl_train(IrlAlgo::Hairl, &cfg_zero, &mut *env_b, &demos, 7).unwrap();
        assert_eq!(airl.curves.len(), hairl.curves.len());
        for (a, b) in airl.curves.iter().zip(&hairl.curves) {
            assert_eq!(a.metric, b.metric);
            assert!(
                (a.value - b.value).abs() <= 1e-10,
                "{} at {}: {} vs {}",
                a.metric,
                a.step,
                a.value,
                b.value
            );
        }
        assert_eq!(airl.policy.net.to_flat(), hairl.policy.net.to_flat());
        assert_eq!(airl.discriminator.net.to_flat(), hairl.discriminator.net.to_flat());
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let mut env = make_env(EnvId::Pendulum);
        let demos = synthetic_mc_demos(1);
        assert!(matches!(
            irl_train(IrlAlgo::Hairl, &tiny_cfg(), &mut *env, &demos, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn beta_without_rewards_is_config_error() {
        let mut env = make_env(EnvId::MountainCar);
        let mut demos = synthetic_mc_demos(2);
        for t in &mut demos.trajectories {
            for s in &mut t.steps {
                s.r_env = None;
            }
        }
        let cfg = HybridConfig { beta: 0.5, ..tiny_cfg() };
        let err = irl_train(IrlAlgo::Hairl, &cfg, &mut *env, &demos, 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        // The same demos are fine for the baseline.
        irl_train(IrlAlgo::Airl, &cfg, &mut *env, &demos, 0).unwrap();
    }

    #[test]
    fn behavior_cloning_mode_drives_supervised_loss_down() {
        let mut env = make_env(EnvId::MountainCar);
        let demos = synthetic_mc_demos(4);
        let cfg = HybridConfig {
            alpha: 1.0,
            beta: 0.0,
            sigma_start: 0.0,
            sigma_end: 0.0,
            iterations: 12,
            rollout_steps: 220,
            disc_minibatch: 64,
            hidden: vec![16],
            log_every: 4,
            ..Default::default()
        };
        let out = irl_train(IrlAlgo::Hairl, &cfg, &mut *env, &demos, 3).unwrap();
        let align: Vec<f64> = out
            .curves
            .iter()
            .filter(|c| c.metric == "alignment")
            .map(|c| c.value)
            .collect();
        assert!(
            align.last().unwrap() > align.first().unwrap(),
            "alignment should improve under pure supervision: {align:?}"
        );
    }
}
