//! AIRL and Hybrid-AIRL: discriminator/policy losses, batch-decaying
//! stochastic regularization, and the alternating reward-inference loop.
//!
//! The discriminator is `D(s,a) = exp(f(s,a)) / (exp(f(s,a)) + pi(a|s))`,
//! evaluated in log-space as `sigmoid(f - log pi)`. Its reward head `f` is
//! the learned reward function. The hybrid variant blends a supervised
//! imitation term (weight `alpha`) into the policy objective and a
//! squared-error term against ground-truth rewards (weight `beta`) into
//! the discriminator objective, and feeds the discriminator perturbed
//! policy actions whose noise scale decays along the mini-batch.

mod losses;
mod noise;
mod trainer;

pub use losses::{
    airl_policy_loss, disc_adversarial_loss, disc_output, disc_supervised_loss, disc_update,
    hybrid_disc_loss, hybrid_policy_loss, supervised_policy_loss, DiscBatch, LossPath,
};
pub use noise::{noise_sigmas, perturb_actions, SrConfig, SrShape};
pub use trainer::{irl_train, IrlAlgo, IrlOutput};

use crate::envs::{Action, ActionSpace};
use crate::error::{Error, Result};
use crate::nncore::Network;

/// Reward network `f(s, a)`: a scalar head over the concatenated
/// observation and action encoding (one-hot for discrete actions, raw
/// clipped values for continuous ones).
#[derive(Debug, Clone)]
pub struct Discriminator {
    pub net: Network,
    pub space: ActionSpace,
}

impl Discriminator {
    pub fn new(obs_dim: usize, hidden: &[usize], space: &ActionSpace, seed: u64) -> Result<Self> {
        let mut sizes = vec![obs_dim + space.encoding_dim()];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Ok(Discriminator { net: crate::nncore::init_network(&sizes, seed)?, space: space.clone() })
    }

    /// Discriminator input encoding of an action.
    pub fn encode_action(&self, action: &Action) -> Result<Vec<f64>> {
        match (&self.space, action) {
            (ActionSpace::Discrete { n }, Action::Discrete(a)) => {
                if *a >= *n {
                    return Err(Error::config(format!("action {a} out of range 0..{n}")));
                }
                let mut enc = vec![0.0; *n];
                enc[*a] = 1.0;
                Ok(enc)
            }
            (ActionSpace::Continuous { low, high }, Action::Continuous(a)) => {
                if a.len() != low.len() {
                    return Err(Error::shape(low.len(), a.len(), "continuous action"));
                }
                Ok(a.iter()
                    .zip(low.iter().zip(high))
                    .map(|(x, (l, h))| x.clamp(*l, *h))
                    .collect())
            }
            _ => Err(Error::config("action kind does not match the discriminator space")),
        }
    }

    fn input(&self, obs: &[f64], act_enc: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(obs.len() + act_enc.len());
        x.extend_from_slice(obs);
        x.extend_from_slice(act_enc);
        x
    }

    /// `f(s, a)` with the forward tape recorded (training path).
    pub fn f_value(&mut self, obs: &[f64], act_enc: &[f64]) -> Result<f64> {
        let x = self.input(obs, act_enc);
        Ok(self.net.forward(&x)?[0])
    }

    /// The learned reward used in the RL phase: `f(s, a)` alone, with no
    /// entropy correction.
    pub fn reward(&self, obs: &[f64], action: &Action) -> Result<f64> {
        let enc = self.encode_action(action)?;
        let x = self.input(obs, &enc);
        Ok(self.net.apply(&x)?[0])
    }
}

/// The four Hybrid-AIRL weights plus loop sizing; fully determines a run
/// together with the seed.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct HybridConfig {
    /// Policy supervision weight.
    pub alpha: f64,
    /// Discriminator supervision weight (requires demos with env rewards).
    pub beta: f64,
    /// Noise std applied to the first element of each discriminator batch.
    pub sigma_start: f64,
    /// Noise std applied to the last element (residual noise floor).
    pub sigma_end: f64,
    /// Decay shape of the per-batch noise schedule.
    pub sr_shape: SrShape,
    pub gamma: f64,
    pub iterations: usize,
    pub rollout_steps: usize,
    /// Discriminator passes over the freshly collected policy batch per
    /// iteration.
    pub disc_epochs: usize,
    pub disc_minibatch: usize,
    pub disc_lr: f64,
    /// PPO learner settings for the policy step.
    pub ppo: PpoSettings,
    /// Standardize the learned reward by its running statistics (off by
    /// default; the raw surrogate is the faithful signal).
    pub reward_standardize: bool,
    /// Drop fold actions from demonstration batches, mimicking datasets in
    /// which folded hands are unobservable.
    pub strip_folds: bool,
    /// Iterations between alignment probes.
    pub log_every: usize,
    /// Hidden layer sizes shared by the policy, value, and reward nets.
    pub hidden: Vec<usize>,
}

/// Serializable mirror of [`crate::agents::PpoConfig`].
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PpoSettings {
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub entropy_coef: f64,
}

impl Default for PpoSettings {
    fn default() -> Self {
        let d = crate::agents::PpoConfig::default();
        PpoSettings {
            lambda: d.lambda,
            clip: d.clip,
            epochs: d.epochs,
            minibatch: d.minibatch,
            lr: d.lr,
            entropy_coef: d.entropy_coef,
        }
    }
}

impl PpoSettings {
    pub fn to_config(&self, gamma: f64) -> crate::agents::PpoConfig {
        crate::agents::PpoConfig {
            gamma,
            lambda: self.lambda,
            clip: self.clip,
            epochs: self.epochs,
            minibatch: self.minibatch,
            lr: self.lr,
            entropy_coef: self.entropy_coef,
        }
    }
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            alpha: 0.1,
            beta: 0.25,
            sigma_start: 0.9,
            sigma_end: 0.08,
            sr_shape: SrShape::Linear,
            gamma: 0.99,
            iterations: 120,
            rollout_steps: 2048,
            disc_epochs: 1,
            disc_minibatch: 256,
            disc_lr: 1e-4,
            ppo: PpoSettings::default(),
            reward_standardize: false,
            strip_folds: false,
            log_every: 5,
            hidden: vec![64, 64],
        }
    }
}

impl HybridConfig {
    /// Checks every field, reporting all violations together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("sigma_start", self.sigma_start),
            ("sigma_end", self.sigma_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                problems.push(format!("{name} must be in [0,1], got {v}"));
            }
        }
        if self.sigma_end > self.sigma_start {
            problems.push(format!(
                "sigma_end ({}) must not exceed sigma_start ({})",
                self.sigma_end, self.sigma_start
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            problems.push(format!("gamma must be in [0,1], got {}", self.gamma));
        }
        if self.iterations == 0 {
            problems.push("iterations must be positive".into());
        }
        if self.rollout_steps == 0 {
            problems.push("rollout_steps must be positive".into());
        }
        if self.disc_minibatch == 0 {
            problems.push("disc_minibatch must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn sr_active(&self) -> bool {
        self.sigma_start > 0.0
    }

    pub fn sr(&self) -> SrConfig {
        SrConfig {
            sigma_start: self.sigma_start,
            sigma_end: self.sigma_end,
            shape: self.sr_shape,
        }
    }
}

/// A sampled batch of expert state-action pairs (with env rewards when the
/// supervised discriminator path is enabled).
#[derive(Debug, Clone, Default)]
pub struct DemoBatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub masks: Vec<Vec<bool>>,
    pub r_env: Option<Vec<f64>>,
}

impl DemoBatch {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_action_encoding_is_one_hot() {
        let disc = Discriminator::new(2, &[4], &ActionSpace::Discrete { n: 3 }, 0).unwrap();
        assert_eq!(disc.encode_action(&Action::Discrete(2)).unwrap(), vec![0.0, 0.0, 1.0]);
        assert!(disc.encode_action(&Action::Discrete(3)).is_err());
    }

    #[test]
    fn continuous_action_encoding_clips() {
        let space = ActionSpace::Continuous { low: vec![-2.0], high: vec![2.0] };
        let disc = Discriminator::new(3, &[4], &space, 0).unwrap();
        assert_eq!(disc.encode_action(&Action::Continuous(vec![5.0])).unwrap(), vec![2.0]);
    }

    #[test]
    fn config_violations_are_aggregated() {
        let cfg = HybridConfig {
            alpha: 2.0,
            beta: -0.5,
            sigma_start: 0.1,
            sigma_end: 0.9,
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("alpha"));
        assert!(err.contains("beta"));
        assert!(err.contains("sigma_end"));
    }

    #[test]
    fn default_config_is_valid() {
        HybridConfig::default().validate().unwrap();
    }
}
