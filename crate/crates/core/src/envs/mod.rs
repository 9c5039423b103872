//! Built-in environments with a uniform episodic contract.
//!
//! Three environments cover the mechanism space: MountainCar (discrete,
//! dense step penalty), Pendulum (continuous torque), and Leduc Hold'em
//! (two-player, imperfect information, sparse terminal payoff).
//!
//! Observations handed to agents are always the *encoded* vectors described
//! in each env module; raw state stays internal.

pub mod leduc;
pub mod mountain_car;
pub mod pendulum;

pub use leduc::LeducEnv;
pub use mountain_car::MountainCar;
pub use pendulum::Pendulum;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// String-addressable environment identifiers (CLI `env` field).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvId {
    MountainCar,
    Pendulum,
    Leduc,
}

impl FromStr for EnvId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mountaincar" => Ok(EnvId::MountainCar),
            "pendulum" => Ok(EnvId::Pendulum),
            "leduc" => Ok(EnvId::Leduc),
            other => Err(Error::config(format!(
                "unknown env '{other}' (expected mountaincar, pendulum, or leduc)"
            ))),
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EnvId::MountainCar => "mountaincar",
            EnvId::Pendulum => "pendulum",
            EnvId::Leduc => "leduc",
        };
        f.write_str(s)
    }
}

/// An agent-issued action.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    pub fn discrete(&self) -> Result<usize> {
        match self {
            Action::Discrete(a) => Ok(*a),
            Action::Continuous(_) => Err(Error::config("expected a discrete action")),
        }
    }

    pub fn continuous(&self) -> Result<&[f64]> {
        match self {
            Action::Continuous(a) => Ok(a),
            Action::Discrete(_) => Err(Error::config("expected a continuous action")),
        }
    }
}

/// Action-space descriptor shared by agents, losses, and persisted demos.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ActionSpace {
    Discrete { n: usize },
    Continuous { low: Vec<f64>, high: Vec<f64> },
}

impl ActionSpace {
    /// Dimension of the action encoding fed to reward networks:
    /// one-hot width for discrete spaces, raw dimension for continuous.
    pub fn encoding_dim(&self) -> usize {
        match self {
            ActionSpace::Discrete { n } => *n,
            ActionSpace::Continuous { low, .. } => low.len(),
        }
    }

    /// Per-dimension half-range of a continuous space.
    pub fn half_ranges(&self) -> Vec<f64> {
        match self {
            ActionSpace::Discrete { .. } => Vec::new(),
            ActionSpace::Continuous { low, high } => {
                low.iter().zip(high).map(|(l, h)| (h - l) / 2.0).collect()
            }
        }
    }
}

/// Snapshot visible to the agent: encoded observation, termination flag,
/// legal-action mask (discrete envs), and current player (poker only).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub obs: Vec<f64>,
    pub done: bool,
    pub legal_mask: Vec<bool>,
    pub current_player: Option<usize>,
}

/// Result of one env step: the successor state plus the env reward.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: EnvState,
    pub reward: f64,
}

/// Uniform episodic contract. Instances are single-owner; determinism is
/// per-instance given the reset seed.
pub trait Env {
    fn id(&self) -> EnvId;
    fn obs_dim(&self) -> usize;
    fn action_space(&self) -> ActionSpace;
    /// Starts a new episode; fully determined by `seed`.
    fn reset(&mut self, seed: u64) -> EnvState;
    /// Advances the episode. Errors on illegal actions and on stepping a
    /// finished episode; illegal actions are never remapped.
    fn step(&mut self, action: &Action) -> Result<StepResult>;
    /// Steps per episode upper bound (used to size rollout buffers).
    fn max_episode_steps(&self) -> usize;
    /// Selects the agent seat for subsequent episodes (two-player envs
    /// only; a no-op elsewhere).
    fn set_agent_seat(&mut self, _seat: usize) {}
}

/// Builds the environment for `id` with library defaults.
pub fn make_env(id: EnvId) -> Box<dyn Env> {
    match id {
        EnvId::MountainCar => Box::new(MountainCar::new()),
        EnvId::Pendulum => Box::new(Pendulum::new()),
        EnvId::Leduc => Box::new(LeducEnv::new()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_ids_round_trip() {
        for id in [EnvId::MountainCar, EnvId::Pendulum, EnvId::Leduc] {
            assert_eq!(id.to_string().parse::<EnvId>().unwrap(), id);
        }
        assert!("hulhe".parse::<EnvId>().is_err());
    }

    #[test]
    fn deterministic_reset_across_envs() {
        for id in [EnvId::MountainCar, EnvId::Pendulum, EnvId::Leduc] {
            let mut a = make_env(id);
            let mut b = make_env(id);
            assert_eq!(a.reset(123), b.reset(123));
        }
    }
}
