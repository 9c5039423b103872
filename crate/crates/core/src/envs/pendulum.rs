//! Pendulum swing-up with the canonical physics (g = 10, m = 1, l = 1,
//! dt = 0.05). Torque is a single continuous action clamped to [-2, 2];
//! reward is -(theta^2 + 0.1 * thetadot^2 + 0.001 * torque^2) with the
//! angle normalized to (-pi, pi]. Fixed 200-step horizon.

use rand::Rng;

use super::{Action, ActionSpace, Env, EnvId, EnvState, StepResult};
use crate::error::{Error, Result};

pub const MAX_TORQUE: f64 = 2.0;
pub const MAX_SPEED: f64 = 8.0;
pub const DT: f64 = 0.05;
pub const GRAVITY: f64 = 10.0;
pub const HORIZON: usize = 200;

fn angle_normalize(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let wrapped = (theta + std::f64::consts::PI).rem_euclid(two_pi);
    wrapped - std::f64::consts::PI
}

/// Encodes raw (theta, thetadot) as [cos(theta), sin(theta), thetadot / 8].
pub fn encode(theta: f64, thetadot: f64) -> Vec<f64> {
    vec![theta.cos(), theta.sin(), thetadot / MAX_SPEED]
}

#[derive(Debug, Clone)]
pub struct Pendulum {
    theta: f64,
    thetadot: f64,
    steps: usize,
    done: bool,
}

impl Pendulum {
    pub fn new() -> Self {
        Pendulum { theta: 0.0, thetadot: 0.0, steps: 0, done: true }
    }

    fn state(&self) -> EnvState {
        EnvState {
            obs: encode(self.theta, self.thetadot),
            done: self.done,
            legal_mask: Vec::new(),
            current_player: None,
        }
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for Pendulum {
    fn id(&self) -> EnvId {
        EnvId::Pendulum
    }

    fn obs_dim(&self) -> usize {
        3
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous { low: vec![-MAX_TORQUE], high: vec![MAX_TORQUE] }
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        let mut rng = crate::rng::stream(seed, "env.pendulum");
        self.theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        self.thetadot = rng.gen_range(-1.0..1.0);
        self.steps = 0;
        self.done = false;
        self.state()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::state("step after episode end"));
        }
        let torque = action.continuous()?;
        if torque.len() != 1 {
            return Err(Error::shape(1, torque.len(), "pendulum torque"));
        }
        let u = torque[0].clamp(-MAX_TORQUE, MAX_TORQUE);
        let th = angle_normalize(self.theta);
        let cost = th * th + 0.1 * self.thetadot * self.thetadot + 0.001 * u * u;

        let new_thetadot = (self.thetadot
            + (3.0 * GRAVITY / 2.0 * self.theta.sin() + 3.0 * u) * DT)
            .clamp(-MAX_SPEED, MAX_SPEED);
        self.theta += new_thetadot * DT;
        self.thetadot = new_thetadot;
        self.steps += 1;
        self.done = self.steps >= HORIZON;
        Ok(StepResult { state: self.state(), reward: -cost })
    }

    fn max_episode_steps(&self) -> usize {
        HORIZON
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upright_rest_is_a_fixed_point() {
        let mut env = Pendulum::new();
        env.reset(0);
        env.theta = 0.0;
        env.thetadot = 0.0;
        let r = env.step(&Action::Continuous(vec![0.0])).unwrap();
        assert_eq!(r.reward, 0.0);
        assert_eq!(env.theta, 0.0);
        assert_eq!(env.thetadot, 0.0);
    }

    #[test]
    fn hanging_down_costs_pi_squared() {
        let mut env = Pendulum::new();
        env.reset(0);
        env.theta = std::f64::consts::PI;
        env.thetadot = 0.0;
        let r = env.step(&Action::Continuous(vec![0.0])).unwrap();
        let expected = -std::f64::consts::PI * std::f64::consts::PI;
        assert!((r.reward - expected).abs() < 1e-12);
    }

    #[test]
    fn random_rollout_return_is_bounded() {
        let mut env = Pendulum::new();
        let mut rng = crate::rng::stream(4, "test");
        for ep in 0..5 {
            env.reset(ep);
            let mut ret = 0.0;
            loop {
                let u = rng.gen_range(-MAX_TORQUE..MAX_TORQUE);
                let r = env.step(&Action::Continuous(vec![u])).unwrap();
                ret += r.reward;
                if r.state.done {
                    break;
                }
            }
            assert!((-2000.0..=0.0).contains(&ret), "return {ret} out of bounds");
        }
    }

    #[test]
    fn encoding_at_zero_angle() {
        let obs = encode(0.0, 0.0);
        assert_eq!(obs, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn torque_is_clamped_not_rejected() {
        let mut env = Pendulum::new();
        env.reset(1);
        assert!(env.step(&Action::Continuous(vec![100.0])).is_ok());
    }

    #[test]
    fn speed_stays_clamped() {
        let mut env = Pendulum::new();
        env.reset(2);
        for _ in 0..HORIZON {
            let r = env.step(&Action::Continuous(vec![MAX_TORQUE])).unwrap();
            assert!(env.thetadot.abs() <= MAX_SPEED);
            if r.state.done {
                break;
            }
        }
    }
}
