//! MountainCar with the canonical discrete dynamics.
//!
//! State is (position, velocity); actions are 0 = thrust left, 1 = no
//! thrust, 2 = thrust right. Reward is -1 per step; an episode ends when
//! the car reaches position >= 0.5 or after 200 steps.

use rand::Rng;

use super::{Action, ActionSpace, Env, EnvId, EnvState, StepResult};
use crate::error::{Error, Result};

pub const POS_MIN: f64 = -1.2;
pub const POS_MAX: f64 = 0.6;
pub const VEL_MAX: f64 = 0.07;
pub const GOAL_POS: f64 = 0.5;
pub const HORIZON: usize = 200;
pub const NUM_ACTIONS: usize = 3;

/// Min-max scales (position, velocity) to [-1, 1] per component.
pub fn encode(position: f64, velocity: f64) -> Vec<f64> {
    vec![
        2.0 * (position - POS_MIN) / (POS_MAX - POS_MIN) - 1.0,
        velocity / VEL_MAX,
    ]
}

/// One application of the transition function, exposed for reuse by tests
/// and the reward-grid sampler.
pub fn dynamics(position: f64, velocity: f64, action: usize) -> (f64, f64) {
    let mut v = velocity + (action as f64 - 1.0) * 0.001 - 0.0025 * (3.0 * position).cos();
    v = v.clamp(-VEL_MAX, VEL_MAX);
    let mut p = (position + v).clamp(POS_MIN, POS_MAX);
    if p <= POS_MIN && v < 0.0 {
        v = 0.0;
        p = POS_MIN;
    }
    (p, v)
}

#[derive(Debug, Clone)]
pub struct MountainCar {
    position: f64,
    velocity: f64,
    steps: usize,
    done: bool,
}

impl MountainCar {
    pub fn new() -> Self {
        MountainCar { position: -0.5, velocity: 0.0, steps: 0, done: true }
    }

    fn state(&self) -> EnvState {
        EnvState {
            obs: encode(self.position, self.velocity),
            done: self.done,
            legal_mask: vec![true; NUM_ACTIONS],
            current_player: None,
        }
    }
}

impl Default for MountainCar {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for MountainCar {
    fn id(&self) -> EnvId {
        EnvId::MountainCar
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete { n: NUM_ACTIONS }
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        let mut rng = crate::rng::stream(seed, "env.mountaincar");
        self.position = rng.gen_range(-0.6..-0.4);
        self.velocity = 0.0;
        self.steps = 0;
        self.done = false;
        self.state()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::state("step after episode end"));
        }
        let a = action.discrete()?;
        if a >= NUM_ACTIONS {
            return Err(Error::config(format!("action {a} out of range 0..{NUM_ACTIONS}")));
        }
        let (p, v) = dynamics(self.position, self.velocity, a);
        self.position = p;
        self.velocity = v;
        self.steps += 1;
        self.done = p >= GOAL_POS || self.steps >= HORIZON;
        Ok(StepResult { state: self.state(), reward: -1.0 })
    }

    fn max_episode_steps(&self) -> usize {
        HORIZON
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dynamics_matches_formula() {
        // From rest at p = -0.5 with no thrust, only gravity acts.
        let (_, v) = dynamics(-0.5, 0.0, 1);
        let expected = -0.0025 * (-1.5f64).cos();
        assert!((v - expected).abs() < 1e-15, "v {v} vs {expected}");
        assert!((v + 1.768e-4).abs() < 1e-6);
    }

    #[test]
    fn reaching_goal_terminates_with_negative_return() {
        let mut env = MountainCar::new();
        env.reset(0);
        // Drive the dynamics directly from a state next to the goal.
        env.position = 0.45;
        env.velocity = VEL_MAX;
        let mut ret = 0.0;
        let mut steps = 0;
        loop {
            let r = env.step(&Action::Discrete(2)).unwrap();
            ret += r.reward;
            steps += 1;
            if r.state.done {
                break;
            }
        }
        assert!(env.position >= GOAL_POS);
        assert_eq!(ret, -(steps as f64));
    }

    #[test]
    fn coasting_never_escapes_the_valley() {
        let mut env = MountainCar::new();
        env.reset(3);
        env.position = -0.5;
        env.velocity = 0.0;
        for _ in 0..HORIZON {
            let r = env.step(&Action::Discrete(1)).unwrap();
            if r.state.done {
                assert!(env.position < GOAL_POS, "no-thrust policy must time out");
                return;
            }
        }
        panic!("episode must end at the horizon");
    }

    #[test]
    fn encode_hits_endpoints() {
        assert_eq!(encode(POS_MIN, -VEL_MAX), vec![-1.0, -1.0]);
        assert_eq!(encode(POS_MAX, VEL_MAX), vec![1.0, 1.0]);
    }

    #[test]
    fn step_after_done_is_state_error() {
        let mut env = MountainCar::new();
        env.reset(0);
        env.done = true;
        assert!(matches!(env.step(&Action::Discrete(1)), Err(Error::State(_))));
    }

    #[test]
    fn state_stays_in_bounds() {
        let mut env = MountainCar::new();
        let mut rng = crate::rng::stream(9, "test");
        env.reset(9);
        for _ in 0..HORIZON {
            let a = rng.gen_range(0..NUM_ACTIONS);
            let r = env.step(&Action::Discrete(a)).unwrap();
            assert!(env.position >= POS_MIN && env.position <= POS_MAX);
            assert!(env.velocity.abs() <= VEL_MAX);
            if r.state.done {
                break;
            }
        }
    }
}
