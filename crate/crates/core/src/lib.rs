//! AIRL and Hybrid-AIRL inverse reinforcement learning, self-contained.
//!
//! The crate is organized around the training pipeline:
//!
//! - [`nncore`]: double-precision MLPs with reverse-mode gradients and Adam;
//! - [`envs`]: MountainCar, Pendulum, and Leduc Hold'em behind one episodic
//!   contract;
//! - [`agents`]: stochastic policies, PPO, and DQN learners;
//! - [`irl`]: the AIRL and Hybrid-AIRL losses, batch-decaying stochastic
//!   regularization, and the alternating reward-inference loop;
//! - [`expert`]: expert training, demonstration recording, and the
//!   `demos.jsonl` on-disk format;
//! - [`eval`]: action alignment, curve aggregation, mirrored-deal poker
//!   tournaments (mbb/h), and reward argmax grids;
//! - [`config`]: the TOML experiment configuration shared with the CLI.

pub mod agents;
pub mod config;
pub mod envs;
pub mod error;
pub mod eval;
pub mod expert;
pub mod irl;
pub mod logging;
pub mod nncore;
pub mod rng;

pub use error::{Error, Result};
