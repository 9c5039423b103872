//! Experiment configuration: a TOML file with sections mirroring the
//! library modules, plus dotted-path `--set key=value` overrides. Every
//! pipeline stage writes the fully resolved config next to its artifacts,
//! and rerunning from that snapshot reproduces the outputs byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::EnvId;
use crate::error::{Error, Result};
use crate::expert::ExpertAlgo;
use crate::irl::{HybridConfig, IrlAlgo};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSection {
    pub env: EnvId,
    pub algo: IrlAlgo,
    pub seeds: Vec<u64>,
    pub out: String,
    /// Read demos from `<demos_dir>/<seed>/demos.jsonl` instead of this
    /// experiment's own demos stage, so multiple experiments can share one
    /// demonstration set.
    pub demos_dir: Option<String>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            env: EnvId::MountainCar,
            algo: IrlAlgo::Hairl,
            seeds: (0..10).collect(),
            out: "runs".into(),
            demos_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpertSection {
    /// Expert learner; defaults to the canonical per-env choice.
    pub algo: Option<ExpertAlgo>,
    /// Demo episodes to record (hands for poker).
    pub episodes: usize,
    /// Record greedy (deterministic) demos.
    pub deterministic: bool,
    /// DQN expert env-step budget (0 = per-env default).
    pub dqn_train_steps: usize,
    /// PPO expert iteration budget (0 = per-env default).
    pub ppo_iterations: usize,
    /// Quality-gate override (per-env default when unset).
    pub gate: Option<f64>,
    /// Training attempts (derived seeds) before declaring the gate unmet.
    pub attempts: usize,
}

impl Default for ExpertSection {
    fn default() -> Self {
        ExpertSection {
            algo: None,
            episodes: 0,
            deterministic: true,
            dqn_train_steps: 0,
            ppo_iterations: 0,
            gate: None,
            attempts: 3,
        }
    }
}

impl ExpertSection {
    /// Demo budget default: 100 episodes for control tasks, 20k hands for
    /// poker.
    pub fn episodes_for(&self, env: EnvId) -> usize {
        if self.episodes > 0 {
            return self.episodes;
        }
        match env {
            EnvId::Leduc => 20_000,
            _ => 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnSection {
    pub gamma: f64,
    pub lr: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_sync: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_steps: usize,
    pub learn_start: usize,
}

impl Default for DqnSection {
    fn default() -> Self {
        let d = crate::agents::DqnConfig::default();
        DqnSection {
            gamma: d.gamma,
            lr: d.lr,
            replay_capacity: d.replay_capacity,
            batch_size: d.batch_size,
            target_sync: d.target_sync,
            eps_start: d.eps_start,
            eps_end: d.eps_end,
            eps_decay_steps: d.eps_decay_steps,
            learn_start: d.learn_start,
        }
    }
}

impl DqnSection {
    pub fn to_config(&self) -> crate::agents::DqnConfig {
        crate::agents::DqnConfig {
            gamma: self.gamma,
            lr: self.lr,
            replay_capacity: self.replay_capacity,
            batch_size: self.batch_size,
            target_sync: self.target_sync,
            eps_start: self.eps_start,
            eps_end: self.eps_end,
            eps_decay_steps: self.eps_decay_steps,
            learn_start: self.learn_start,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RlSection {
    /// RL-phase learner (defaults to DQN for discrete envs, PPO for
    /// continuous ones).
    pub algo: Option<ExpertAlgo>,
    /// DQN env-step budget for the RL phase.
    pub dqn_train_steps: usize,
    /// PPO iteration budget for the RL phase.
    pub ppo_iterations: usize,
}

impl Default for RlSection {
    fn default() -> Self {
        RlSection { algo: None, dqn_train_steps: 100_000, ppo_iterations: 150 }
    }
}

impl RlSection {
    pub fn algo_for(&self, env: EnvId) -> ExpertAlgo {
        self.algo.unwrap_or(match env {
            EnvId::Pendulum => ExpertAlgo::Ppo,
            EnvId::MountainCar | EnvId::Leduc => ExpertAlgo::Dqn,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    /// Greedy evaluation episodes for control tasks.
    pub episodes: usize,
    /// Hands per tournament seed (must be even; deals are mirrored).
    pub tournament_hands: usize,
    /// Lattice size of the reward argmax grid.
    pub grid_resolution: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { episodes: 100, tournament_hands: 100_000, grid_resolution: 64 }
    }
}

/// Top-level experiment file. Sections mirror the module layout.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub expert: ExpertSection,
    pub dqn: DqnSection,
    pub irl: HybridConfig,
    pub rl: RlSection,
    pub eval: EvalSection,
}

impl ExperimentConfig {
    /// Validates every section, reporting all problems together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.experiment.seeds.is_empty() {
            problems.push("experiment.seeds must not be empty".to_string());
        }
        if let Err(Error::Config(msg)) = self.irl.validate() {
            problems.push(msg);
        }
        if self.eval.tournament_hands == 0 || self.eval.tournament_hands % 2 != 0 {
            problems.push(format!(
                "eval.tournament_hands must be positive and even, got {}",
                self.eval.tournament_hands
            ));
        }
        if self.eval.grid_resolution < 2 {
            problems.push("eval.grid_resolution must be at least 2".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(format!("serialize config: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

/// Loads a config file (or defaults when `path` is `None`) and applies
/// dotted-path overrides such as `irl.alpha=0.5`.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut value: toml::Value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|_| Error::MissingArtifact {
                path: p.display().to_string(),
                hint: "config file not found".into(),
            })?;
            text.parse().map_err(|e| Error::config(format!("parse {}: {e}", p.display())))?
        }
        None => toml::Value::Table(Default::default()),
    };
    for ov in overrides {
        apply_override(&mut value, ov)?;
    }
    let cfg: ExperimentConfig = value
        .try_into()
        .map_err(|e| Error::config(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override '{spec}' must look like key=value")))?;
    let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Value>() {
        Ok(toml::Value::Table(t)) => t.get("v").cloned().unwrap(),
        _ => toml::Value::String(raw.to_string()),
    };
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override path '{key}' crosses a non-table")))?;
        if i + 1 == parts.len() {
            table.insert((*part).to_string(), parsed);
            return Ok(());
        }
        cur = table
            .entry((*part).to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    Ok(())
}

/// Parses a seed list: comma-separated values and inclusive-exclusive
/// ranges, e.g. `0,1,2` or `0..10` or `0..3,7`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        if let Some((a, b)) = part.split_once("..") {
            let lo: u64 = a.trim().parse().map_err(|_| Error::config(format!("bad seed range '{part}'")))?;
            let hi: u64 = b.trim().parse().map_err(|_| Error::config(format!("bad seed range '{part}'")))?;
            if hi <= lo {
                return Err(Error::config(format!("empty seed range '{part}'")));
            }
            seeds.extend(lo..hi);
        } else {
            seeds.push(part.parse().map_err(|_| Error::config(format!("bad seed '{part}'")))?);
        }
    }
    if seeds.is_empty() {
        return Err(Error::config("no seeds given"));
    }
    Ok(seeds)
}
