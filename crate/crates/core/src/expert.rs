//! Expert artifacts: training expert agents on true env rewards, recording
//! demonstrations, and the `demos.jsonl` on-disk format.
//!
//! File layout: line 1 is a header object
//! `{"version":1,"env":...,"obs_dim":...,"action_space":...,"mean_return":...,"seeds":[...]}`,
//! then one JSON object per trajectory:
//! `{"seed":...,"steps":[{"obs":[...],"action":...,"r_env":...,"done":...,"mask":[...]},...]}`.
//! Discrete actions serialize as integers, continuous ones as arrays.
//! Loading is atomic: any malformed line fails the whole load with its
//! line number.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    evaluate_policy_greedy, evaluate_q_greedy, train_dqn, train_ppo, DqnTrainConfig, Policy,
    PpoTrainConfig, QFunction,
};
use crate::envs::{make_env, Action, ActionSpace, EnvId};
use crate::error::{Error, Result};
use crate::logging::CurvePoint;

pub const DEMO_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum ActionRepr {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl From<&Action> for ActionRepr {
    fn from(a: &Action) -> Self {
        match a {
            Action::Discrete(i) => ActionRepr::Discrete(*i),
            Action::Continuous(v) => ActionRepr::Continuous(v.clone()),
        }
    }
}

impl From<ActionRepr> for Action {
    fn from(a: ActionRepr) -> Self {
        match a {
            ActionRepr::Discrete(i) => Action::Discrete(i),
            ActionRepr::Continuous(v) => Action::Continuous(v),
        }
    }
}

/// One recorded expert decision. `r_env` is `null` in files produced
/// without ground-truth rewards; our recorder always fills it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoStep {
    pub obs: Vec<f64>,
    #[serde(with = "action_serde")]
    pub action: Action,
    pub r_env: Option<f64>,
    pub done: bool,
    /// Legal-action mask at the decision point (empty = unconstrained).
    pub mask: Vec<bool>,
}

mod action_serde {
    use super::{Action, ActionRepr};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(a: &Action, s: S) -> Result<S::Ok, S::Error> {
        ActionRepr::from(a).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Action, D::Error> {
        Ok(ActionRepr::deserialize(d)?.into())
    }
}

/// One full episode plus the env seed it replays from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub steps: Vec<DemoStep>,
}

impl Trajectory {
    pub fn env_return(&self) -> f64 {
        self.steps.iter().filter_map(|s| s.r_env).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DemoHeader {
    version: u32,
    env: EnvId,
    obs_dim: usize,
    action_space: ActionSpace,
    mean_return: f64,
    seeds: Vec<u64>,
}

/// Expert demonstrations with ground-truth env rewards on every step.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub env: EnvId,
    pub obs_dim: usize,
    pub action_space: ActionSpace,
    pub trajectories: Vec<Trajectory>,
    pub mean_return: f64,
    pub seeds: Vec<u64>,
}

impl DemoSet {
    pub fn n_steps(&self) -> usize {
        self.trajectories.iter().map(|t| t.steps.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.n_steps() == 0
    }

    /// Flattened view over all steps, optionally omitting fold actions
    /// (Leduc action 0), mimicking datasets where folds are unobservable.
    pub fn flat_steps(&self, strip_folds: bool) -> Vec<&DemoStep> {
        self.trajectories
            .iter()
            .flat_map(|t| t.steps.iter())
            .filter(|s| {
                !(strip_folds
                    && self.env == EnvId::Leduc
                    && matches!(s.action, Action::Discrete(a) if a == crate::envs::leduc::ACT_FOLD))
            })
            .collect()
    }
}

pub fn save_demos(set: &DemoSet, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    let header = DemoHeader {
        version: DEMO_FORMAT_VERSION,
        env: set.env,
        obs_dim: set.obs_dim,
        action_space: set.action_space.clone(),
        mean_return: set.mean_return,
        seeds: set.seeds.clone(),
    };
    serde_json::to_writer(&mut w, &header).map_err(io_err)?;
    w.write_all(b"\n")?;
    for t in &set.trajectories {
        serde_json::to_writer(&mut w, t).map_err(io_err)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn io_err(e: serde_json::Error) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::Other, e))
}

pub fn load_demos(path: &Path) -> Result<DemoSet> {
    let file = File::open(path).map_err(|_| Error::MissingArtifact {
        path: path.display().to_string(),
        hint: "record demos first (demos stage)".into(),
    })?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or(Error::Parse { line: 1, message: "empty demo file".into() })?;
    let header: DemoHeader = serde_json::from_str(&first?)
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if header.version != DEMO_FORMAT_VERSION {
        return Err(Error::Version {
            expected: DEMO_FORMAT_VERSION.to_string(),
            found: header.version.to_string(),
        });
    }
    let mut trajectories = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Trajectory = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: idx + 1, message: e.to_string() })?;
        for s in &t.steps {
            if s.obs.len() != header.obs_dim {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("obs dim {} != header {}", s.obs.len(), header.obs_dim),
                });
            }
        }
        trajectories.push(t);
    }
    Ok(DemoSet {
        env: header.env,
        obs_dim: header.obs_dim,
        action_space: header.action_space,
        trajectories,
        mean_return: header.mean_return,
        seeds: header.seeds,
    })
}

/// Which learner produces the expert for an env.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpertAlgo {
    Ppo,
    Dqn,
}

impl std::str::FromStr for ExpertAlgo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppo" => Ok(ExpertAlgo::Ppo),
            "dqn" => Ok(ExpertAlgo::Dqn),
            other => Err(Error::config(format!("unknown algo '{other}' (expected ppo or dqn)"))),
        }
    }
}

/// Canonical expert learner per env: DQN for MountainCar and Leduc, PPO
/// for Pendulum.
pub fn default_expert_algo(env: EnvId) -> ExpertAlgo {
    match env {
        EnvId::MountainCar | EnvId::Leduc => ExpertAlgo::Dqn,
        EnvId::Pendulum => ExpertAlgo::Ppo,
    }
}

/// A trained expert of either family.
#[derive(Debug, Clone)]
pub enum ExpertAgent {
    Ppo(Policy),
    Dqn(QFunction),
}

impl ExpertAgent {
    pub fn greedy(&self, obs: &[f64], mask: &[bool]) -> Result<Action> {
        match self {
            ExpertAgent::Ppo(p) => p.greedy(obs, mask),
            ExpertAgent::Dqn(q) => Ok(Action::Discrete(q.greedy(obs, mask)?)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        obs: &[f64],
        mask: &[bool],
        rng: &mut R,
    ) -> Result<Action> {
        match self {
            ExpertAgent::Ppo(p) => Ok(p.sample(obs, mask, rng)?.0),
            // DQN experts are deterministic; sampling falls back to greedy.
            ExpertAgent::Dqn(q) => Ok(Action::Discrete(q.greedy(obs, mask)?)),
        }
    }
}

/// Training budget and quality gate for one expert.
#[derive(Debug, Clone)]
pub struct ExpertConfig {
    pub dqn: DqnTrainConfig,
    pub ppo: PpoTrainConfig,
    /// Episodes used by the post-training greedy gate evaluation.
    pub eval_episodes: usize,
    /// Minimum mean greedy return (control tasks) or mbb/h vs a random
    /// opponent (Leduc).
    pub gate: f64,
    /// Hands played for the Leduc gate tournament.
    pub gate_hands: usize,
    /// Training attempts on derived seeds before giving up on the gate.
    pub attempts: usize,
}

impl ExpertConfig {
    pub fn for_env(env: EnvId) -> ExpertConfig {
        match env {
            EnvId::MountainCar => ExpertConfig {
                dqn: DqnTrainConfig {
                    train_steps: 160_000,
                    dqn: crate::agents::DqnConfig {
                        eps_decay_steps: 60_000,
                        eps_end: 0.05,
                        lr: 5e-4,
                        ..Default::default()
                    },
                    ..Default::default()
                },
                ppo: PpoTrainConfig::default(),
                eval_episodes: 100,
                gate: -130.0,
                gate_hands: 0,
                attempts: 3,
            },
            EnvId::Pendulum => ExpertConfig {
                dqn: DqnTrainConfig::default(),
                ppo: PpoTrainConfig { iterations: 250, ..Default::default() },
                eval_episodes: 100,
                gate: -300.0,
                gate_hands: 0,
                attempts: 3,
            },
            EnvId::Leduc => ExpertConfig {
                dqn: DqnTrainConfig {
                    train_steps: 120_000,
                    dqn: crate::agents::DqnConfig {
                        eps_decay_steps: 30_000,
                        target_sync: 500,
                        ..Default::default()
                    },
                    ..Default::default()
                },
                ppo: PpoTrainConfig::default(),
                eval_episodes: 0,
                gate: 500.0,
                gate_hands: 100_000,
                attempts: 3,
            },
        }
    }
}

/// Trains an expert on the true env reward and enforces its quality gate;
/// refuses to hand back a below-gate agent. Up to `cfg.attempts` derived
/// seeds are tried before the budget counts as exhausted.
pub fn train_expert(
    env_id: EnvId,
    algo: ExpertAlgo,
    cfg: &ExpertConfig,
    seed: u64,
) -> Result<(ExpertAgent, Vec<CurvePoint>)> {
    let mut best: Option<(f64, ExpertAgent, Vec<CurvePoint>)> = None;
    for attempt in 0..cfg.attempts.max(1) {
        let attempt_seed = seed.wrapping_add((attempt as u64) << 20);
        let mut env = make_env(env_id);
        let (agent, curves) = match algo {
            ExpertAlgo::Dqn => {
                let (q, curves) = train_dqn(&mut *env, &cfg.dqn, attempt_seed, None)?;
                (ExpertAgent::Dqn(q), curves)
            }
            ExpertAlgo::Ppo => {
                let (p, _v, curves) = train_ppo(&mut *env, &cfg.ppo, attempt_seed, None)?;
                (ExpertAgent::Ppo(p), curves)
            }
        };
        let score = expert_gate_score(env_id, &agent, cfg, seed)?;
        if score >= cfg.gate {
            return Ok((agent, curves));
        }
        if best.as_ref().map_or(true, |(s, _, _)| score > *s) {
            best = Some((score, agent, curves));
        }
    }
    let best_score = best.map(|(s, _, _)| s).unwrap_or(f64::NEG_INFINITY);
    Err(Error::state(format!(
        "expert quality gate unmet on {env_id} after {} attempts: best score {best_score:.2} \
         < gate {:.2} (raise the training budget)",
        cfg.attempts.max(1),
        cfg.gate
    )))
}

/// Gate metric: greedy mean return for control tasks, mbb/h vs a uniform
/// random opponent for Leduc.
pub fn expert_gate_score(
    env_id: EnvId,
    agent: &ExpertAgent,
    cfg: &ExpertConfig,
    seed: u64,
) -> Result<f64> {
    match (env_id, agent) {
        (EnvId::Leduc, ExpertAgent::Dqn(q)) => {
            let mut a = crate::eval::QAgent(q.clone());
            let mut b = crate::eval::RandomAgent::new(seed ^ 0x7a11);
            crate::eval::run_tournament(&mut a, &mut b, cfg.gate_hands, seed)
        }
        (_, ExpertAgent::Dqn(q)) => {
            let mut env = make_env(env_id);
            evaluate_q_greedy(&mut *env, q, cfg.eval_episodes, seed)
        }
        (_, ExpertAgent::Ppo(p)) => {
            let mut env = make_env(env_id);
            evaluate_policy_greedy(&mut *env, p, cfg.eval_episodes, seed)
        }
    }
}

/// Rolls out the gated expert for `n_episodes` full episodes and records
/// every step with its env reward, legal mask, and episode seed.
pub fn record_demos(
    agent: &mut ExpertAgent,
    env_id: EnvId,
    n_episodes: usize,
    seed: u64,
    deterministic: bool,
) -> Result<DemoSet> {
    if n_episodes == 0 {
        return Err(Error::config("record_demos needs n_episodes >= 1"));
    }
    let mut env = make_env(env_id);
    let mut seed_rng = crate::rng::stream(seed, "demos.episodes");
    let mut sample_rng = crate::rng::stream(seed, "demos.sample");
    let mut trajectories = Vec::with_capacity(n_episodes);
    let mut total_return = 0.0;
    for ep in 0..n_episodes {
        // Alternate poker seats so demos cover both positions.
        env.set_agent_seat(ep % 2);
        let ep_seed: u64 = seed_rng.gen();
        let mut state = env.reset(ep_seed);
        let mut steps = Vec::new();
        loop {
            let action = if deterministic {
                agent.greedy(&state.obs, &state.legal_mask)?
            } else {
                agent.sample(&state.obs, &state.legal_mask, &mut sample_rng)?
            };
            let res = env.step(&action)?;
            steps.push(DemoStep {
                obs: state.obs.clone(),
                action,
                r_env: Some(res.reward),
                done: res.state.done,
                mask: state.legal_mask.clone(),
            });
            total_return += res.reward;
            state = res.state;
            if state.done {
                break;
            }
        }
        trajectories.push(Trajectory { seed: ep_seed, steps });
    }
    let env_ref = make_env(env_id);
    Ok(DemoSet {
        env: env_id,
        obs_dim: env_ref.obs_dim(),
        action_space: env_ref.action_space(),
        trajectories,
        mean_return: total_return / n_episodes as f64,
        seeds: vec![seed],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_mc_demoset(n: usize) -> DemoSet {
        DemoSet {
            env: EnvId::MountainCar,
            obs_dim: 2,
            action_space: ActionSpace::Discrete { n: 3 },
            trajectories: (0..n)
                .map(|i| Trajectory {
                    seed: i as u64,
                    steps: vec![DemoStep {
                        obs: vec![0.1 * i as f64, -0.2],
                        action: Action::Discrete(i % 3),
                        r_env: Some(-1.0),
                        done: true,
                        mask: vec![true, true, true],
                    }],
                })
                .collect(),
            mean_return: -1.0,
            seeds: vec![0],
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demos.jsonl");
        let set = tiny_mc_demoset(3);
        save_demos(&set, &path).unwrap();
        let back = load_demos(&path).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn truncated_file_fails_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demos.jsonl");
        save_demos(&tiny_mc_demoset(3), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(load_demos(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demos.jsonl");
        std::fs::write(
            &path,
            br#"{"version":99,"env":"mountaincar","obs_dim":2,"action_space":{"type":"discrete","n":3},"mean_return":0.0,"seeds":[0]}"#,
        )
        .unwrap();
        assert!(matches!(load_demos(&path), Err(Error::Version { .. })));
    }
}
