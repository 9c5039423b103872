//! Pipeline stages. Each stage processes one seed into
//! `<out>/<stage>/<seed>/`, writes a fully resolved config snapshot next
//! to its artifacts, and reads upstream artifacts strictly from their
//! stage directories (never recomputing them).

use std::path::{Path, PathBuf};

use irlab_core::agents::{
    evaluate_policy_greedy, evaluate_q_greedy, train_dqn, train_ppo, DqnTrainConfig, Policy,
    PolicyHead, PpoConfig, PpoTrainConfig, QFunction,
};
use irlab_core::config::ExperimentConfig;
use irlab_core::envs::{make_env, ActionSpace, EnvId};
use irlab_core::error::{Error, Result};
use irlab_core::eval::{
    action_alignment, aggregate_curves, reward_grid, run_tournament, significance,
    write_aggregated_csv, write_grid_csv, write_tournament_csv, Agent, PolicyAgent, QAgent,
    RandomAgent,
};
use irlab_core::expert::{
    default_expert_algo, load_demos, record_demos, save_demos, train_expert, ExpertAgent,
    ExpertAlgo, ExpertConfig,
};
use irlab_core::irl::{irl_train, Discriminator};
use irlab_core::logging::{read_run_curves, write_run_curves, CurvePoint};
use irlab_core::nncore::{load_network, save_network, Network};

pub fn stage_dir(cfg: &ExperimentConfig, stage: &str, seed: u64) -> PathBuf {
    Path::new(&cfg.experiment.out).join(stage).join(seed.to_string())
}

/// Writes the resolved snapshot for one (stage, seed) run. The snapshot's
/// seed list is narrowed to this run's seed so replaying it reproduces
/// exactly this directory.
fn write_snapshot(cfg: &ExperimentConfig, dir: &Path, seed: u64) -> Result<()> {
    let mut resolved = cfg.clone();
    resolved.experiment.seeds = vec![seed];
    resolved.save(&dir.join("config.resolved.toml"))
}

fn require(path: &Path, hint: &str) -> Result<()> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path: path.display().to_string(),
            hint: hint.to_string(),
        });
    }
    Ok(())
}

fn expert_config(cfg: &ExperimentConfig) -> ExpertConfig {
    let env = cfg.experiment.env;
    let mut ec = ExpertConfig::for_env(env);
    ec.dqn.dqn = cfg.dqn.to_config();
    match env {
        EnvId::MountainCar => {
            // Long exploration is what makes the sparse goal findable.
            ec.dqn.dqn.eps_decay_steps = ec.dqn.dqn.eps_decay_steps.max(60_000);
        }
        EnvId::Leduc => {
            ec.dqn.dqn.eps_decay_steps = cfg.dqn.eps_decay_steps;
        }
        EnvId::Pendulum => {}
    }
    if cfg.expert.dqn_train_steps > 0 {
        ec.dqn.train_steps = cfg.expert.dqn_train_steps;
    }
    if cfg.expert.ppo_iterations > 0 {
        ec.ppo.iterations = cfg.expert.ppo_iterations;
    }
    if let Some(gate) = cfg.expert.gate {
        ec.gate = gate;
    }
    ec.attempts = cfg.expert.attempts;
    ec
}

pub fn run_expert(cfg: &ExperimentConfig, seed: u64) -> Result<()> {
    let env = cfg.experiment.env;
    let algo = cfg.expert.algo.unwrap_or_else(|| default_expert_algo(env));
    let ec = expert_config(cfg);
    let (agent, curves) = train_expert(env, algo, &ec, seed)?;
    let dir = stage_dir(cfg, "expert", seed);
    std::fs::create_dir_all(&dir)?;
    match &agent {
        ExpertAgent::Dqn(q) => save_network(&q.net, &dir.join("expert.net"))?,
        ExpertAgent::Ppo(p) => save_network(&p.net, &dir.join("expert.net"))?,
    }
    write_run_curves(&dir.join("curves.csv"), seed, &curves)?;
    write_snapshot(cfg, &dir, seed)?;
    Ok(())
}

fn load_expert(cfg: &ExperimentConfig, seed: u64) -> Result<ExpertAgent> {
    let env = cfg.experiment.env;
    let algo = cfg.expert.algo.unwrap_or_else(|| default_expert_algo(env));
    let path = stage_dir(cfg, "expert", seed).join("expert.net");
    require(&path, "run the expert stage first")?;
    let net = load_network(&path)?;
    Ok(match algo {
        ExpertAlgo::Dqn => {
            let target = net.clone();
            ExpertAgent::Dqn(QFunction { net, target })
        }
        ExpertAlgo::Ppo => ExpertAgent::Ppo(policy_from_net(net, cfg.experiment.env)),
    })
}

fn policy_from_net(net: Network, env: EnvId) -> Policy {
    let space = make_env(env).action_space();
    let head = match space {
        ActionSpace::Discrete { n } => PolicyHead::Discrete { n },
        ActionSpace::Continuous { low, high } => PolicyHead::Gaussian { low, high },
    };
    Policy { net, head }
}

pub fn run_demos(cfg: &ExperimentConfig, seed: u64) -> Result<()> {
    let env = cfg.experiment.env;
    let mut agent = load_expert(cfg, seed)?;
    let episodes = cfg.expert.episodes_for(env);
    let demos = record_demos(&mut agent, env, episodes, seed, cfg.expert.deterministic)?;
    let dir = stage_dir(cfg, "demos", seed);
    save_demos(&demos, &dir.join("demos.jsonl"))?;
    write_snapshot(cfg, &dir, seed)?;
    Ok(())
}

/// Demos directory for a seed, honoring the `experiment.demos_dir`
/// redirection used to share one demo set across experiments.
pub fn demos_path(cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    match &cfg.experiment.demos_dir {
        Some(dir) => Path::new(dir).join(seed.to_string()).join("demos.jsonl"),
        None => stage_dir(cfg, "demos", seed).join("demos.jsonl"),
    }
}

pub fn run_irl(cfg: &ExperimentConfig, seed: u64) -> Result<()> {
    let path = demos_path(cfg, seed);
    require(&path, "record demos first (demos stage)")?;
    let demos = load_demos(&path)?;
    let mut env = make_env(cfg.experiment.env);
    let out = irl_train(cfg.experiment.algo, &cfg.irl, &mut *env, &demos, seed)?;
    let dir = stage_dir(cfg, "irl", seed);
    save_network(&out.policy.net, &dir.join("policy.net"))?;
    save_network(&out.value, &dir.join("value.net"))?;
    save_network(&out.discriminator.net, &dir.join("discriminator.net"))?;
    write_run_curves(&dir.join("curves.csv"), seed, &out.curves)?;
    write_snapshot(cfg, &dir, seed)?;
    Ok(())
}

fn load_discriminator(cfg: &ExperimentConfig, seed: u64) -> Result<Discriminator> {
    let path = stage_dir(cfg, "irl", seed).join("discriminator.net");
    require(&path, "run the irl stage first")?;
    let net = load_network(&path)?;
    let space = make_env(cfg.experiment.env).action_space();
    Ok(Discriminator { net, space })
}

pub fn run_rl(cfg: &ExperimentConfig, seed: u64) -> Result<()> {
    let env_id = cfg.experiment.env;
    let disc = load_discriminator(cfg, seed)?;
    let reward = |obs: &[f64], action: &irlab_core::envs::Action| disc.reward(obs, action);
    let mut env = make_env(env_id);
    let dir = stage_dir(cfg, "rl", seed);
    match cfg.rl.algo_for(env_id) {
        ExpertAlgo::Dqn => {
            let tc = DqnTrainConfig {
                dqn: cfg.dqn.to_config(),
                train_steps: cfg.rl.dqn_train_steps,
                hidden: cfg.irl.hidden.clone(),
                ..Default::default()
            };
            let (q, curves) = train_dqn(&mut *env, &tc, seed, Some(&reward))?;
            save_network(&q.net, &dir.join("agent.net"))?;
            write_run_curves(&dir.join("curves.csv"), seed, &curves)?;
        }
        ExpertAlgo::Ppo => {
            let tc = PpoTrainConfig {
                ppo: PpoConfig { gamma: cfg.irl.gamma, ..cfg.irl.ppo.to_config(cfg.irl.gamma) },
                iterations: cfg.rl.ppo_iterations,
                rollout_steps: cfg.irl.rollout_steps,
                hidden: cfg.irl.hidden.clone(),
            };
            let (p, _v, curves) = train_ppo(&mut *env, &tc, seed, Some(&reward))?;
            save_network(&p.net, &dir.join("agent.net"))?;
            write_run_curves(&dir.join("curves.csv"), seed, &curves)?;
        }
    }
    write_snapshot(cfg, &dir, seed)?;
    Ok(())
}

/// Per-seed evaluation: greedy env return of the RL agent (when present)
/// and final alignment of the IRL policy (discrete envs).
pub fn run_eval_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<CurvePoint>> {
    let env_id = cfg.experiment.env;
    let dir = stage_dir(cfg, "eval", seed);
    std::fs::create_dir_all(&dir)?;
    let mut points = Vec::new();

    let policy_path = stage_dir(cfg, "irl", seed).join("policy.net");
    require(&policy_path, "run the irl stage first")?;
    let policy = policy_from_net(load_network(&policy_path)?, env_id);

    if matches!(make_env(env_id).action_space(), ActionSpace::Discrete { .. }) {
        let demos = load_demos(&demos_path(cfg, seed))?;
        let alignment = action_alignment(&policy, &demos)?;
        points.push(CurvePoint::new(0, "alignment", alignment));
    }
    let mut env = make_env(env_id);
    let ret = evaluate_policy_greedy(&mut *env, &policy, cfg.eval.episodes, seed ^ 0xea1)?;
    points.push(CurvePoint::new(0, "irl_policy_return", ret));

    let agent_path = stage_dir(cfg, "rl", seed).join("agent.net");
    if agent_path.exists() {
        let net = load_network(&agent_path)?;
        let ret = match cfg.rl.algo_for(env_id) {
            ExpertAlgo::Dqn => {
                let q = QFunction { target: net.clone(), net };
                evaluate_q_greedy(&mut *env, &q, cfg.eval.episodes, seed ^ 0xea1)?
            }
            ExpertAlgo::Ppo => {
                let p = policy_from_net(net, env_id);
                evaluate_policy_greedy(&mut *env, &p, cfg.eval.episodes, seed ^ 0xea1)?
            }
        };
        points.push(CurvePoint::new(0, "rl_agent_return", ret));
    }
    write_run_curves(&dir.join("summary.csv"), seed, &points)?;
    write_snapshot(cfg, &dir, seed)?;
    Ok(points)
}

/// Cross-seed aggregation: curves.csv (IRL stage) and rl_curves.csv.
pub fn run_eval_aggregate(cfg: &ExperimentConfig) -> Result<()> {
    let root = Path::new(&cfg.experiment.out).join("eval");
    let mut irl_runs = Vec::new();
    let mut rl_runs = Vec::new();
    for &seed in &cfg.experiment.seeds {
        let (points, _) = read_run_curves(&stage_dir(cfg, "irl", seed).join("curves.csv"))?;
        irl_runs.push(points);
        let rl_path = stage_dir(cfg, "rl", seed).join("curves.csv");
        if rl_path.exists() {
            rl_runs.push(read_run_curves(&rl_path)?.0);
        }
    }
    write_aggregated_csv(&root.join("curves.csv"), &aggregate_curves(&irl_runs)?)?;
    if !rl_runs.is_empty() {
        write_aggregated_csv(&root.join("rl_curves.csv"), &aggregate_curves(&rl_runs)?)?;
    }
    Ok(())
}

/// Loads a Leduc seat agent from a stage seed directory (`agent.net` from
/// an rl stage or `expert.net` from an expert stage), or a uniform random
/// agent for the literal name `random`.
pub fn load_leduc_agent(spec: &str, seed: u64) -> Result<Box<dyn Agent>> {
    if spec == "random" {
        return Ok(Box::new(RandomAgent::new(seed ^ 0x5eed)));
    }
    let dir = Path::new(spec).join(seed.to_string());
    let snapshot = dir.join("config.resolved.toml");
    require(&snapshot, "expected a stage directory with per-seed subdirectories")?;
    let cfg = irlab_core::config::load_config(Some(&snapshot), &[])?;
    if cfg.experiment.env != EnvId::Leduc {
        return Err(Error::config(format!(
            "agent at {} was trained on {}, not leduc",
            dir.display(),
            cfg.experiment.env
        )));
    }
    let (net_path, algo) = if dir.join("agent.net").exists() {
        (dir.join("agent.net"), cfg.rl.algo_for(EnvId::Leduc))
    } else if dir.join("expert.net").exists() {
        (
            dir.join("expert.net"),
            cfg.expert.algo.unwrap_or_else(|| default_expert_algo(EnvId::Leduc)),
        )
    } else {
        return Err(Error::MissingArtifact {
            path: dir.join("agent.net").display().to_string(),
            hint: "no agent.net or expert.net in this stage directory".into(),
        });
    };
    let net = load_network(&net_path)?;
    Ok(match algo {
        ExpertAlgo::Dqn => Box::new(QAgent(QFunction { target: net.clone(), net })),
        ExpertAlgo::Ppo => Box::new(PolicyAgent(policy_from_net(net, EnvId::Leduc))),
    })
}

/// Head-to-head mirrored tournament between two agent specs over the
/// configured seeds. Writes tournament.csv and returns per-seed payoffs.
pub fn run_tournament_stage(
    cfg: &ExperimentConfig,
    agent_a: &str,
    agent_b: &str,
    hands: usize,
) -> Result<Vec<f64>> {
    let mut rows = Vec::new();
    let mut payoffs = Vec::new();
    for &seed in &cfg.experiment.seeds {
        let mut a = load_leduc_agent(agent_a, seed)?;
        let mut b = load_leduc_agent(agent_b, seed)?;
        let mbb = run_tournament(a.as_mut(), b.as_mut(), hands, seed ^ 0x70a2)?;
        rows.push((seed, hands, mbb));
        payoffs.push(mbb);
    }
    let dir = Path::new(&cfg.experiment.out).join("tournament");
    std::fs::create_dir_all(&dir)?;
    write_tournament_csv(&dir.join("tournament.csv"), &rows)?;
    if payoffs.len() >= 2 {
        let sig = significance(&payoffs)?;
        let summary = format!(
            "mean_mbb_per_hand,stderr,p_value,significant,n_seeds\n{},{},{},{},{}\n",
            sig.mean, sig.stderr, sig.p_value, sig.significant, sig.n_seeds
        );
        std::fs::write(dir.join("significance.csv"), summary)?;
    }
    Ok(payoffs)
}

pub fn run_grid(cfg: &ExperimentConfig, seed: u64) -> Result<()> {
    let disc = load_discriminator(cfg, seed)?;
    let grid = reward_grid(&disc, cfg.eval.grid_resolution)?;
    let dir = stage_dir(cfg, "grid", seed);
    std::fs::create_dir_all(&dir)?;
    write_grid_csv(&dir.join("reward_grid.csv"), &grid)?;
    write_snapshot(cfg, &dir, seed)?;
    Ok(())
}

/// OFAT sweep values used when the caller does not supply any.
pub fn default_sweep_values(param: &str) -> Result<Vec<f64>> {
    match param {
        "alpha" => Ok(vec![0.0, 0.1, 0.5, 1.0]),
        "beta" => Ok(vec![0.0, 0.25, 0.5, 1.0]),
        "sigma_start" => Ok(vec![0.1, 0.5, 0.9, 1.0]),
        "sigma_end" => Ok(vec![0.0, 0.08, 0.5, 0.9]),
        other => Err(Error::config(format!(
            "unknown sweep parameter '{other}' (expected alpha, beta, sigma_start, or sigma_end)"
        ))),
    }
}

/// Applies one sweep point to a copy of the config, leaving every other
/// field untouched.
pub fn sweep_point_config(
    cfg: &ExperimentConfig,
    param: &str,
    value: f64,
) -> Result<ExperimentConfig> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::config(format!("sweep value {value} outside [0,1]")));
    }
    let mut point = cfg.clone();
    match param {
        "alpha" => point.irl.alpha = value,
        "beta" => point.irl.beta = value,
        "sigma_start" => point.irl.sigma_start = value,
        "sigma_end" => point.irl.sigma_end = value,
        other => return Err(Error::config(format!("unknown sweep parameter '{other}'"))),
    }
    point.experiment.out = Path::new(&cfg.experiment.out)
        .join("sweep")
        .join(param)
        .join(format!("v{value}"))
        .display()
        .to_string();
    if point.experiment.demos_dir.is_none() {
        // Sweep points share the parent experiment's demos.
        point.experiment.demos_dir =
            Some(Path::new(&cfg.experiment.out).join("demos").display().to_string());
    }
    point.validate()?;
    Ok(point)
}

/// Aggregates one sweep point's curves into
/// `<out>/sweep/<param>/curves_v<value>.csv` (IRL stage) and
/// `rl_curves_v<value>.csv`.
pub fn aggregate_sweep_point(
    cfg: &ExperimentConfig,
    point: &ExperimentConfig,
    param: &str,
    value: f64,
) -> Result<()> {
    let dir = Path::new(&cfg.experiment.out).join("sweep").join(param);
    let mut irl_runs = Vec::new();
    let mut rl_runs = Vec::new();
    for &seed in &point.experiment.seeds {
        irl_runs.push(read_run_curves(&stage_dir(point, "irl", seed).join("curves.csv"))?.0);
        let rl = stage_dir(point, "rl", seed).join("curves.csv");
        if rl.exists() {
            rl_runs.push(read_run_curves(&rl)?.0);
        }
    }
    write_aggregated_csv(&dir.join(format!("curves_v{value}.csv")), &aggregate_curves(&irl_runs)?)?;
    if !rl_runs.is_empty() {
        write_aggregated_csv(
            &dir.join(format!("rl_curves_v{value}.csv")),
            &aggregate_curves(&rl_runs)?,
        )?;
    }
    Ok(())
}
