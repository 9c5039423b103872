//! Measurement machinery: state-level action alignment, multi-seed curve
//! aggregation, mirrored-deal poker tournaments scored in mbb/h, and
//! reward-function argmax grids over the MountainCar state space.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::agents::{Policy, PolicyHead, QFunction};
use crate::envs::leduc::{self, Deal, HandState, BIG_BLIND_CHIPS};
use crate::envs::{mountain_car, Action, ActionSpace};
use crate::error::{Error, Result};
use crate::expert::DemoSet;
use crate::irl::Discriminator;
use crate::logging::CurvePoint;

/// Everything the eval stage can report about one experiment.
#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    /// Aggregated curves (metric, step, mean, std) with their seed count.
    pub curves: Vec<AggregatedPoint>,
    /// Final alignment percentage per seed (discrete envs only).
    pub alignment: Vec<f64>,
    /// Tournament payoffs per seed in mbb/h plus their significance.
    pub tournament: Option<Significance>,
    /// Reward argmax grid (MountainCar only).
    pub grid: Option<RewardGrid>,
}

/// Percentage of demo states where the policy's greedy action equals the
/// expert's recorded action. Ties in the argmax break toward the lowest
/// action index.
pub fn action_alignment(policy: &Policy, demos: &DemoSet) -> Result<f64> {
    if !matches!(policy.head, PolicyHead::Discrete { .. }) {
        return Err(Error::UnsupportedMetric(
            "action alignment is defined for discrete action spaces only".into(),
        ));
    }
    let steps = demos.flat_steps(false);
    if steps.is_empty() {
        return Err(Error::state("action alignment on an empty demo set"));
    }
    let mut matches = 0usize;
    for step in &steps {
        let greedy = policy.greedy(&step.obs, &step.mask)?;
        if greedy == step.action {
            matches += 1;
        }
    }
    Ok(100.0 * matches as f64 / steps.len() as f64)
}

/// One aggregated curve sample across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedPoint {
    pub metric: String,
    pub step: u64,
    pub mean: f64,
    /// Population standard deviation across seeds.
    pub std: f64,
    pub n_seeds: usize,
}

/// Aggregated curves plus a flag warning when only one run contributed.
#[derive(Debug, Clone)]
pub struct AggregatedCurves {
    pub points: Vec<AggregatedPoint>,
    pub single_run: bool,
}

/// Aggregates per-seed curves into per-step mean and population std for
/// every metric. Runs whose logging grids differ are linearly resampled
/// onto the first run's grid restricted to the common step range.
pub fn aggregate_curves(runs: &[Vec<CurvePoint>]) -> Result<AggregatedCurves> {
    if runs.is_empty() {
        return Err(Error::state("no runs to aggregate"));
    }
    let mut metrics: Vec<String> = Vec::new();
    for run in runs {
        for p in run {
            if !metrics.contains(&p.metric) {
                metrics.push(p.metric.clone());
            }
        }
    }
    let mut points = Vec::new();
    for metric in &metrics {
        let series: Vec<Vec<(u64, f64)>> = runs
            .iter()
            .map(|run| {
                let mut s: Vec<(u64, f64)> = run
                    .iter()
                    .filter(|p| &p.metric == metric)
                    .map(|p| (p.step, p.value))
                    .collect();
                s.sort_by_key(|&(step, _)| step);
                s
            })
            .filter(|s| !s.is_empty())
            .collect();
        if series.is_empty() {
            continue;
        }
        let identical = series.iter().all(|s| {
            s.len() == series[0].len()
                && s.iter().zip(&series[0]).all(|(a, b)| a.0 == b.0)
        });
        let grid: Vec<u64> = if identical {
            series[0].iter().map(|&(s, _)| s).collect()
        } else {
            let lo = series.iter().map(|s| s[0].0).max().unwrap();
            let hi = series.iter().map(|s| s.last().unwrap().0).min().unwrap();
            series[0]
                .iter()
                .map(|&(s, _)| s)
                .filter(|&s| s >= lo && s <= hi)
                .collect()
        };
        for &step in &grid {
            let values: Vec<f64> = series.iter().map(|s| interp(s, step)).collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            points.push(AggregatedPoint {
                metric: metric.clone(),
                step,
                mean,
                std: var.sqrt(),
                n_seeds: values.len(),
            });
        }
    }
    Ok(AggregatedCurves { points, single_run: runs.len() == 1 })
}

/// Linear interpolation of a sorted (step, value) series at `step`.
fn interp(series: &[(u64, f64)], step: u64) -> f64 {
    match series.binary_search_by_key(&step, |&(s, _)| s) {
        Ok(i) => series[i].1,
        Err(i) => {
            if i == 0 {
                series[0].1
            } else if i == series.len() {
                series[series.len() - 1].1
            } else {
                let (s0, v0) = series[i - 1];
                let (s1, v1) = series[i];
                let t = (step - s0) as f64 / (s1 - s0) as f64;
                v0 + t * (v1 - v0)
            }
        }
    }
}

pub fn write_aggregated_csv(path: &Path, agg: &AggregatedCurves) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "step,metric,mean,std,n_seeds")?;
    for p in &agg.points {
        writeln!(w, "{},{},{},{},{}", p.step, p.metric, p.mean, p.std, p.n_seeds)?;
    }
    w.flush()?;
    Ok(())
}

/// A Leduc seat controller used in tournaments. Implementations must pick
/// a legal action index given the encoded observation and mask.
pub trait Agent {
    fn act(&mut self, obs: &[f64], mask: &[bool]) -> Result<usize>;
}

/// Greedy policy seat.
pub struct PolicyAgent(pub Policy);

impl Agent for PolicyAgent {
    fn act(&mut self, obs: &[f64], mask: &[bool]) -> Result<usize> {
        self.0.greedy(obs, mask)?.discrete()
    }
}

/// Greedy Q-function seat.
pub struct QAgent(pub QFunction);

impl Agent for QAgent {
    fn act(&mut self, obs: &[f64], mask: &[bool]) -> Result<usize> {
        self.0.greedy(obs, mask)
    }
}

/// Uniform random legal seat.
pub struct RandomAgent {
    rng: rand_chacha::ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        RandomAgent { rng: crate::rng::stream(seed, "agent.random") }
    }
}

impl Agent for RandomAgent {
    fn act(&mut self, _obs: &[f64], mask: &[bool]) -> Result<usize> {
        let legal: Vec<usize> = (0..mask.len()).filter(|&a| mask[a]).collect();
        if legal.is_empty() {
            return Err(Error::state("empty legal mask"));
        }
        Ok(legal[self.rng.gen_range(0..legal.len())])
    }
}

/// Always folds when facing a bet, otherwise checks. Useful as a strictly
/// losing baseline.
pub struct FoldAgent;

impl Agent for FoldAgent {
    fn act(&mut self, _obs: &[f64], mask: &[bool]) -> Result<usize> {
        if mask[leduc::ACT_FOLD] {
            Ok(leduc::ACT_FOLD)
        } else {
            Ok(leduc::ACT_CALL)
        }
    }
}

fn play_hand(deal: Deal, seat0: &mut dyn Agent, seat1: &mut dyn Agent) -> Result<[f64; 2]> {
    let mut state = HandState::new(deal);
    while !state.is_terminal() {
        let player = state.to_act;
        let obs = state.encode(player);
        let mask = state.legal_mask();
        let action = if player == 0 {
            seat0.act(&obs, &mask)?
        } else {
            seat1.act(&obs, &mask)?
        };
        state = state.apply(action)?;
    }
    state.payoffs()
}

/// Plays `n_hands` (even) of duplicate Leduc: each physical deal is played
/// twice with the agents' seats swapped, which cancels card luck exactly.
/// Returns agent A's payoff in milli-big-blinds per hand.
pub fn run_tournament(
    agent_a: &mut dyn Agent,
    agent_b: &mut dyn Agent,
    n_hands: usize,
    seed: u64,
) -> Result<f64> {
    if n_hands == 0 || n_hands % 2 != 0 {
        return Err(Error::config(format!(
            "n_hands must be positive and even for mirrored seating, got {n_hands}"
        )));
    }
    let mut deal_rng = crate::rng::stream(seed, "tournament.deals");
    let mut chips_a = 0.0;
    for _ in 0..n_hands / 2 {
        let deal = Deal::draw(&mut deal_rng);
        let p1 = play_hand(deal, agent_a, agent_b)?;
        chips_a += p1[0];
        let p2 = play_hand(deal, agent_b, agent_a)?;
        chips_a += p2[1];
    }
    Ok(1000.0 * (chips_a / BIG_BLIND_CHIPS) / n_hands as f64)
}

/// One-sample two-sided t-test of per-seed payoffs against zero, with the
/// Bonferroni-adjusted significance threshold `p < 0.0025`.
#[derive(Debug, Clone, PartialEq)]
pub struct Significance {
    pub mean: f64,
    pub stderr: f64,
    pub p_value: f64,
    pub significant: bool,
    pub n_seeds: usize,
}

pub const BONFERRONI_THRESHOLD: f64 = 0.0025;

pub fn significance(per_seed_payoffs: &[f64]) -> Result<Significance> {
    let n = per_seed_payoffs.len();
    if n < 2 {
        return Err(Error::state("significance needs at least 2 seeds"));
    }
    let mean = per_seed_payoffs.iter().sum::<f64>() / n as f64;
    let var = per_seed_payoffs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
        / (n as f64 - 1.0);
    let stderr = (var / n as f64).sqrt();
    let p_value = if stderr == 0.0 {
        if mean == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        let t = mean / stderr;
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok(Significance {
        mean,
        stderr,
        p_value,
        significant: p_value < BONFERRONI_THRESHOLD,
        n_seeds: n,
    })
}

pub fn write_tournament_csv(path: &Path, rows: &[(u64, usize, f64)]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "seed,hands,mbb_per_hand")?;
    for (seed, hands, mbb) in rows {
        writeln!(w, "{seed},{hands},{mbb}")?;
    }
    w.flush()?;
    Ok(())
}

/// Argmax-action grid of a learned MountainCar reward over a
/// `resolution x resolution` lattice spanning the state bounds.
#[derive(Debug, Clone)]
pub struct RewardGrid {
    pub resolution: usize,
    /// Row-major cells: (position, velocity, argmax action index).
    pub cells: Vec<(f64, f64, usize)>,
}

pub const GRID_ACTION_LABELS: [&str; 3] = ["L", "N", "R"];

impl RewardGrid {
    /// Fraction of cells preferring each action.
    pub fn action_shares(&self) -> [f64; 3] {
        let mut counts = [0usize; 3];
        for &(_, _, a) in &self.cells {
            counts[a] += 1;
        }
        let n = self.cells.len().max(1) as f64;
        [counts[0] as f64 / n, counts[1] as f64 / n, counts[2] as f64 / n]
    }
}

pub fn reward_grid(disc: &Discriminator, resolution: usize) -> Result<RewardGrid> {
    if resolution < 2 {
        return Err(Error::config("grid resolution must be at least 2"));
    }
    let n_actions = match &disc.space {
        ActionSpace::Discrete { n } if *n == 3 => *n,
        _ => {
            return Err(Error::UnsupportedMetric(
                "reward grids require the 3-action discrete MountainCar space".into(),
            ))
        }
    };
    if disc.net.input_dim() != 2 + n_actions {
        return Err(Error::UnsupportedMetric(
            "reward grids require a 2-dimensional state space".into(),
        ));
    }
    let lattice = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (resolution - 1) as f64;
    let mut cells = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        let pos = lattice(mountain_car::POS_MIN, mountain_car::POS_MAX, i);
        for j in 0..resolution {
            let vel = lattice(-mountain_car::VEL_MAX, mountain_car::VEL_MAX, j);
            let obs = mountain_car::encode(pos, vel);
            let mut best = (0usize, f64::NEG_INFINITY);
            for a in 0..n_actions {
                let f = disc.reward(&obs, &Action::Discrete(a))?;
                if f > best.1 {
                    best = (a, f);
                }
            }
            cells.push((pos, vel, best.0));
        }
    }
    Ok(RewardGrid { resolution, cells })
}

pub fn write_grid_csv(path: &Path, grid: &RewardGrid) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "pos,vel,action_label")?;
    for &(pos, vel, a) in &grid.cells {
        writeln!(w, "{pos},{vel},{}", GRID_ACTION_LABELS[a])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvId;
    use crate::expert::{DemoStep, Trajectory};

    fn demo_from_policy(policy: &Policy, n: usize) -> DemoSet {
        let mut rng = crate::rng::stream(4, "eval.test");
        let mask = vec![true, true, true];
        let trajectories = (0..n)
            .map(|i| {
                let obs = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let action = policy.greedy(&obs, &mask).unwrap();
                Trajectory {
                    seed: i as u64,
                    steps: vec![DemoStep { obs, action, r_env: Some(-1.0), done: true, mask: mask.clone() }],
                }
            })
            .collect();
        DemoSet {
            env: EnvId::MountainCar,
            obs_dim: 2,
            action_space: ActionSpace::Discrete { n: 3 },
            trajectories,
            mean_return: -1.0,
            seeds: vec![0],
        }
    }

    #[test]
    fn self_alignment_is_100_percent() {
        let policy = Policy::new(2, &[8], &ActionSpace::Discrete { n: 3 }, 9).unwrap();
        let demos = demo_from_policy(&policy, 50);
        assert_eq!(action_alignment(&policy, &demos).unwrap(), 100.0);
    }

    #[test]
    fn random_policies_align_about_a_third() {
        // Argmax of iid random logits is uniform over the three actions.
        let expert = Policy::new(2, &[8], &ActionSpace::Discrete { n: 3 }, 1).unwrap();
        let demos = demo_from_policy(&expert, 400);
        let mut total = 0.0;
        let trials = 25;
        for s in 0..trials {
            let p = Policy::new(2, &[8], &ActionSpace::Discrete { n: 3 }, 1000 + s).unwrap();
            total += action_alignment(&p, &demos).unwrap();
        }
        let mean = total / trials as f64;
        assert!((mean - 33.3).abs() < 8.0, "mean alignment {mean}");
    }

    #[test]
    fn empty_demo_set_is_an_error() {
        let policy = Policy::new(2, &[8], &ActionSpace::Discrete { n: 3 }, 9).unwrap();
        let mut demos = demo_from_policy(&policy, 1);
        demos.trajectories.clear();
        assert!(action_alignment(&policy, &demos).is_err());
    }

    #[test]
    fn alignment_unsupported_for_continuous() {
        let space = ActionSpace::Continuous { low: vec![-2.0], high: vec![2.0] };
        let policy = Policy::new(3, &[8], &space, 0).unwrap();
        let expert = Policy::new(2, &[8], &ActionSpace::Discrete { n: 3 }, 1).unwrap();
        let demos = demo_from_policy(&expert, 5);
        assert!(matches!(
            action_alignment(&policy, &demos),
            Err(Error::UnsupportedMetric(_))
        ));
    }

    #[test]
    fn alignment_invariant_under_monotone_logit_transforms() {
        let policy = Policy::new(2, &[8], &ActionSpace::Discrete { n: 3 }, 3).unwrap();
        let demos = demo_from_policy(&Policy::new(2, &[8], &ActionSpace::Discrete { n: 3 }, 5).unwrap(), 100);
        let base = action_alignment(&policy, &demos).unwrap();
        // Scaling the output layer by a positive constant preserves argmax.
        let mut scaled = policy.clone();
        {
            let last = scaled.net.layers_mut().last_mut().unwrap();
            last.weights.iter_mut().for_each(|w| *w *= 3.5);
            last.biases.iter_mut().for_each(|b| *b *= 3.5);
        }
        assert_eq!(base, action_alignment(&scaled, &demos).unwrap());
    }

    #[test]
    fn identical_runs_aggregate_with_zero_std() {
        let run: Vec<CurvePoint> =
            (0..5).map(|i| CurvePoint::new(i, "m", 2.0)).collect();
        let agg = aggregate_curves(&vec![run; 10]).unwrap();
        assert!(agg.points.iter().all(|p| p.std == 0.0 && p.mean == 2.0 && p.n_seeds == 10));
        assert!(!agg.single_run);
    }

    #[test]
    fn two_constant_runs_have_two_point_stats() {
        let a: Vec<CurvePoint> = (0..4).map(|i| CurvePoint::new(i, "m", 0.0)).collect();
        let b: Vec<CurvePoint> = (0..4).map(|i| CurvePoint::new(i, "m", 2.0)).collect();
        let agg = aggregate_curves(&[a, b]).unwrap();
        for p in &agg.points {
            assert_eq!(p.mean, 1.0);
            assert_eq!(p.std, 1.0);
        }
    }

    #[test]
    fn misaligned_linear_grids_interpolate_exactly() {
        // Runs are linear in step, so interpolation is exact everywhere.
        let f1 = |s: u64| 3.0 * s as f64 + 1.0;
        let f2 = |s: u64| -2.0 * s as f64 + 5.0;
        let a: Vec<CurvePoint> = [0u64, 2, 4, 6, 8].iter().map(|&s| CurvePoint::new(s, "m", f1(s))).collect();
        let b: Vec<CurvePoint> = [0u64, 3, 6, 9].iter().map(|&s| CurvePoint::new(s, "m", f2(s))).collect();
        let agg = aggregate_curves(&[a, b]).unwrap();
        for p in &agg.points {
            let want = (f1(p.step) + f2(p.step)) / 2.0;
            assert!((p.mean - want).abs() < 1e-9, "step {}: {} vs {want}", p.step, p.mean);
        }
    }

    #[test]
    fn single_run_warns() {
        let run: Vec<CurvePoint> = vec![CurvePoint::new(0, "m", 1.0)];
        let agg = aggregate_curves(&[run]).unwrap();
        assert!(agg.single_run);
        assert_eq!(agg.points[0].std, 0.0);
    }

    /// An agent that always raises when legal, else calls.
    struct RaiseAgent;
    impl Agent for RaiseAgent {
        fn act(&mut self, _obs: &[f64], mask: &[bool]) -> Result<usize> {
            Ok(if mask[leduc::ACT_RAISE] { leduc::ACT_RAISE } else { leduc::ACT_CALL })
        }
    }

    #[test]
    fn self_play_mirrored_is_exactly_zero() {
        let mut a = RaiseAgent;
        let mut b = RaiseAgent;
        let mbb = run_tournament(&mut a, &mut b, 2000, 3).unwrap();
        assert_eq!(mbb, 0.0);
    }

    #[test]
    fn tournament_antisymmetry() {
        let mut a = RaiseAgent;
        let mut b = FoldAgent;
        let ab = run_tournament(&mut a, &mut b, 2000, 5).unwrap();
        let ba = run_tournament(&mut b, &mut a, 2000, 5).unwrap();
        assert_eq!(ab, -ba);
    }

    #[test]
    fn fold_always_loses_money() {
        let mut a = FoldAgent;
        let mut b = RandomAgent::new(11);
        let mbb = run_tournament(&mut a, &mut b, 20_000, 7).unwrap();
        assert!(mbb < 0.0, "fold-always scored {mbb}");
    }

    #[test]
    fn odd_hand_counts_are_rejected() {
        let mut a = RaiseAgent;
        let mut b = FoldAgent;
        assert!(run_tournament(&mut a, &mut b, 101, 0).is_err());
    }

    #[test]
    fn significance_zero_variance() {
        let s = significance(&[5.0; 8]).unwrap();
        assert_eq!(s.stderr, 0.0);
        assert!(s.p_value < 1e-10);
        assert!(s.significant);
    }

    #[test]
    fn significance_null_case() {
        let s = significance(&[-1.0, 1.0, -2.0, 2.0, -3.0, 3.0]).unwrap();
        assert_eq!(s.mean, 0.0);
        assert!((s.p_value - 1.0).abs() < 1e-9);
        assert!(!s.significant);
    }

    #[test]
    fn significance_needs_two_seeds() {
        assert!(significance(&[1.0]).is_err());
    }

    fn zero_disc() -> Discriminator {
        let mut d = Discriminator::new(2, &[8], &ActionSpace::Discrete { n: 3 }, 0).unwrap();
        for layer in d.net.layers_mut() {
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
            layer.biases.iter_mut().for_each(|b| *b = 0.0);
        }
        d
    }

    #[test]
    fn constant_zero_reward_grid_tie_breaks_to_action_zero() {
        let grid = reward_grid(&zero_disc(), 8).unwrap();
        assert!(grid.cells.iter().all(|&(_, _, a)| a == 0));
        assert_eq!(grid.action_shares(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn uniform_offset_on_one_action_dominates() {
        let mut d = zero_disc();
        {
            // Bias the output through the weight on action 2's one-hot lane:
            // f(s, a) = w * onehot[a == 2], so action 2 wins everywhere.
            let first = &mut d.net.layers_mut()[0];
            // input layout: [pos, vel, a0, a1, a2]
            for o in 0..8 {
                first.weights[o * 5 + 4] = 0.3;
            }
            let last = d.net.layers_mut().last_mut().unwrap();
            last.weights.iter_mut().for_each(|w| *w = 1.0);
        }
        let grid = reward_grid(&d, 8).unwrap();
        assert!(grid.cells.iter().all(|&(_, _, a)| a == 2));
    }

    #[test]
    fn grid_invariant_under_state_only_offsets() {
        // Adding h(s) to every action's reward cannot change the argmax.
        let d = Discriminator::new(2, &[8], &ActionSpace::Discrete { n: 3 }, 77).unwrap();
        let grid = reward_grid(&d, 10).unwrap();
        let h_net = crate::nncore::init_network(&[2, 8, 1], 123).unwrap();
        for &(pos, vel, argmax) in &grid.cells {
            let obs = mountain_car::encode(pos, vel);
            let h = h_net.apply(&obs).unwrap()[0];
            let mut best = (0usize, f64::NEG_INFINITY);
            for a in 0..3 {
                let f = d.reward(&obs, &Action::Discrete(a)).unwrap() + 17.0 * h;
                if f > best.1 {
                    best = (a, f);
                }
            }
            assert_eq!(best.0, argmax);
        }
    }

    #[test]
    fn continuous_disc_grid_is_unsupported() {
        let space = ActionSpace::Continuous { low: vec![-2.0], high: vec![2.0] };
        let d = Discriminator::new(3, &[8], &space, 0).unwrap();
        assert!(matches!(reward_grid(&d, 8), Err(Error::UnsupportedMetric(_))));
    }
}
