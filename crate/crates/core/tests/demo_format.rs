//! Freezes the demos.jsonl field names with a golden file, checks the
//! save/load round trip on generated sets, and verifies that recorded
//! returns replay exactly from the stored episode seeds.

use proptest::prelude::*;

use irlab_core::envs::{make_env, Action, ActionSpace, EnvId};
use irlab_core::expert::{load_demos, record_demos, save_demos, DemoSet, DemoStep, Trajectory};

fn golden_set() -> DemoSet {
    DemoSet {
        env: EnvId::MountainCar,
        obs_dim: 2,
        action_space: ActionSpace::Discrete { n: 3 },
        trajectories: vec![Trajectory {
            seed: 42,
            steps: vec![
                DemoStep {
                    obs: vec![-0.5, 0.25],
                    action: Action::Discrete(2),
                    r_env: Some(-1.0),
                    done: false,
                    mask: vec![true, true, true],
                },
                DemoStep {
                    obs: vec![-0.375, 0.5],
                    action: Action::Discrete(0),
                    r_env: Some(-1.0),
                    done: true,
                    mask: vec![true, true, true],
                },
            ],
        }],
        mean_return: -2.0,
        seeds: vec![7],
    }
}

/// The exact serialized bytes are part of the public contract; any change
/// here is a format break and needs a version bump.
#[test]
fn golden_demo_file_bytes_are_frozen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demos.jsonl");
    save_demos(&golden_set(), &path).unwrap();
    let got = std::fs::read_to_string(&path).unwrap();
    let want = concat!(
        r#"{"version":1,"env":"mountaincar","obs_dim":2,"action_space":{"type":"discrete","n":3},"mean_return":-2.0,"seeds":[7]}"#,
        "\n",
        r#"{"seed":42,"steps":[{"obs":[-0.5,0.25],"action":2,"r_env":-1.0,"done":false,"mask":[true,true,true]},{"obs":[-0.375,0.5],"action":0,"r_env":-1.0,"done":true,"mask":[true,true,true]}]}"#,
        "\n",
    );
    assert_eq!(got, want);
}

#[test]
fn continuous_actions_serialize_as_arrays() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demos.jsonl");
    let set = DemoSet {
        env: EnvId::Pendulum,
        obs_dim: 3,
        action_space: ActionSpace::Continuous { low: vec![-2.0], high: vec![2.0] },
        trajectories: vec![Trajectory {
            seed: 0,
            steps: vec![DemoStep {
                obs: vec![1.0, 0.0, 0.0],
                action: Action::Continuous(vec![0.5]),
                r_env: Some(0.0),
                done: true,
                mask: vec![],
            }],
        }],
        mean_return: 0.0,
        seeds: vec![0],
    };
    save_demos(&set, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains(r#""action":[0.5]"#), "{text}");
    assert_eq!(load_demos(&path).unwrap(), set);
}

/// Replays recorded MountainCar demos from their stored episode seeds and
/// checks the stored per-trajectory return against the env's recomputed
/// return.
#[test]
fn recorded_returns_replay_exactly() {
    // A scripted energy-pumping expert: thrust along the velocity sign.
    // It reaches the goal reliably, so the recorded returns are
    // non-degenerate.
    let mut env = make_env(EnvId::MountainCar);
    let mut demos = Vec::new();
    for i in 0..10u64 {
        let mut state = env.reset(i);
        let mut steps = Vec::new();
        loop {
            let a = if state.obs[1] >= 0.0 { 2 } else { 0 };
            let res = env.step(&Action::Discrete(a)).unwrap();
            steps.push(DemoStep {
                obs: state.obs.clone(),
                action: Action::Discrete(a),
                r_env: Some(res.reward),
                done: res.state.done,
                mask: state.legal_mask.clone(),
            });
            state = res.state;
            if state.done {
                break;
            }
        }
        demos.push(Trajectory { seed: i, steps });
    }
    for t in &demos {
        let mut env = make_env(EnvId::MountainCar);
        env.reset(t.seed);
        let mut replayed = 0.0;
        for step in &t.steps {
            replayed += env.step(&step.action).unwrap().reward;
        }
        assert_eq!(replayed, t.env_return(), "trajectory seed {}", t.seed);
    }
}

/// The library recorder itself must satisfy the same replay identity.
#[test]
fn recorder_outputs_replay_exactly() {
    use irlab_core::agents::QFunction;
    use irlab_core::expert::ExpertAgent;
    let q = QFunction::new(36, &[8], 3, 3).unwrap();
    let mut agent = ExpertAgent::Dqn(q);
    let demos = record_demos(&mut agent, EnvId::Leduc, 40, 11, true).unwrap();
    assert_eq!(demos.trajectories.len(), 40);
    for (i, t) in demos.trajectories.iter().enumerate() {
        let mut env = make_env(EnvId::Leduc);
        env.set_agent_seat(i % 2);
        env.reset(t.seed);
        let mut replayed = 0.0;
        for step in &t.steps {
            replayed += env.step(&step.action).unwrap().reward;
        }
        assert_eq!(replayed, t.env_return(), "hand {i}");
    }
}

fn arb_demoset() -> impl Strategy<Value = DemoSet> {
    let step = (
        proptest::collection::vec(-1.0f64..1.0, 2),
        0usize..3,
        proptest::option::of(-5.0f64..5.0),
        proptest::bool::ANY,
    )
        .prop_map(|(obs, a, r, done)| DemoStep {
            obs,
            action: Action::Discrete(a),
            r_env: r,
            done,
            mask: vec![true, true, true],
        });
    let traj = (0u64..1000, proptest::collection::vec(step, 1..6))
        .prop_map(|(seed, steps)| Trajectory { seed, steps });
    (proptest::collection::vec(traj, 1..5), -10.0f64..10.0).prop_map(|(trajectories, mr)| DemoSet {
        env: EnvId::MountainCar,
        obs_dim: 2,
        action_space: ActionSpace::Discrete { n: 3 },
        trajectories,
        mean_return: mr,
        seeds: vec![0, 1],
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn save_load_round_trip(set in arb_demoset()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demos.jsonl");
        save_demos(&set, &path).unwrap();
        let back = load_demos(&path).unwrap();
        prop_assert_eq!(back, set);
    }
}
