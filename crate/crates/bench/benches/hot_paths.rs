//! Criterion benchmarks for the numeric hot paths: network forward and
//! backward passes, discriminator batch updates, Leduc hand simulation,
//! and mirrored tournament throughput.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use rand::Rng;

use irlab_core::agents::{compute_gae, Policy, QFunction, RolloutBatch};
use irlab_core::envs::leduc::{Deal, HandState, ACT_CALL, ACT_RAISE};
use irlab_core::envs::{Action, ActionSpace};
use irlab_core::eval::{run_tournament, Agent, QAgent, RandomAgent};
use irlab_core::irl::{disc_update, DemoBatch, DiscBatch, Discriminator, LossPath};
use irlab_core::nncore::{init_network, AdamState};

fn bench_network(c: &mut Criterion) {
    let mut net = init_network(&[36, 64, 64, 3], 0).unwrap();
    let x: Vec<f64> = (0..36).map(|i| (i as f64 * 0.13).sin()).collect();
    let mut group = c.benchmark_group("network");
    group.throughput(Throughput::Elements(1));
    group.bench_function("forward_36x64x64x3", |b| {
        b.iter(|| std::hint::black_box(net.forward(&x).unwrap()[0]))
    });
    group.bench_function("forward_backward_36x64x64x3", |b| {
        b.iter(|| {
            net.forward(&x).unwrap();
            std::hint::black_box(net.backward(&[1.0, 0.0, -1.0]).unwrap())
        })
    });
    group.finish();
}

fn bench_disc_update(c: &mut Criterion) {
    let space = ActionSpace::Discrete { n: 3 };
    let mut disc = Discriminator::new(2, &[64, 64], &space, 0).unwrap();
    let mut policy = Policy::new(2, &[64, 64], &space, 1).unwrap();
    let mut opt = AdamState::new(&disc.net, 1e-4);
    let mut rng = rand::thread_rng();
    let n = 256;
    let mut expert = DemoBatch::default();
    let mut pb = DiscBatch::default();
    for _ in 0..n {
        let obs = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        expert.obs.push(obs.clone());
        expert.actions.push(Action::Discrete(rng.gen_range(0..3)));
        expert.masks.push(vec![true, true, true]);
        pb.obs.push(obs);
        pb.act_enc.push(disc.encode_action(&Action::Discrete(rng.gen_range(0..3))).unwrap());
        pb.logpi.push(-1.1);
        pb.masks.push(vec![true, true, true]);
    }
    let mut group = c.benchmark_group("irl");
    group.throughput(Throughput::Elements(n as u64));
    group.bench_function("disc_update_256", |b| {
        b.iter(|| {
            disc_update(&mut disc, &mut opt, &mut policy, &expert, &pb, LossPath::Airl).unwrap()
        })
    });
    group.finish();
}

fn bench_gae(c: &mut Criterion) {
    let mut rng = rand::thread_rng();
    let n = 2048;
    let template = {
        let mut r = RolloutBatch::default();
        for i in 0..n {
            r.obs.push(vec![0.0]);
            r.actions.push(Action::Discrete(0));
            r.log_probs.push(0.0);
            r.masks.push(Vec::new());
            r.rewards.push(rng.gen_range(-1.0..1.0));
            r.env_rewards.push(0.0);
            r.values.push(rng.gen_range(-1.0..1.0));
            r.dones.push(i % 200 == 199);
        }
        r
    };
    c.bench_function("gae_2048", |b| {
        b.iter_batched(
            || template.clone(),
            |mut r| compute_gae(&mut r, 0.99, 0.95),
            BatchSize::SmallInput,
        )
    });
}

fn bench_leduc(c: &mut Criterion) {
    let mut group = c.benchmark_group("leduc");
    group.bench_function("hand_check_raise_line", |b| {
        b.iter(|| {
            let mut s = HandState::new(Deal { private: [0, 3], public: 5 });
            s = s.apply(ACT_RAISE).unwrap();
            s = s.apply(ACT_CALL).unwrap();
            s = s.apply(ACT_RAISE).unwrap();
            s = s.apply(ACT_CALL).unwrap();
            std::hint::black_box(s.payoffs().unwrap())
        })
    });
    group.bench_function("tournament_1000_hands_q_vs_random", |b| {
        let q = QFunction::new(36, &[64, 64], 3, 0).unwrap();
        b.iter(|| {
            let mut a: Box<dyn Agent> = Box::new(QAgent(q.clone()));
            let mut r: Box<dyn Agent> = Box::new(RandomAgent::new(7));
            std::hint::black_box(run_tournament(a.as_mut(), r.as_mut(), 1000, 3).unwrap())
        })
    });
    group.finish();
}

criterion_group!(benches, bench_network, bench_disc_update, bench_gae, bench_leduc);
criterion_main!(benches);
