//! Sequential vs rayon execution of the batched kernels.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlpp_core::env::EnvParams;
use rlpp_core::harness::{run_seeds, Controller, EvalOptions};
use rlpp_core::par::Exec;
use rlpp_core::sac::{Mlp, MlpCache, ReplayBuffer, Sac, SacConfig};
use rlpp_core::track::{synthetic_oval, ProfileLimits};
use rlpp_core::Circuit;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn mlp_pass(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let batch = 256;
    let net = Mlp::new(&[127, 256, 256, 1], 1.0, &mut rng);
    let x: Vec<f64> = (0..batch * 127).map(|_| rng.random_range(-1.0..1.0)).collect();
    let d_out = vec![1.0 / batch as f64; batch];
    let mut g = c.benchmark_group("mlp_forward_backward");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            let mut cache = MlpCache::default();
            let mut grads = net.zero_grads();
            b.iter(|| {
                net.forward(exec, &x, batch, &mut cache);
                black_box(net.backward(exec, &cache, &d_out, Some(&mut grads), true));
            })
        });
    }
    g.finish();
}

fn sac_update(c: &mut Criterion) {
    let obs_dim = 125;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut buffer = ReplayBuffer::new(obs_dim, 2, 4096);
    for _ in 0..4096 {
        let o: Vec<f64> = (0..obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n: Vec<f64> = (0..obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        buffer.push(&o, &[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], rng.random(), &n, false);
    }
    let batch = buffer.sample(256, &mut rng, None).unwrap();
    let mut g = c.benchmark_group("sac_update");
    g.sample_size(10);
    for hidden in [64, 256] {
        for (name, exec) in MODES {
            let cfg = SacConfig { hidden: vec![hidden, hidden], ..Default::default() };
            let mut agent = Sac::new(obs_dim, cfg, exec, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(3);
            g.bench_function(BenchmarkId::new(name, hidden), |b| b.iter(|| black_box(agent.update(&batch, &mut r).unwrap())));
        }
    }
    g.finish();
}

fn eval_seeds(c: &mut Criterion) {
    let circuit = Arc::new(Circuit::with_generated_raceline(synthetic_oval(0.1, 0.6), &ProfileLimits::default()).unwrap());
    let mut params = EnvParams::default();
    params.pp.alpha_v = 0.7;
    let opts = EvalOptions { laps: 2, ..Default::default() };
    let seeds: Vec<u64> = (0..4).collect();
    let mut g = c.benchmark_group("eval_seeds");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(run_seeds(exec, &circuit, &params, &Controller::Pp, &opts, &seeds)))
        });
    }
    g.finish();
}

criterion_group!(benches, mlp_pass, sac_update, eval_seeds);
criterion_main!(benches);
