use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turbonlc::constellation::{extrinsic_llrs, SoftSymbolStats};
use turbonlc::fec::decode;
use turbonlc::fiber::propagate_span;
use turbonlc::harness::synthetic::{synthetic_trial, SyntheticConfig};
use turbonlc::turbo::lmmse_equalize;
use turbonlc::{Complex64, Constellation, DualPolSignal, FiberParams, LdpcCode, SlidingWindowConfig};

fn code() -> LdpcCode {
    LdpcCode::parse(include_str!("../../core/codes/rate45_n2400.pcm")).unwrap()
}

fn demapper(c: &mut Criterion) {
    let con = Constellation::new(64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 4096;
    let est: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0))).collect();
    let mu = vec![0.9; n];
    let nu = vec![0.5; n];
    let priors: Vec<f64> = (0..n * 6).map(|_| rng.random_range(-4.0..4.0)).collect();
    c.bench_function("extrinsic_llrs 64QAM x4096", |b| {
        b.iter(|| extrinsic_llrs(black_box(&est), &mu, &nu, &priors, &con).unwrap())
    });
}

fn ldpc(c: &mut Criterion) {
    let code = code();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
    let cw = code.encode(&info).unwrap();
    let llr: Vec<f64> = cw
        .iter()
        .map(|&b| (if b == 1 { 2.0 } else { -2.0 }) + rng.random_range(-2.5..2.5))
        .collect();
    c.bench_function("ldpc decode n2400 50 it", |b| b.iter(|| decode(&code, black_box(&llr), 50).unwrap()));
}

fn lmmse(c: &mut Criterion) {
    let code = code();
    let trial = synthetic_trial(
        &SyntheticConfig {
            n_blocks: 5,
            ..SyntheticConfig::default()
        },
        &code,
    )
    .unwrap();
    let cfg = SlidingWindowConfig::default();
    let t = trial.frame.len();
    let priors = SoftSymbolStats::uninformed(t, trial.constellation.energy());
    c.bench_function("lmmse_equalize 3 taps, frame", |b| {
        b.iter(|| {
            lmmse_equalize(
                [&trial.rx[0], &trial.rx[1]],
                black_box(&trial.channel),
                [&priors, &priors],
                &cfg,
                trial.noise_var,
                trial.constellation.energy(),
            )
            .unwrap()
        })
    });
    let mut g = c.benchmark_group("turbo");
    g.sample_size(10);
    g.bench_function("turbo_loop synthetic 5 blocks", |b| b.iter(|| trial.run(black_box(&cfg), &code).unwrap()));
    g.finish();
}

fn ssfm(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 1 << 14;
    let mut draw = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * 1e-2;
    let x: Vec<Complex64> = (0..n).map(|_| draw()).collect();
    let y: Vec<Complex64> = (0..n).map(|_| draw()).collect();
    let sig = DualPolSignal::new(x, y, 128e9).unwrap();
    let p = FiberParams::default();
    let mut g = c.benchmark_group("fiber");
    g.sample_size(10);
    g.bench_function("propagate_span 50 km, 16k samples", |b| b.iter(|| propagate_span(black_box(&sig), &p).unwrap()));
    g.finish();
}

criterion_group!(benches, demapper, ldpc, lmmse, ssfm);
criterion_main!(benches);
