use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use jump_telegraph::hedging::{replication_backtest, sample_paths};
use jump_telegraph::mc::{mc_price, McMeasure};
use jump_telegraph::par::Execution;
use jump_telegraph::pricer::call::{CallSpec, SeriesControls};
use jump_telegraph::pricer::european::Call;
use jump_telegraph::regime::{ModelParams, Regime};

fn market() -> ModelParams {
    ModelParams {
        c_plus: 0.2,
        c_minus: -0.1,
        lambda_plus: 1.0,
        lambda_minus: 0.8,
        h_plus: -0.3,
        h_minus: 0.2,
        r_plus: 0.05,
        r_minus: 0.03,
        s0: 100.0,
        sigma0: Regime::Plus,
    }
}

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn mc_call(c: &mut Criterion) {
    let p = market();
    let mut group = c.benchmark_group("mc_call_200k");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| mc_price(black_box(&p), &Call { strike: 100.0 }, 1.0, 200_000, 1, McMeasure::Martingale, exec).unwrap())
        });
    }
    group.finish();
}

fn backtest(c: &mut Criterion) {
    let p = market();
    let spec = CallSpec::new(100.0, 1.0).unwrap();
    let paths = sample_paths(&p, 1.0, 64, 1, Execution::Sequential).unwrap();
    let mut group = c.benchmark_group("call_backtest_64x1000");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| replication_backtest(black_box(&paths), &spec, &p, 1000, &SeriesControls::default(), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, mc_call, backtest);
criterion_main!(benches);
