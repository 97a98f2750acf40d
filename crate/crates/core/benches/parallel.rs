use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use portdist::allocate::{backtest_with, BacktestConfig, Strategy};
use portdist::cdf::{linspace, score_curve_with};
use portdist::io::ReturnMatrix;
use portdist::scoredist::{estimate_score_distribution_with, PerfMeasureKind, ReturnSampler};
use portdist::{Execution, MarketReturns, PortfolioWeights};

fn modes() -> Vec<(&'static str, Execution)> {
    let mut v = vec![("sequential", Execution::Sequential)];
    #[cfg(feature = "parallel")]
    v.push(("parallel", Execution::Parallel));
    v
}

fn iid_sampler(n: usize) -> ReturnSampler {
    let cov: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0035 } else { 0.0 }).collect())
        .collect();
    ReturnSampler::gaussian(vec![0.0; n], &cov, 1).unwrap()
}

fn score_distribution(c: &mut Criterion) {
    let sampler = iid_sampler(10);
    let w = PortfolioWeights::equal(10);
    let mut g = c.benchmark_group("score_distribution_1e5");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| estimate_score_distribution_with(&w, &sampler, 100_000, exec).unwrap())
        });
    }
    g.finish();
}

fn curve(c: &mut Criterion) {
    let r = MarketReturns::new((0..500).map(|i| ((i * 37 % 101) as f64 - 50.0) * 1e-3).collect()).unwrap();
    let grid = linspace(r.min(), r.max(), 400);
    let mut g = c.benchmark_group("score_curve_n500");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| score_curve_with(&r, &grid, exec))
        });
    }
    g.finish();
}

fn rolling_backtest(c: &mut Criterion) {
    let rows = iid_sampler(8).draws(160, Execution::Sequential).unwrap();
    let data = ReturnMatrix::unnamed(rows).unwrap();
    let cfg = BacktestConfig {
        window: 60,
        strategies: vec![
            Strategy::EqualWeight,
            Strategy::MeanVariance,
            Strategy::Score(PerfMeasureKind::D),
        ],
        max_iters: 100,
        ..BacktestConfig::default()
    };
    let mut g = c.benchmark_group("backtest_100_dates");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| backtest_with(&data, &cfg, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, score_distribution, curve, rolling_backtest);
criterion_main!(benches);
