use portdist::allocate::{
    backtest, mean_variance_portfolio, optimize_score_portfolio, BacktestConfig, OptimizeConfig, Scenarios,
    Strategy,
};
use portdist::io::ReturnMatrix;
use portdist::scoredist::{PerfMeasureKind, ReturnSampler};
use portdist::stats::{quadratic_form, sample_covariance};
use portdist::{Execution, PortfolioWeights};

fn fixture(name: &str) -> ReturnMatrix {
    ReturnMatrix::read_path(format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn exchangeable(t: usize, n: usize, seed: u64) -> ReturnMatrix {
    // Equicorrelated normal returns: every permutation of assets has the same law.
    let cov: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.004 } else { 0.001 }).collect())
        .collect();
    let rows = ReturnSampler::gaussian(vec![0.0; n], &cov, seed)
        .unwrap()
        .draws(t, Execution::Sequential)
        .unwrap();
    ReturnMatrix::unnamed(rows).unwrap()
}

#[test]
fn mean_variance_on_industry_data_is_concentrated() {
    let cov = fixture("industry10_cov.csv");
    let mean = fixture("industry10_means.csv");
    let w = mean_variance_portfolio(mean.single_row().unwrap(), cov.square().unwrap(), Some(0.002)).unwrap();
    let held = w.as_slice().iter().filter(|&&x| x > 0.01).count();
    assert!(held <= 4, "{w:?}");
    let v = quadratic_form(cov.square().unwrap(), w.as_slice());
    assert!((v - 0.002).abs() <= 1e-6, "{v}");
}

#[test]
fn measure_b_stays_near_equal_weights() {
    let data = exchangeable(3000, 5, 17);
    let mut cfg = OptimizeConfig::new(PerfMeasureKind::B);
    cfg.scenarios = Scenarios::InSample;
    let out = optimize_score_portfolio(&data, &cfg).unwrap();
    let d = out.weights.l1_distance(&PortfolioWeights::equal(5));
    assert!(d <= 0.15, "L1 {d}, weights {:?}", out.weights);
    assert!(out.measure >= out.equal_weight_measure.unwrap());
}

#[test]
fn measure_b_with_equal_weight_variance() {
    let data = exchangeable(2000, 6, 4);
    let cov = sample_covariance(&data.rows);
    let mut cfg = OptimizeConfig::new(PerfMeasureKind::B);
    cfg.draws = 5000;
    cfg.variance_target = Some(quadratic_form(&cov, &[1.0 / 6.0; 6]));
    let out = optimize_score_portfolio(&data, &cfg).unwrap();
    let d = out.weights.l1_distance(&PortfolioWeights::equal(6));
    assert!(d <= 0.15, "L1 {d}, weights {:?}", out.weights);
}

#[test]
fn every_measure_improves_on_equal_weights() {
    let data = exchangeable(500, 4, 23);
    for m in ["A", "B", "C", "D"] {
        let mut cfg = OptimizeConfig::new(PerfMeasureKind::parse(m, 0.5).unwrap());
        cfg.scenarios = Scenarios::Bootstrap;
        cfg.draws = 2000;
        let out = optimize_score_portfolio(&data, &cfg).unwrap();
        let w = out.weights.as_slice();
        assert!(w.iter().all(|&x| x >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        assert!(out.measure >= out.equal_weight_measure.unwrap(), "{m}");
        assert!(out.log.windows(2).all(|p| p[1] >= p[0]), "{m}");
    }
}

#[test]
fn backtest_symmetric_equal_weight_scores() {
    let data = exchangeable(1300, 8, 99);
    let cfg = BacktestConfig {
        window: 12,
        strategies: vec![Strategy::EqualWeight],
        ..BacktestConfig::default()
    };
    let r = backtest(&data, &cfg).unwrap();
    let ew = &r.strategies[0];
    assert_eq!(r.periods, 1288);
    let se = ew.std_score / (ew.scores.len() as f64).sqrt();
    assert!(
        (ew.mean_score - 0.5).abs() <= 3.0 * se,
        "{} ± {se}",
        ew.mean_score
    );
    assert_eq!(ew.mean_turnover, Some(0.0));
    assert_eq!(r.covariance_estimator, "biased sample covariance");
}
