//! Monte Carlo distribution of a portfolio's score under a return model.

mod kde;
mod measures;
mod sampling;

pub use kde::{reflected_kde, silverman_bandwidth, GRID_POINTS};
pub use measures::{perf_measure_samples, PerfMeasureKind, DEFAULT_S_STAR};
pub(crate) use sampling::psd_factor;
pub use sampling::{sample_simplex, sample_simplex_with, ReturnSampler, PSD_TOL, SYMMETRY_TOL};

use serde::Serialize;

use crate::cdf::VarsiWorkspace;
use crate::market::{dot, PortfolioWeights};
use crate::stats::{mean, skewness, std_dev};
use crate::{Error, Execution, Result};

pub const MIN_DRAWS: usize = 100;
pub const DEFAULT_DRAWS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreDistribution {
    pub samples: Vec<f64>,
    pub kde_grid: Vec<f64>,
    pub kde_density: Vec<f64>,
    pub mean: f64,
    /// Unbiased.
    pub std: f64,
    pub skewness: f64,
}

impl ScoreDistribution {
    /// Summaries and KDE of a score sample.
    pub fn from_samples(samples: Vec<f64>, exec: Execution) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("no score samples".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::InvalidInput(format!("score {bad} outside [0, 1]")));
        }
        let (kde_grid, kde_density) = reflected_kde(&samples, GRID_POINTS, exec);
        Ok(Self {
            mean: mean(&samples),
            std: std_dev(&samples),
            skewness: skewness(&samples),
            samples,
            kde_grid,
            kde_density,
        })
    }
}

pub fn perf_measure(dist: &ScoreDistribution, kind: PerfMeasureKind) -> Result<f64> {
    perf_measure_samples(&dist.samples, kind)
}

/// Score of the portfolio `w` against the market `r`.
pub(crate) fn score_of(ws: &mut VarsiWorkspace, w: &[f64], r: &[f64]) -> f64 {
    if r.iter().all(|&v| v == r[0]) {
        return 1.0;
    }
    ws.score(r, dot(w, r)).clamp(0.0, 1.0)
}

/// Score samples of `w` over `draws` sampler draws.
pub fn score_samples(
    w: &PortfolioWeights,
    sampler: &ReturnSampler,
    draws: usize,
    exec: Execution,
) -> Result<Vec<f64>> {
    if w.len() != sampler.dimension() {
        return Err(Error::LengthMismatch {
            expected: sampler.dimension(),
            actual: w.len(),
        });
    }
    sampler.map_draws(draws, exec, VarsiWorkspace::new, |ws, r| {
        score_of(ws, w.as_slice(), r)
    })
}

pub fn estimate_score_distribution(
    w: &PortfolioWeights,
    sampler: &ReturnSampler,
    draws: usize,
) -> Result<ScoreDistribution> {
    estimate_score_distribution_with(w, sampler, draws, Execution::default())
}

pub fn estimate_score_distribution_with(
    w: &PortfolioWeights,
    sampler: &ReturnSampler,
    draws: usize,
    exec: Execution,
) -> Result<ScoreDistribution> {
    if draws < MIN_DRAWS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_DRAWS} draws, got {draws}"
        )));
    }
    ScoreDistribution::from_samples(score_samples(w, sampler, draws, exec)?, exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iid_gaussian(n: usize, seed: u64) -> ReturnSampler {
        let cov: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.01 } else { 0.0 }).collect())
            .collect();
        ReturnSampler::gaussian(vec![0.0; n], &cov, seed).unwrap()
    }

    #[test]
    fn equal_weights_centred_at_half() {
        let d =
            estimate_score_distribution(&PortfolioWeights::equal(6), &iid_gaussian(6, 1), 20_000).unwrap();
        let se = d.std / (d.samples.len() as f64).sqrt();
        assert!((d.mean - 0.5).abs() < 3.0 * se, "{} ± {se}", d.mean);
        assert!(d.skewness.abs() < 0.1);
        let area: f64 = d
            .kde_grid
            .windows(2)
            .zip(d.kde_density.windows(2))
            .map(|(g, f)| 0.5 * (g[1] - g[0]) * (f[0] + f[1]))
            .sum();
        assert!((area - 1.0).abs() < 1e-3);
    }

    #[test]
    fn identical_draws_give_identical_scores() {
        let rows = vec![vec![0.01, -0.02, 0.03]; 3];
        let s = ReturnSampler::empirical(rows, 1).unwrap();
        let w = PortfolioWeights::new(vec![0.2, 0.3, 0.5]).unwrap();
        let d = estimate_score_distribution(&w, &s, 500).unwrap();
        assert!(d.samples.iter().all(|&x| x == d.samples[0]));
        assert!(d.std < 1e-12);
    }

    #[test]
    fn deterministic_across_modes() {
        let s = iid_gaussian(4, 77);
        let w = PortfolioWeights::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let a = estimate_score_distribution_with(&w, &s, 9000, Execution::Sequential).unwrap();
        let b = estimate_score_distribution(&w, &s, 9000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn preconditions() {
        let s = iid_gaussian(3, 1);
        assert!(estimate_score_distribution(&PortfolioWeights::equal(3), &s, 99).is_err());
        assert!(matches!(
            estimate_score_distribution(&PortfolioWeights::equal(4), &s, 100),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn affine_sampler_keeps_scores() {
        let s = iid_gaussian(5, 3);
        let w = PortfolioWeights::new(vec![0.5, 0.1, 0.1, 0.2, 0.1]).unwrap();
        let base = score_samples(&w, &s, 2000, Execution::default()).unwrap();
        let pow2 = score_samples(
            &w,
            &s.clone().with_affine(4.0, 0.0).unwrap(),
            2000,
            Execution::default(),
        )
        .unwrap();
        assert_eq!(base, pow2);
        let general =
            score_samples(&w, &s.with_affine(1.7, -0.3).unwrap(), 2000, Execution::default()).unwrap();
        for (a, b) in base.iter().zip(&general) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}
