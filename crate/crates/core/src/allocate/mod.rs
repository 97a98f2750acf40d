//! Score-based portfolio optimization, a mean-variance baseline and a
//! rolling-window backtest.
//!
//! The score optimizer runs Nelder–Mead on softmax coordinates
//! (`w_i ∝ exp(θ_i)`, `θ_n = 0`), so every iterate is a valid long-only
//! portfolio. A variance target enters as a quadratic penalty whose weight is
//! raised in stages; the result is then projected onto the target along a
//! segment towards the minimum-variance (or maximum-variance) portfolio.
//! All iterates of one call share the same scenario set, so the objective is
//! deterministic within the call.

mod backtest;
mod optimizer;
mod qp;

pub use backtest::{backtest, backtest_with, BacktestConfig, BacktestReport, Strategy, StrategyReport};
pub use optimizer::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use qp::{max_variance_vertex, maximize_quadratic, min_variance, project_simplex};

use std::cell::RefCell;

use serde::Serialize;

use crate::cdf::VarsiWorkspace;
use crate::io::ReturnMatrix;
use crate::market::PortfolioWeights;
use crate::scoredist::{
    perf_measure_samples, psd_factor, score_of, PerfMeasureKind, ReturnSampler, MIN_DRAWS,
};
use crate::stats::{column_means, quadratic_form, sample_covariance};
use crate::{Error, Execution, Result};

/// Relative distance to the variance target accepted as feasible.
pub const VARIANCE_REL_TOL: f64 = 1e-2;

/// Penalty weights of the successive optimizer stages.
const PENALTY_STAGES: [f64; 4] = [10.0, 1e2, 1e3, 1e4];

/// Objective value for portfolios whose measure is undefined.
const UNDEFINED_OBJECTIVE: f64 = 1e6;

/// Where the optimizer's return scenarios come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenarios {
    /// The in-sample rows themselves.
    InSample,
    /// `draws` rows resampled with replacement.
    Bootstrap,
    /// `draws` draws from a normal fitted to the rows (biased covariance).
    Gaussian,
}

impl Scenarios {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "in_sample" => Ok(Self::InSample),
            "bootstrap" => Ok(Self::Bootstrap),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(Error::InvalidInput(format!(
                "unknown scenario source {other:?}, expected in-sample, bootstrap or gaussian"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeConfig {
    pub measure: PerfMeasureKind,
    pub variance_target: Option<f64>,
    /// Scenario count for `Bootstrap` and `Gaussian`.
    pub draws: usize,
    pub seed: u64,
    /// Nelder–Mead iterations per penalty stage.
    pub max_iters: usize,
    pub tolerance: f64,
    pub scenarios: Scenarios,
}

impl OptimizeConfig {
    pub fn new(measure: PerfMeasureKind) -> Self {
        Self {
            measure,
            variance_target: None,
            draws: 10_000,
            seed: 0,
            max_iters: 1000,
            tolerance: 1e-8,
            scenarios: Scenarios::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.measure.validate()?;
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        if let Some(t) = self.variance_target {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "variance target must be finite and non-negative, got {t}"
                )));
            }
        }
        if self.scenarios != Scenarios::InSample && self.draws < MIN_DRAWS {
            return Err(Error::InvalidInput(format!(
                "need at least {MIN_DRAWS} draws, got {}",
                self.draws
            )));
        }
        Ok(())
    }
}

/// Where the returned weights came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    Optimizer,
    Incumbent,
    EqualWeight,
    Vertex,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeOutcome {
    pub weights: PortfolioWeights,
    pub measure: f64,
    pub equal_weight_measure: Option<f64>,
    /// In-sample variance `w'Σw` of the returned weights.
    pub variance: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub source: Candidate,
    /// Best feasible measure seen, after each iteration. `None` until the first
    /// feasible point.
    pub log: Vec<Option<f64>>,
}

fn check_in_sample(rows: &[Vec<f64>]) -> Result<usize> {
    if rows.len() < 2 {
        return Err(Error::InvalidDimension(format!(
            "need at least 2 in-sample periods, got {}",
            rows.len()
        )));
    }
    let n = rows[0].len();
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "need at least 2 assets, got {n}"
        )));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidDimension("ragged in-sample matrix".into()));
    }
    Ok(n)
}

fn softmax(theta: &[f64]) -> Vec<f64> {
    let top = theta.iter().copied().fold(0.0, f64::max);
    let mut w: Vec<f64> = theta.iter().map(|t| (t - top).exp()).collect();
    w.push((-top).exp());
    let s: f64 = w.iter().sum();
    for x in &mut w {
        *x /= s;
    }
    w
}

/// Clips rounding negatives and renormalizes so the result passes the weight checks.
fn to_weights(w: &[f64]) -> PortfolioWeights {
    let clipped: Vec<f64> = w.iter().map(|&x| x.max(0.0)).collect();
    PortfolioWeights::normalized(clipped).expect("convex combinations stay on the simplex")
}

fn blend(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - s) * x + s * y).collect()
}

/// Point on the segment from `w` to `anchor` whose variance is `target`.
/// The caller guarantees the two ends bracket the target.
fn project_to_target(cov: &[Vec<f64>], w: &[f64], anchor: &[f64], target: f64) -> Vec<f64> {
    let above = quadratic_form(cov, w) > target;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = quadratic_form(cov, &blend(w, anchor, mid));
        if (v > target) == above {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    blend(w, anchor, hi)
}

struct Problem<'a> {
    scenarios: Vec<Vec<f64>>,
    cov: &'a [Vec<f64>],
    measure: PerfMeasureKind,
    target: Option<f64>,
    scale: f64,
}

impl Problem<'_> {
    fn measure(&self, ws: &mut VarsiWorkspace, w: &[f64]) -> Option<f64> {
        let scores: Vec<f64> = self.scenarios.iter().map(|r| score_of(ws, w, r)).collect();
        perf_measure_samples(&scores, self.measure).ok()
    }

    fn feasible(&self, w: &[f64]) -> bool {
        match self.target {
            None => true,
            Some(t) => (quadratic_form(self.cov, w) - t).abs() <= 0.5 * VARIANCE_REL_TOL * self.scale,
        }
    }
}

fn scenario_rows(rows: &[Vec<f64>], cov: &[Vec<f64>], cfg: &OptimizeConfig) -> Result<Vec<Vec<f64>>> {
    match cfg.scenarios {
        Scenarios::InSample => Ok(rows.to_vec()),
        Scenarios::Bootstrap => {
            ReturnSampler::empirical(rows.to_vec(), cfg.seed)?.draws(cfg.draws, Execution::Sequential)
        }
        Scenarios::Gaussian => ReturnSampler::gaussian(column_means(rows), cov, cfg.seed)?
            .draws(cfg.draws, Execution::Sequential),
    }
}

/// Feasible variance range `[min over the simplex, max vertex variance]`.
fn variance_range(cov: &[Vec<f64>]) -> (Vec<f64>, f64, usize, f64) {
    let (w_min, v_min) = min_variance(cov);
    let (i_max, v_max) = max_variance_vertex(cov);
    (w_min, v_min, i_max, v_max)
}

fn check_target(target: f64, v_min: f64, v_max: f64) -> Result<()> {
    let slack = 1e-9 * v_max.abs().max(f64::MIN_POSITIVE);
    if target < v_min - slack || target > v_max + slack {
        return Err(Error::Infeasible {
            target,
            min: v_min,
            max: v_max,
        });
    }
    Ok(())
}

/// Maximizes a score-based measure over long-only portfolios.
pub fn optimize_score_portfolio(in_sample: &ReturnMatrix, cfg: &OptimizeConfig) -> Result<OptimizeOutcome> {
    optimize_rows(&in_sample.rows, cfg)
}

pub(crate) fn optimize_rows(rows: &[Vec<f64>], cfg: &OptimizeConfig) -> Result<OptimizeOutcome> {
    cfg.validate()?;
    let n = check_in_sample(rows)?;
    let cov = sample_covariance(rows);
    let (w_min, v_min, i_max, v_max) = variance_range(&cov);
    if let Some(t) = cfg.variance_target {
        check_target(t, v_min, v_max)?;
    }
    let problem = Problem {
        scenarios: scenario_rows(rows, &cov, cfg)?,
        cov: &cov,
        measure: cfg.measure,
        target: cfg.variance_target,
        scale: match cfg.variance_target {
            Some(t) if t > 0.0 => t,
            _ => v_max.max(f64::MIN_POSITIVE),
        },
    };

    struct State {
        ws: VarsiWorkspace,
        evaluations: usize,
        incumbent: Option<(f64, Vec<f64>)>,
        log: Vec<Option<f64>>,
    }
    let state = RefCell::new(State {
        ws: VarsiWorkspace::new(),
        evaluations: 0,
        incumbent: None,
        log: Vec::new(),
    });

    let objective = |theta: &[f64], rho: f64| -> f64 {
        let w = softmax(theta);
        let mut st = state.borrow_mut();
        st.evaluations += 1;
        let m = problem.measure(&mut st.ws, &w);
        if let Some(m) = m {
            if problem.feasible(&w) && st.incumbent.as_ref().is_none_or(|(best, _)| m > *best) {
                st.incumbent = Some((m, w.clone()));
            }
        }
        let penalty = match problem.target {
            Some(t) => rho * ((quadratic_form(problem.cov, &w) - t) / problem.scale).powi(2),
            None => 0.0,
        };
        m.map_or(UNDEFINED_OBJECTIVE, |m| -m) + penalty
    };

    let stages: &[f64] = if cfg.variance_target.is_some() {
        &PENALTY_STAGES
    } else {
        &[0.0]
    };
    let opts = NelderMeadOptions {
        max_iters: cfg.max_iters,
        tolerance: cfg.tolerance,
        initial_step: 1.0,
    };
    let mut theta = vec![0.0; n - 1];
    let mut converged = false;
    let mut iterations = 0;
    for &rho in stages {
        let r = nelder_mead(
            &theta,
            opts,
            |t| objective(t, rho),
            |_, _| {
                let mut st = state.borrow_mut();
                let best = st.incumbent.as_ref().map(|(m, _)| *m);
                st.log.push(best);
            },
        );
        theta = r.x;
        converged = r.converged;
        iterations += r.iterations;
    }

    let mut st = state.into_inner();
    let mut nm_point = softmax(&theta);
    if let Some(t) = cfg.variance_target {
        if !problem.feasible(&nm_point) {
            let anchor = if quadratic_form(&cov, &nm_point) > t {
                w_min.clone()
            } else {
                PortfolioWeights::vertex(n, i_max).as_slice().to_vec()
            };
            nm_point = project_to_target(&cov, &nm_point, &anchor, t);
        }
    }

    let equal = vec![1.0 / n as f64; n];
    let equal_weight_measure = problem.measure(&mut st.ws, &equal);
    let mut candidates: Vec<(Candidate, Vec<f64>)> = vec![(Candidate::Optimizer, nm_point)];
    if let Some((_, w)) = st.incumbent.take() {
        candidates.push((Candidate::Incumbent, w));
    }
    candidates.push((Candidate::EqualWeight, equal));
    for i in 0..n {
        candidates.push((
            Candidate::Vertex,
            PortfolioWeights::vertex(n, i).as_slice().to_vec(),
        ));
    }

    let mut best: Option<(f64, Candidate, Vec<f64>)> = None;
    for (source, w) in candidates {
        // The projected optimizer point is feasible by construction.
        if source != Candidate::Optimizer && !problem.feasible(&w) {
            continue;
        }
        let m = problem.measure(&mut st.ws, &w);
        if let Some(m) = m {
            if best.as_ref().is_none_or(|(b, _, _)| m > *b) {
                best = Some((m, source, w));
            }
        }
    }
    let (measure, source, w) = best.ok_or_else(|| {
        Error::UndefinedMeasure(format!(
            "measure {} is undefined at every candidate portfolio",
            cfg.measure.label()
        ))
    })?;
    let weights = to_weights(&w);
    Ok(OptimizeOutcome {
        variance: quadratic_form(&cov, weights.as_slice()),
        weights,
        measure,
        equal_weight_measure,
        converged,
        iterations,
        evaluations: st.evaluations,
        source,
        log: st.log,
    })
}

/// Long-only portfolio maximizing `mean'w` subject to `w'Σw <= target`.
/// Without a target the mean is maximized outright, splitting ties by
/// minimum variance.
pub fn mean_variance_portfolio(
    mean: &[f64],
    cov: &[Vec<f64>],
    variance_target: Option<f64>,
) -> Result<PortfolioWeights> {
    let n = mean.len();
    if n == 0 {
        return Err(Error::InvalidDimension("empty mean vector".into()));
    }
    if let Some(i) = mean.iter().position(|m| !m.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    psd_factor(cov, n)?;
    let (w_min, v_min, _, v_max) = variance_range(cov);

    // The lambda -> 0 limit: min variance among the best-mean assets.
    let top = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = mean.iter().map(|m| (m - top).abs()).fold(0.0, f64::max);
    let best: Vec<usize> = (0..n)
        .filter(|&i| top - mean[i] <= 1e-12 * spread.max(top.abs()))
        .collect();
    let sub: Vec<Vec<f64>> = best
        .iter()
        .map(|&i| best.iter().map(|&j| cov[i][j]).collect())
        .collect();
    let (w_sub, v_top) = min_variance(&sub);
    let mut w_top = vec![0.0; n];
    for (k, &i) in best.iter().enumerate() {
        w_top[i] = w_sub[k];
    }

    let target = match variance_target {
        None => return Ok(to_weights(&w_top)),
        Some(t) => t,
    };
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "variance target must be finite and non-negative, got {target}"
        )));
    }
    if target < v_min - 1e-9 * v_max.max(f64::MIN_POSITIVE) {
        return Err(Error::Infeasible {
            target,
            min: v_min,
            max: v_max,
        });
    }
    if v_top <= target {
        return Ok(to_weights(&w_top));
    }
    if target <= v_min * (1.0 + 1e-9) {
        return Ok(to_weights(&w_min));
    }

    // Variance of the penalized solution decreases in lambda.
    let solve = |lambda: f64, start: &[f64]| maximize_quadratic(mean, cov, lambda, start);
    let scale = spread.max(f64::MIN_POSITIVE) / v_max.max(f64::MIN_POSITIVE);
    let mut lo = 0.0;
    let mut hi = scale;
    let mut w_hi = solve(hi, &w_min);
    let mut doublings = 0;
    while quadratic_form(cov, &w_hi) > target {
        lo = hi;
        hi *= 2.0;
        w_hi = solve(hi, &w_hi);
        doublings += 1;
        if doublings > 200 {
            return Ok(to_weights(&w_min));
        }
    }
    for _ in 0..100 {
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
        let w = solve(mid, &w_hi);
        if quadratic_form(cov, &w) > target {
            lo = mid;
        } else {
            hi = mid;
            w_hi = w;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(to_weights(&w_hi))
}
