//! Rolling-window out-of-sample backtest.
//!
//! At each rebalance date `t` every strategy is fitted on rows
//! `[t - window, t)` and held for row `t`, whose realized portfolio return is
//! scored against that row's asset returns.

use std::io::Write;
use std::path::Path;

use serde::{Serialize, Serializer};

use super::{mean_variance_portfolio, optimize_rows, OptimizeConfig, Scenarios};
use crate::cdf::VarsiWorkspace;
use crate::io::ReturnMatrix;
use crate::market::{dot, l1_distance, PortfolioWeights};
use crate::scoredist::{sample_simplex_with, score_of, PerfMeasureKind, DEFAULT_S_STAR};
use crate::stats::{column_means, mean, quadratic_form, sample_covariance, std_dev, t_test, TTest};
use crate::{Error, Execution, Result};

/// Uniform portfolios drawn per date for the volatility target.
pub const VOLATILITY_SAMPLES: usize = 10_000;

pub const COVARIANCE_ESTIMATOR: &str = "biased sample covariance";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    EqualWeight,
    MeanVariance,
    Score(PerfMeasureKind),
}

impl Strategy {
    /// `ew`, `mv`, or a measure letter `A`..`D` (optionally `perf-A`).
    pub fn parse(label: &str, s_star: f64) -> Result<Self> {
        let l = label.trim().to_ascii_lowercase();
        match l.as_str() {
            "ew" | "equal" | "equal-weight" => Ok(Self::EqualWeight),
            "mv" | "mean-variance" => Ok(Self::MeanVariance),
            _ => {
                let m = l
                    .strip_prefix("perf-")
                    .or_else(|| l.strip_prefix("perf"))
                    .unwrap_or(&l);
                PerfMeasureKind::parse(m, s_star).map(Self::Score).map_err(|_| {
                    Error::InvalidInput(format!(
                        "unknown strategy {label:?}, expected ew, mv, A, B, C or D"
                    ))
                })
            }
        }
    }

    /// Parses a comma-separated list.
    pub fn parse_list(list: &str, s_star: f64) -> Result<Vec<Self>> {
        list.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| Self::parse(s, s_star))
            .collect()
    }

    pub fn name(&self) -> String {
        match self {
            Self::EqualWeight => "EW".into(),
            Self::MeanVariance => "MV".into(),
            Self::Score(k) => format!("Perf {}", k.label()),
        }
    }
}

impl Serialize for Strategy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestConfig {
    pub window: usize,
    pub strategies: Vec<Strategy>,
    /// Constrain MV and score strategies to the mean volatility of uniform
    /// portfolios on each in-sample window.
    pub volatility_target: bool,
    /// Constant per-period rate for the interest-rate Sharpe ratio.
    pub risk_free: f64,
    pub seed: u64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub scenarios: Scenarios,
    pub draws: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        let s = DEFAULT_S_STAR;
        Self {
            window: 120,
            strategies: vec![
                Strategy::EqualWeight,
                Strategy::MeanVariance,
                Strategy::Score(PerfMeasureKind::A { s_star: s }),
                Strategy::Score(PerfMeasureKind::B),
                Strategy::Score(PerfMeasureKind::C { s_star: s }),
                Strategy::Score(PerfMeasureKind::D),
            ],
            volatility_target: false,
            risk_free: 0.0,
            seed: 0,
            max_iters: 500,
            tolerance: 1e-8,
            scenarios: Scenarios::InSample,
            draws: 10_000,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidInput(format!("config line {line}: cannot parse {key} = {value:?}")))
}

impl BacktestConfig {
    /// Reads `key = value` lines; `#` starts a comment. Unset keys keep their
    /// defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut s_star = DEFAULT_S_STAR;
        let mut strategies: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("config line {line}: expected key = value")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "window" => cfg.window = parse_value(key, value, line)?,
                "strategies" => strategies = Some(value.to_owned()),
                "s_star" => s_star = parse_value(key, value, line)?,
                "volatility_target" => cfg.volatility_target = parse_value(key, value, line)?,
                "risk_free" => cfg.risk_free = parse_value(key, value, line)?,
                "seed" => cfg.seed = parse_value(key, value, line)?,
                "max_iters" => cfg.max_iters = parse_value(key, value, line)?,
                "tolerance" => cfg.tolerance = parse_value(key, value, line)?,
                "draws" => cfg.draws = parse_value(key, value, line)?,
                "scenarios" => cfg.scenarios = Scenarios::parse(value)?,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "config line {line}: unknown key {other:?}"
                    )))
                }
            }
        }
        if let Some(list) = strategies {
            cfg.strategies = Strategy::parse_list(&list, s_star)?;
        } else {
            cfg.set_s_star(s_star)?;
        }
        Ok(cfg)
    }

    pub fn read_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Replaces S* in every A and C strategy.
    pub fn set_s_star(&mut self, s_star: f64) -> Result<()> {
        for s in &mut self.strategies {
            if let Strategy::Score(k) = s {
                *k = PerfMeasureKind::parse(k.label(), s_star)?;
            }
        }
        Ok(())
    }

    fn optimize_config(&self, measure: PerfMeasureKind, target: Option<f64>, seed: u64) -> OptimizeConfig {
        OptimizeConfig {
            measure,
            variance_target: target,
            draws: self.draws,
            seed,
            max_iters: self.max_iters,
            tolerance: self.tolerance,
            scenarios: self.scenarios,
        }
    }
}

fn finite_or_null<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) if x.is_finite() => s.serialize_some(x),
        _ => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyReport {
    pub strategy: Strategy,
    pub returns: Vec<f64>,
    pub scores: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
    /// Percent; `None` at the first rebalance.
    pub turnover: Vec<Option<f64>>,
    /// Percent L1 distance to equal weights.
    pub concentration: Vec<f64>,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_score: f64,
    pub std_score: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub sharpe_vs_rate: Option<f64>,
    #[serde(serialize_with = "finite_or_null")]
    pub sharpe_vs_equal_weight: Option<f64>,
    pub mean_turnover: Option<f64>,
    pub mean_concentration: f64,
    pub std_concentration: f64,
    /// Mean score against 50%.
    pub score_t_test: Option<TTest>,
    /// Rebalance dates where the optimizer hit its iteration cap.
    pub non_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    pub window: usize,
    /// Out-of-sample periods, `rows - window`.
    pub periods: usize,
    pub covariance_estimator: &'static str,
    pub volatility_target: bool,
    /// Per-date variance target when the volatility constraint is on.
    pub variance_targets: Vec<Option<f64>>,
    pub risk_free: f64,
    pub seed: u64,
    pub strategies: Vec<StrategyReport>,
}

impl BacktestReport {
    /// One row per (period, strategy): `period,strategy,return,score,turnover,concentration`.
    /// `period` is the 0-based row index of the out-of-sample observation.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record([
            "period",
            "strategy",
            "return",
            "score",
            "turnover",
            "concentration",
        ])
        .map_err(io)?;
        for k in 0..self.periods {
            for s in &self.strategies {
                w.write_record([
                    (self.window + k).to_string(),
                    s.strategy.name(),
                    s.returns[k].to_string(),
                    s.scores[k].to_string(),
                    s.turnover[k].map_or(String::new(), |v| v.to_string()),
                    s.concentration[k].to_string(),
                ])
                .map_err(io)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean over `x` of `(x - b) / sd(x - b)`; `None` without spread.
fn sharpe(x: &[f64], benchmark: impl Fn(usize) -> f64) -> Option<f64> {
    let excess: Vec<f64> = x.iter().enumerate().map(|(i, v)| v - benchmark(i)).collect();
    if excess.len() < 2 {
        return None;
    }
    let sd = std_dev(&excess);
    (sd > 0.0).then(|| mean(&excess) / sd)
}

struct Fit {
    weights: Vec<f64>,
    converged: bool,
}

pub fn backtest(returns: &ReturnMatrix, cfg: &BacktestConfig) -> Result<BacktestReport> {
    backtest_with(returns, cfg, Execution::default())
}

/// Dates run through `exec`; each date's work is sequential.
pub fn backtest_with(
    returns: &ReturnMatrix,
    cfg: &BacktestConfig,
    exec: Execution,
) -> Result<BacktestReport> {
    let rows = &returns.rows;
    if cfg.window < 2 {
        return Err(Error::InvalidInput(format!(
            "window must be at least 2, got {}",
            cfg.window
        )));
    }
    if rows.len() <= cfg.window {
        return Err(Error::InvalidInput(format!(
            "need more periods ({}) than the window ({})",
            rows.len(),
            cfg.window
        )));
    }
    if cfg.strategies.is_empty() {
        return Err(Error::InvalidInput("no strategies given".into()));
    }
    let n = returns.asset_count();
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "need at least 2 assets, got {n}"
        )));
    }
    let periods = rows.len() - cfg.window;
    let equal = vec![1.0 / n as f64; n];

    let per_date = exec.try_map_range(periods, |k| -> Result<(Option<f64>, Vec<Fit>)> {
        let t = cfg.window + k;
        let in_sample = &rows[t - cfg.window..t];
        let cov = sample_covariance(in_sample);
        let date_seed = cfg.seed.wrapping_add(t as u64);
        let target = if cfg.volatility_target {
            let draws = sample_simplex_with(
                n,
                VOLATILITY_SAMPLES,
                date_seed ^ (1 << 63),
                Execution::Sequential,
            )?;
            let vol = draws
                .iter()
                .map(|w| quadratic_form(&cov, w.as_slice()).sqrt())
                .sum::<f64>()
                / draws.len() as f64;
            Some(vol * vol)
        } else {
            None
        };
        let fits = cfg
            .strategies
            .iter()
            .map(|s| -> Result<Fit> {
                Ok(match *s {
                    Strategy::EqualWeight => Fit {
                        weights: equal.clone(),
                        converged: true,
                    },
                    Strategy::MeanVariance => Fit {
                        weights: mean_variance_portfolio(&column_means(in_sample), &cov, target)?.into(),
                        converged: true,
                    },
                    Strategy::Score(kind) => {
                        let out = optimize_rows(in_sample, &cfg.optimize_config(kind, target, date_seed))?;
                        Fit {
                            weights: out.weights.into(),
                            converged: out.converged,
                        }
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((target, fits))
    })?;

    let realized = |w: &[f64], k: usize| dot(w, &rows[cfg.window + k]);
    let ew_returns: Vec<f64> = (0..periods).map(|k| realized(&equal, k)).collect();
    let mut ws = VarsiWorkspace::new();
    let mut reports = Vec::with_capacity(cfg.strategies.len());
    for (j, &strategy) in cfg.strategies.iter().enumerate() {
        let weights: Vec<Vec<f64>> = per_date.iter().map(|(_, f)| f[j].weights.clone()).collect();
        let returns: Vec<f64> = weights.iter().enumerate().map(|(k, w)| realized(w, k)).collect();
        let scores: Vec<f64> = weights
            .iter()
            .enumerate()
            .map(|(k, w)| score_of(&mut ws, w, &rows[cfg.window + k]))
            .collect();
        let turnover: Vec<Option<f64>> = (0..periods)
            .map(|k| (k > 0).then(|| 100.0 * l1_distance(&weights[k], &weights[k - 1])))
            .collect();
        let concentration: Vec<f64> = weights
            .iter()
            .map(|w| 100.0 * PortfolioWeights::normalized(w.clone()).map_or(0.0, |p| p.concentration()))
            .collect();
        let moves: Vec<f64> = turnover.iter().flatten().copied().collect();
        reports.push(StrategyReport {
            strategy,
            mean_return: mean(&returns),
            std_return: std_dev(&returns),
            mean_score: mean(&scores),
            std_score: std_dev(&scores),
            sharpe_vs_rate: sharpe(&returns, |_| cfg.risk_free),
            sharpe_vs_equal_weight: sharpe(&returns, |k| ew_returns[k]),
            mean_turnover: (!moves.is_empty()).then(|| mean(&moves)),
            mean_concentration: mean(&concentration),
            std_concentration: std_dev(&concentration),
            score_t_test: t_test(&scores, 0.5),
            non_converged: per_date.iter().filter(|(_, f)| !f[j].converged).count(),
            returns,
            scores,
            weights,
            turnover,
            concentration,
        });
    }

    Ok(BacktestReport {
        window: cfg.window,
        periods,
        covariance_estimator: COVARIANCE_ESTIMATOR,
        volatility_target: cfg.volatility_target,
        variance_targets: per_date.iter().map(|(t, _)| *t).collect(),
        risk_free: cfg.risk_free,
        seed: cfg.seed,
        strategies: reports,
    })
}
