//! Moments of the cross-sectional portfolio return distribution.
//!
//! Orders 1 and 2 are raw (mean and variance); orders 3 and up are
//! standardized by `M2^{k/2}`.

mod partition;

pub use partition::{for_each_partition, partitions, Partition};

use serde::Serialize;

use crate::market::MarketReturns;
use crate::{Error, Result};

/// Above this order the per-partition terms are formed in log space.
const LOG_DOMAIN_FROM: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSet {
    pub order: usize,
    pub value: f64,
    pub standardized: bool,
}

/// Biased sample moments of the asset returns.
struct AssetStats {
    n: usize,
    mean: f64,
    var: f64,
    skew: f64,
    kurt: f64,
}

fn asset_stats(r: &MarketReturns) -> AssetStats {
    let x = r.as_slice();
    let n = x.len();
    let mean = r.mean();
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let nf = n as f64;
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let (skew, kurt) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (f64::NAN, f64::NAN)
    };
    AssetStats {
        n,
        mean,
        var: m2,
        skew,
        kurt,
    }
}

fn degenerate(k: usize) -> Error {
    Error::DegenerateMarket(format!("order {k} moment needs non-zero return variance"))
}

/// Closed forms for orders 1 to 4.
pub fn moment_closed(r: &MarketReturns, k: usize) -> Result<MomentSet> {
    let s = asset_stats(r);
    let n = s.n as f64;
    let value = match k {
        1 => s.mean,
        2 => s.var / (n + 1.0),
        3 | 4 if s.var == 0.0 => return Err(degenerate(k)),
        3 => 2.0 * (n + 1.0).sqrt() / (n + 2.0) * s.skew,
        4 => 3.0 * (n + 1.0) / ((n + 2.0) * (n + 3.0)) * (2.0 * s.kurt + n),
        _ => {
            return Err(Error::InvalidInput(format!(
                "closed-form moments cover orders 1 to 4, got {k}"
            )))
        }
    };
    Ok(MomentSet {
        order: k,
        value,
        standardized: k >= 3,
    })
}

/// `Σ_λ Π_i P_{l_i}^{p_i} / Π_i (p_i! l_i^{p_i})` over partitions of `k`,
/// with `P_l = Σ_j x_j^l`.
fn partition_sum(x: &[f64], k: usize) -> f64 {
    let mut power = vec![0.0; k + 1];
    for &v in x {
        let mut p = 1.0;
        for ps in power.iter_mut().skip(1) {
            p *= v;
            *ps += p;
        }
    }
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=k).scan(0.0, |acc, i| {
            *acc += (i as f64).ln();
            Some(*acc)
        }))
        .collect();
    let mut sum = 0.0;
    for_each_partition(k, |parts| {
        let p = Partition::from_parts(parts);
        let pairs = p.distinct_parts.iter().zip(&p.multiplicities);
        if k < LOG_DOMAIN_FROM {
            let mut b = 1.0;
            let mut a = 1.0;
            for (&l, &m) in pairs {
                b *= power[l].powi(m as i32);
                a *= ln_fact[m].exp() * (l as f64).powi(m as i32);
            }
            sum += b / a;
        } else {
            let mut log_mag = 0.0;
            let mut negative = false;
            for (&l, &m) in pairs {
                if power[l] == 0.0 {
                    return;
                }
                log_mag += m as f64 * power[l].abs().ln() - ln_fact[m] - m as f64 * (l as f64).ln();
                negative ^= power[l] < 0.0 && m % 2 == 1;
            }
            let term = log_mag.exp();
            sum += if negative { -term } else { term };
        }
    });
    sum
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// Returns centered on the mean and divided by their biased std.
fn standardized_returns(s: &AssetStats, r: &MarketReturns) -> Vec<f64> {
    let sd = s.var.sqrt();
    r.as_slice().iter().map(|v| (v - s.mean) / sd).collect()
}

/// k-th moment via the partition expansion.
pub fn moment_general(r: &MarketReturns, k: usize) -> Result<MomentSet> {
    if k == 0 {
        return Err(Error::InvalidInput("moment order must be at least 1".into()));
    }
    if k <= 2 {
        return moment_closed(r, k);
    }
    let s = asset_stats(r);
    if s.var == 0.0 {
        return Err(degenerate(k));
    }
    let z = standardized_returns(&s, r);
    let n = s.n as f64;
    // Standardizing the returns makes M2 = 1/(n+1) for z.
    let log_scale = 0.5 * k as f64 * (n + 1.0).ln() - ln_binomial(s.n - 1 + k, k);
    Ok(MomentSet {
        order: k,
        value: partition_sum(&z, k) * log_scale.exp(),
        standardized: true,
    })
}

/// Unstandardized central moment of order `k` (`k = 2` gives `M2`).
pub fn moment_raw_central(r: &MarketReturns, k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 0.0,
        _ => {
            let s = asset_stats(r);
            if s.var == 0.0 {
                return 0.0;
            }
            let z = standardized_returns(&s, r);
            let log_scale = 0.5 * k as f64 * s.var.ln() - ln_binomial(s.n - 1 + k, k);
            partition_sum(&z, k) * log_scale.exp()
        }
    }
}
