//! Small descriptive statistics used across modules.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Biased (1/n) variance.
pub fn variance_biased(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Unbiased (1/(n-1)) standard deviation; zero for fewer than two points.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Fisher-Pearson skewness `m3 / m2^{3/2}` with biased central moments.
pub fn skewness(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    if m2 > 0.0 {
        m3 / m2.powf(1.5)
    } else {
        0.0
    }
}

/// Linear-interpolated quantile of sorted data, `q` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// One-sample t-test of `H0: mean = mu0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TTest {
    pub t_stat: f64,
    pub p_value: f64,
}

/// Two-sided one-sample t-test; `None` with fewer than two points or zero spread.
pub fn t_test(x: &[f64], mu0: f64) -> Option<TTest> {
    if x.len() < 2 {
        return None;
    }
    let sd = std_dev(x);
    if !(sd > 0.0) {
        return None;
    }
    let n = x.len() as f64;
    let t_stat = (mean(x) - mu0) / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).ok()?;
    let p_value = 2.0 * (1.0 - dist.cdf(t_stat.abs()));
    Some(TTest { t_stat, p_value })
}

/// Biased sample covariance of the columns of `rows`.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let t = rows.len() as f64;
    let n = rows[0].len();
    let means: Vec<f64> = (0..n)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / t)
        .collect();
    let mut cov = vec![vec![0.0; n]; n];
    for r in rows {
        for i in 0..n {
            let di = r[i] - means[i];
            for j in i..n {
                cov[i][j] += di * (r[j] - means[j]);
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            cov[i][j] /= t;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

pub fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let t = rows.len() as f64;
    (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / t)
        .collect()
}

/// `w' Σ w`.
pub fn quadratic_form(cov: &[Vec<f64>], w: &[f64]) -> f64 {
    cov.iter()
        .zip(w)
        .map(|(row, wi)| wi * row.iter().zip(w).map(|(c, wj)| c * wj).sum::<f64>())
        .sum()
}
