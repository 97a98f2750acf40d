//! Gaussian kernel density on [0, 1] with reflection at both ends.

use crate::stats::{quantile_sorted, std_dev};
use crate::Execution;

pub const GRID_POINTS: usize = 512;

/// Silverman's rule `0.9 min(sd, IQR/1.34) n^{-1/5}`, floored at two grid
/// spacings so that a degenerate sample still gives a resolvable bump.
pub fn silverman_bandwidth(sorted: &[f64], grid_points: usize) -> f64 {
    let n = sorted.len() as f64;
    let sd = std_dev(sorted);
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let floor = 2.0 / (grid_points - 1) as f64;
    (0.9 * spread * n.powf(-0.2)).max(floor)
}

/// Density on an evenly spaced grid over [0, 1].
///
/// Each sample `s` contributes kernels at `s`, `-s` and `2 - s`.
pub fn reflected_kde(samples: &[f64], grid_points: usize, exec: Execution) -> (Vec<f64>, Vec<f64>) {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = silverman_bandwidth(&sorted, grid_points);
    let grid = crate::cdf::linspace(0.0, 1.0, grid_points);
    let norm = 1.0 / (sorted.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let reach = 6.0 * h;
    let window_sum = |centre: f64| -> f64 {
        let lo = sorted.partition_point(|&s| s < centre - reach);
        let hi = sorted.partition_point(|&s| s <= centre + reach);
        sorted[lo..hi]
            .iter()
            .map(|&s| {
                let u = (centre - s) / h;
                (-0.5 * u * u).exp()
            })
            .sum()
    };
    // Kernels at -s seen from x equal kernels at s seen from -x; likewise for 2 - s.
    let density = exec.map_slice(&grid, |&x| {
        norm * (window_sum(x) + window_sum(-x) + window_sum(2.0 - x))
    });
    (grid, density)
}
