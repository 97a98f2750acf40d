//! Small convex programs over the simplex by projected gradient.

use crate::stats::quadratic_form;

/// Euclidean projection onto `{w >= 0, Σ w = 1}` (Duchi et al., sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    let s: f64 = w.iter().sum();
    for x in &mut w {
        *x /= s;
    }
    w
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Largest eigenvalue bound: the max absolute row sum.
fn lipschitz(cov: &[Vec<f64>]) -> f64 {
    cov.iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

const MAX_ITERS: usize = 20_000;

/// Maximizes `mu'w - lambda w'Σw` over the simplex by accelerated projected
/// gradient (FISTA). With `mu = 0` this is the minimum-variance portfolio.
pub fn maximize_quadratic(mu: &[f64], cov: &[Vec<f64>], lambda: f64, start: &[f64]) -> Vec<f64> {
    let lip = (2.0 * lambda * lipschitz(cov)).max(1e-300);
    let step = 1.0 / lip;
    let mut x = project_simplex(start);
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..MAX_ITERS {
        let g = mat_vec(cov, &y);
        let stepped: Vec<f64> = (0..y.len())
            .map(|i| y[i] + step * (mu[i] - 2.0 * lambda * g[i]))
            .collect();
        let next = project_simplex(&stepped);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let shift: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        y = (0..x.len())
            .map(|i| next[i] + (t - 1.0) / t_next * (next[i] - x[i]))
            .collect();
        x = next;
        t = t_next;
        if shift < 1e-15 {
            break;
        }
    }
    x
}

/// Minimum-variance long-only portfolio and its variance.
pub fn min_variance(cov: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let n = cov.len();
    let w = maximize_quadratic(&vec![0.0; n], cov, 1.0, &vec![1.0 / n as f64; n]);
    let v = quadratic_form(cov, &w);
    (w, v)
}

/// Vertex with the largest variance and that variance.
pub fn max_variance_vertex(cov: &[Vec<f64>]) -> (usize, f64) {
    (0..cov.len()).map(|i| (i, cov[i][i])).fold(
        (0, f64::NEG_INFINITY),
        |best, c| if c.1 > best.1 { c } else { best },
    )
}
