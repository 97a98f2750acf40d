//! Uniform simplex sampling and return-generating models.
//!
//! Random draws are split into fixed-size chunks; chunk `c` uses the ChaCha8
//! stream `c` of the user seed. Output is therefore independent of thread
//! count and of [`Execution`] mode.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::market::PortfolioWeights;
use crate::{Error, Execution, Result};

pub(crate) const CHUNK: usize = 4096;

/// Symmetry tolerance for sampler covariances.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues down to `-PSD_TOL` are treated as zero.
pub const PSD_TOL: f64 = 1e-10;

pub(crate) fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunk_count(count: usize) -> usize {
    count.div_ceil(CHUNK)
}

fn chunk_len(count: usize, c: usize) -> usize {
    CHUNK.min(count - c * CHUNK)
}

/// `count` i.i.d. uniform points on the simplex, from normalized
/// exponential spacings.
pub fn sample_simplex(n: usize, count: usize, seed: u64) -> Result<Vec<PortfolioWeights>> {
    sample_simplex_with(n, count, seed, Execution::default())
}

pub fn sample_simplex_with(
    n: usize,
    count: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<PortfolioWeights>> {
    if n == 0 {
        return Err(Error::InvalidDimension("simplex needs at least one asset".into()));
    }
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let chunks = exec.map_range(chunk_count(count), |c| {
        let mut rng = chunk_rng(seed, c);
        (0..chunk_len(count, c))
            .map(|_| {
                let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect::<Vec<f64>>()
            })
            .collect::<Vec<_>>()
    });
    chunks.into_iter().flatten().map(PortfolioWeights::new).collect()
}

#[derive(Debug, Clone)]
enum Model {
    /// Mean and a factor `L` with `L L' = Σ`.
    Gaussian { mean: Vec<f64>, factor: DMatrix<f64> },
    /// Rows drawn uniformly with replacement.
    Empirical(Vec<Vec<f64>>),
    /// Rows taken in order.
    File(Vec<Vec<f64>>),
}

/// A seeded generator of asset return vectors.
#[derive(Debug, Clone)]
pub struct ReturnSampler {
    model: Model,
    seed: u64,
    /// Applied to every draw as `scale * x + shift`.
    affine: Option<(f64, f64)>,
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    let n = rows
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Sampler("return matrix has no rows".into()))?;
    if n == 0 {
        return Err(Error::Sampler("return matrix has no columns".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Sampler(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Sampler(format!("row {i} has a non-finite entry")));
        }
    }
    Ok(n)
}

/// Checks that `cov` is an `n x n` symmetric PSD matrix and returns `L` with
/// `L L' = cov`, negative rounding eigenvalues clipped to zero.
pub(crate) fn psd_factor(cov: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if cov.len() != n || cov.iter().any(|row| row.len() != n) {
        return Err(Error::Sampler(format!("covariance must be {n}x{n}")));
    }
    if cov.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Sampler("non-finite covariance entry".into()));
    }
    for i in 0..n {
        for j in 0..i {
            if (cov[i][j] - cov[j][i]).abs() > SYMMETRY_TOL {
                return Err(Error::Sampler(format!(
                    "covariance is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (cov[i][j] + cov[j][i]));
    let eig = SymmetricEigen::new(sym);
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| l < -PSD_TOL) {
        return Err(Error::Sampler(format!(
            "covariance is not positive semi-definite (eigenvalue {bad:e})"
        )));
    }
    let mut factor = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    Ok(factor)
}

impl ReturnSampler {
    /// Multivariate normal. `cov` must be symmetric positive semi-definite.
    pub fn gaussian(mean: Vec<f64>, cov: &[Vec<f64>], seed: u64) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(Error::Sampler("empty mean vector".into()));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Sampler("non-finite mean entry".into()));
        }
        let factor = psd_factor(cov, n)?;
        Ok(Self {
            model: Model::Gaussian { mean, factor },
            seed,
            affine: None,
        })
    }

    /// Bootstrap over the rows of a return matrix.
    pub fn empirical(rows: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        check_rows(&rows)?;
        Ok(Self {
            model: Model::Empirical(rows),
            seed,
            affine: None,
        })
    }

    /// Pre-drawn samples, consumed in file order.
    pub fn file(rows: Vec<Vec<f64>>) -> Result<Self> {
        check_rows(&rows)?;
        Ok(Self {
            model: Model::File(rows),
            seed: 0,
            affine: None,
        })
    }

    /// The same draws mapped through `x -> scale * x + shift`.
    pub fn with_affine(mut self, scale: f64, shift: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && shift.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "affine map needs scale > 0 and finite shift, got ({scale}, {shift})"
            )));
        }
        self.affine = Some(match self.affine {
            Some((s, a)) => (scale * s, scale * a + shift),
            None => (scale, shift),
        });
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        match &self.model {
            Model::Gaussian { mean, .. } => mean.len(),
            Model::Empirical(rows) | Model::File(rows) => rows[0].len(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind_name(&self) -> &'static str {
        match self.model {
            Model::Gaussian { .. } => "gaussian",
            Model::Empirical(_) => "empirical",
            Model::File(_) => "file",
        }
    }

    fn check_count(&self, count: usize) -> Result<()> {
        match &self.model {
            Model::File(rows) if count > rows.len() => Err(Error::Sampler(format!(
                "requested {count} draws but the sample file has {} rows",
                rows.len()
            ))),
            _ => Ok(()),
        }
    }

    /// Calls `f(index, draw)` for the draws of chunk `c`, in order.
    fn for_each_in_chunk<F: FnMut(usize, &[f64])>(&self, count: usize, c: usize, mut f: F) {
        let n = self.dimension();
        let mut rng = chunk_rng(self.seed, c);
        let mut out = vec![0.0; n];
        let mut z = vec![0.0; n];
        for j in 0..chunk_len(count, c) {
            let index = c * CHUNK + j;
            match &self.model {
                Model::Gaussian { mean, factor } => {
                    for zi in z.iter_mut() {
                        *zi = rng.sample(StandardNormal);
                    }
                    for (i, o) in out.iter_mut().enumerate() {
                        let mut acc = mean[i];
                        for (k, zk) in z.iter().enumerate() {
                            acc += factor[(i, k)] * zk;
                        }
                        *o = acc;
                    }
                }
                Model::Empirical(rows) => {
                    out.copy_from_slice(&rows[rng.random_range(0..rows.len())]);
                }
                Model::File(rows) => out.copy_from_slice(&rows[index]),
            }
            if let Some((s, a)) = self.affine {
                for o in out.iter_mut() {
                    *o = s * *o + a;
                }
            }
            f(index, &out);
        }
    }

    /// Map each of `count` draws through `g`, in draw order. Each chunk gets
    /// its own scratch state from `init`.
    pub(crate) fn map_draws<S, T, I, G>(&self, count: usize, exec: Execution, init: I, g: G) -> Result<Vec<T>>
    where
        T: Send,
        I: Fn() -> S + Sync + Send,
        G: Fn(&mut S, &[f64]) -> T + Sync + Send,
    {
        self.check_count(count)?;
        let chunks = exec.map_range(chunk_count(count), |c| {
            let mut state = init();
            let mut v = Vec::with_capacity(chunk_len(count, c));
            self.for_each_in_chunk(count, c, |_, draw| v.push(g(&mut state, draw)));
            v
        });
        Ok(chunks.into_iter().flatten().collect())
    }

    /// The first `count` draws as rows.
    pub fn draws(&self, count: usize, exec: Execution) -> Result<Vec<Vec<f64>>> {
        self.map_draws(count, exec, || (), |_, d| d.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, sample_covariance};

    #[test]
    fn simplex_points_are_valid_and_deterministic() {
        let a = sample_simplex(5, 10_000, 3).unwrap();
        let b = sample_simplex_with(5, 10_000, 3, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_simplex(5, 10_000, 4).unwrap());
        assert_eq!(a.len(), 10_000);
    }

    #[test]
    fn two_asset_marginal_is_uniform() {
        let mut u: Vec<f64> = sample_simplex(2, 100_000, 11)
            .unwrap()
            .iter()
            .map(|w| w.as_slice()[0])
            .collect();
        u.sort_by(f64::total_cmp);
        let n = u.len() as f64;
        let ks = u
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - x).abs().max((x - i as f64 / n).abs()))
            .fold(0.0, f64::max);
        // 1% critical value 1.628 / sqrt(n).
        assert!(ks < 1.628 / n.sqrt(), "KS {ks}");
    }

    #[test]
    fn coordinate_means_are_one_over_n() {
        let n = 7;
        let w = sample_simplex(n, 100_000, 5).unwrap();
        for i in 0..n {
            let x: Vec<f64> = w.iter().map(|w| w.as_slice()[i]).collect();
            let se = crate::stats::std_dev(&x) / (x.len() as f64).sqrt();
            assert!((mean(&x) - 1.0 / n as f64).abs() < 4.0 * se);
        }
    }

    #[test]
    fn gaussian_moments() {
        let cov = vec![vec![4.0, 1.2, 0.0], vec![1.2, 1.0, -0.3], vec![0.0, -0.3, 0.5]];
        let s = ReturnSampler::gaussian(vec![1.0, -2.0, 0.5], &cov, 9).unwrap();
        let rows = s.draws(200_000, Execution::default()).unwrap();
        let m = crate::stats::column_means(&rows);
        let c = sample_covariance(&rows);
        for i in 0..3 {
            assert!((m[i] - [1.0, -2.0, 0.5][i]).abs() < 0.02, "{m:?}");
            for j in 0..3 {
                assert!((c[i][j] - cov[i][j]).abs() < 0.05, "{c:?}");
            }
        }
    }

    #[test]
    fn singular_covariance_is_accepted() {
        let cov = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let s = ReturnSampler::gaussian(vec![0.0, 0.0], &cov, 1).unwrap();
        for row in s.draws(100, Execution::Sequential).unwrap() {
            assert!((row[0] - row[1]).abs() < 1e-7);
        }
    }

    #[test]
    fn bad_covariances_rejected() {
        let asym = vec![vec![1.0, 0.5], vec![0.4, 1.0]];
        assert!(ReturnSampler::gaussian(vec![0.0, 0.0], &asym, 1).is_err());
        let indefinite = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(ReturnSampler::gaussian(vec![0.0, 0.0], &indefinite, 1).is_err());
        assert!(ReturnSampler::gaussian(vec![0.0], &indefinite, 1).is_err());
    }

    #[test]
    fn file_sampler_in_order_and_bounded() {
        let rows = vec![vec![0.1, 0.2], vec![0.3, 0.4], vec![0.5, 0.6]];
        let s = ReturnSampler::file(rows.clone()).unwrap();
        assert_eq!(s.draws(3, Execution::default()).unwrap(), rows);
        assert!(matches!(s.draws(4, Execution::default()), Err(Error::Sampler(_))));
    }

    #[test]
    fn empirical_draws_come_from_rows() {
        let rows = vec![vec![0.1, 0.2], vec![0.3, 0.4]];
        let s = ReturnSampler::empirical(rows.clone(), 2).unwrap();
        let d = s.draws(5000, Execution::default()).unwrap();
        assert!(d.iter().all(|r| rows.contains(r)));
        let first = d.iter().filter(|r| **r == rows[0]).count();
        assert!((2200..2800).contains(&first));
        assert!(ReturnSampler::empirical(vec![], 1).is_err());
    }

    #[test]
    fn draws_cross_chunk_boundaries_deterministically() {
        let cov = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let s = ReturnSampler::gaussian(vec![0.0, 0.0], &cov, 42).unwrap();
        let long = s.draws(CHUNK * 2 + 17, Execution::default()).unwrap();
        let seq = s.draws(CHUNK * 2 + 17, Execution::Sequential).unwrap();
        assert_eq!(long, seq);
        let short = s.draws(CHUNK + 1, Execution::default()).unwrap();
        assert_eq!(&long[..CHUNK + 1], &short[..]);
    }
}
