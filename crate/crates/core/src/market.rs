//! Asset returns, portfolio weights and the geometry of the long-only simplex.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Slack allowed on a negative weight.
pub const WEIGHT_NEG_TOL: f64 = 1e-12;
/// Slack allowed on the weight sum.
pub const WEIGHT_SUM_TOL: f64 = 1e-10;

/// One period's returns for `n >= 2` assets, in fractional units (0.01 = 1%).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MarketReturns(Vec<f64>);

impl MarketReturns {
    pub fn new(returns: Vec<f64>) -> Result<Self> {
        if returns.len() < 2 {
            return Err(Error::InvalidDimension(format!(
                "a market needs at least 2 assets, got {}",
                returns.len()
            )));
        }
        if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(returns))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Returns sorted ascending.
    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.0.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    /// True when every asset has the same return.
    pub fn is_degenerate(&self) -> bool {
        let first = self.0[0];
        self.0.iter().all(|&r| r == first)
    }

    /// `scale * R + shift`, element-wise.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|r| scale * r + shift).collect())
    }
}

impl TryFrom<Vec<f64>> for MarketReturns {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MarketReturns> for Vec<f64> {
    fn from(m: MarketReturns) -> Self {
        m.0
    }
}

/// Long-only weights: non-negative and summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PortfolioWeights(Vec<f64>);

impl PortfolioWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDimension("empty weight vector".into()));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, &w)| w < -WEIGHT_NEG_TOL) {
            return Err(Error::InvalidInput(format!("weight {i} is negative ({w:e})")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Self(weights))
    }

    /// Rescales a non-negative vector onto the simplex.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidInput(
                "cannot normalize weights with negative entries or zero sum".into(),
            ));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn equal(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// All mass on asset `i`.
    pub fn vertex(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// L1 distance, in fractions (0 to 2).
    pub fn l1_distance(&self, other: &PortfolioWeights) -> f64 {
        l1_distance(&self.0, &other.0)
    }

    /// L1 distance to the equally weighted portfolio, in fractions.
    pub fn concentration(&self) -> f64 {
        let e = 1.0 / self.0.len() as f64;
        self.0.iter().map(|w| (w - e).abs()).sum()
    }
}

impl TryFrom<Vec<f64>> for PortfolioWeights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PortfolioWeights> for Vec<f64> {
    fn from(w: PortfolioWeights) -> Self {
        w.0
    }
}

pub(crate) fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Σ w_i R_i.
pub fn portfolio_return(w: &PortfolioWeights, r: &MarketReturns) -> Result<f64> {
    if w.len() != r.len() {
        return Err(Error::LengthMismatch {
            expected: r.len(),
            actual: w.len(),
        });
    }
    Ok(dot(w.as_slice(), r.as_slice()))
}

/// Distinct return values with their multiplicities and asset indices.
///
/// Group indices are 0-based positions in `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinctReturnGroups {
    /// Distinct values, ascending. A group's value is the mean of its members.
    pub values: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// Asset indices (0-based) of each group.
    pub index_sets: Vec<Vec<usize>>,
    /// Groups of multiplicity one.
    pub singles: Vec<usize>,
    /// Groups of multiplicity greater than one.
    pub repeated: Vec<usize>,
}

impl DistinctReturnGroups {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total asset count.
    pub fn asset_count(&self) -> usize {
        self.multiplicities.iter().sum()
    }
}

/// Groups returns whose sorted neighbours differ by at most `tol`.
///
/// Grouping is single-linkage over the sorted values, so with `tol > 0` a
/// chain of close values collapses into one group.
pub fn group_distinct(r: &MarketReturns, tol: f64) -> DistinctReturnGroups {
    let tol = tol.max(0.0);
    let x = r.as_slice();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));

    let mut index_sets: Vec<Vec<usize>> = Vec::new();
    let mut prev = f64::NAN;
    for &i in &order {
        match index_sets.last_mut() {
            Some(set) if (x[i] - prev).abs() <= tol => set.push(i),
            _ => index_sets.push(vec![i]),
        }
        prev = x[i];
    }
    for set in &mut index_sets {
        set.sort_unstable();
    }

    let values: Vec<f64> = index_sets
        .iter()
        .map(|set| {
            if set.len() == 1 {
                x[set[0]]
            } else {
                set.iter().map(|&i| x[i]).sum::<f64>() / set.len() as f64
            }
        })
        .collect();
    let multiplicities: Vec<usize> = index_sets.iter().map(Vec::len).collect();
    let singles = (0..values.len()).filter(|&g| multiplicities[g] == 1).collect();
    let repeated = (0..values.len()).filter(|&g| multiplicities[g] > 1).collect();

    DistinctReturnGroups {
        values,
        multiplicities,
        index_sets,
        singles,
        repeated,
    }
}

/// A regular simplex centred at the origin of `R^{n-1}`.
///
/// Vertices are the projections of the standard basis vectors of `R^n` onto
/// the hyperplane `Σ x = 0`, expressed in the Helmert orthonormal basis of
/// that hyperplane. The edge length is therefore `√2`.
#[derive(Debug, Clone)]
pub struct SimplexGeometry {
    /// `n` vertices, each of dimension `n - 1`.
    pub vertices: Vec<DVector<f64>>,
    /// Columns `v_i - v_n` for `i < n`.
    pub transform: DMatrix<f64>,
    pub inverse_transform: DMatrix<f64>,
}

impl SimplexGeometry {
    pub fn asset_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn dimension(&self) -> usize {
        self.vertices.len() - 1
    }
}

pub fn build_regular_simplex(n: usize) -> Result<SimplexGeometry> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "a simplex needs at least 2 vertices, got {n}"
        )));
    }
    let d = n - 1;
    // Helmert row k (1-based): (1, .., 1, -k, 0, ..) / sqrt(k (k + 1)), k ones.
    let mut vertices = vec![DVector::zeros(d); n];
    for k in 1..=d {
        let scale = 1.0 / ((k * (k + 1)) as f64).sqrt();
        for (i, v) in vertices.iter_mut().enumerate().take(k + 1) {
            v[k - 1] = if i < k { scale } else { -(k as f64) * scale };
        }
    }

    let last = vertices[d].clone();
    let transform = DMatrix::from_fn(d, d, |row, col| vertices[col][row] - last[row]);
    let inverse_transform = transform
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("simplex transform is singular".into()))?;

    Ok(SimplexGeometry {
        vertices,
        transform,
        inverse_transform,
    })
}

/// Cartesian image `T (w_1, .., w_{n-1}) + v_n` of a portfolio.
pub fn barycentric_to_cartesian(geom: &SimplexGeometry, w: &PortfolioWeights) -> Result<Vec<f64>> {
    let n = geom.asset_count();
    if w.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: w.len(),
        });
    }
    let head = DVector::from_column_slice(&w.as_slice()[..n - 1]);
    let p = &geom.transform * head + &geom.vertices[n - 1];
    Ok(p.iter().copied().collect())
}

/// Barycentric coordinates of an arbitrary point; the entries sum to one but
/// may be negative for points outside the simplex.
pub fn barycentric_coordinates(geom: &SimplexGeometry, p: &[f64]) -> Result<Vec<f64>> {
    let d = geom.dimension();
    if p.len() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            actual: p.len(),
        });
    }
    let shifted = DVector::from_column_slice(p) - &geom.vertices[d];
    let head = &geom.inverse_transform * shifted;
    if head.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite barycentric coordinates".into()));
    }
    let mut out: Vec<f64> = head.iter().copied().collect();
    out.push(1.0 - head.sum());
    Ok(out)
}

/// Inverse of [`barycentric_to_cartesian`] for points of the simplex.
pub fn cartesian_to_barycentric(geom: &SimplexGeometry, p: &[f64]) -> Result<PortfolioWeights> {
    let x = barycentric_coordinates(geom, p)?;
    PortfolioWeights::new(x).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::InvalidInput(format!("point is outside the simplex: {msg}")),
        other => other,
    })
}

/// Row vector `A = R' [I; -1'] T^{-1}` mapping Cartesian points to centred
/// portfolio returns: `R'x = A x̆ - A v_n + R_n`.
pub fn return_functional(geom: &SimplexGeometry, r: &MarketReturns) -> Result<Vec<f64>> {
    let n = geom.asset_count();
    if r.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: r.len(),
        });
    }
    let x = r.as_slice();
    let rn = x[n - 1];
    let lead = DVector::from_iterator(n - 1, x[..n - 1].iter().map(|ri| ri - rn));
    let a = geom.inverse_transform.transpose() * lead;
    Ok(a.iter().copied().collect())
}
