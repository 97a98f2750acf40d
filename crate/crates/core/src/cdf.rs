//! Cross-sectional CDF: the score of a portfolio.
//!
//! `S(r*)` is the fraction of the simplex volume on which the portfolio
//! return is at most `r*`.

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::market::{group_distinct, DistinctReturnGroups, MarketReturns};
use crate::Execution;

/// Asset count from which the closed forms lose precision in double arithmetic.
pub const CLOSED_FORM_UNSTABLE_FROM: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdfMethod {
    Varsi,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfResult {
    pub value: f64,
    pub method: CdfMethod,
    pub stability_warning: bool,
    /// Every asset return is equal; the CDF is a unit step at that value.
    pub degenerate: bool,
}

/// Reusable buffers for Varsi's recurrence.
///
/// Hot loops (Monte Carlo, optimizers) keep one per thread to avoid
/// reallocating on each score.
#[derive(Debug, Default, Clone)]
pub struct VarsiWorkspace {
    nonneg: Vec<f64>,
    neg: Vec<f64>,
    a: Vec<f64>,
}

/// Operation counts of one recurrence run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarsiTrace {
    /// Assets with `R_i - r* < 0`.
    pub negatives: usize,
    /// Assets with `R_i - r* >= 0`.
    pub nonnegatives: usize,
    pub inner_updates: usize,
}

impl VarsiWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Volume fraction of `{x in simplex : R'x <= r*}`.
    ///
    /// Degenerate markets are not special-cased here; see [`varsi_cdf`].
    pub fn score(&mut self, returns: &[f64], r_star: f64) -> f64 {
        self.run(returns, r_star).0
    }

    fn run(&mut self, returns: &[f64], r_star: f64) -> (f64, VarsiTrace) {
        self.nonneg.clear();
        self.neg.clear();
        for &r in returns {
            let u = r - r_star;
            // u = 0 counts as non-negative: right-continuous at return atoms.
            if u >= 0.0 {
                self.nonneg.push(u);
            } else {
                self.neg.push(u);
            }
        }
        let k = self.nonneg.len();
        self.a.clear();
        self.a.resize(k + 1, 0.0);
        self.a[0] = 1.0;
        for &x in &self.neg {
            for j in 1..=k {
                let y = self.nonneg[j - 1];
                self.a[j] = (y * self.a[j] - x * self.a[j - 1]) / (y - x);
            }
        }
        let trace = VarsiTrace {
            negatives: self.neg.len(),
            nonnegatives: k,
            inner_updates: self.neg.len() * k,
        };
        (self.a[k], trace)
    }
}

fn degenerate_step(r: &MarketReturns, r_star: f64, method: CdfMethod) -> Option<CdfResult> {
    r.is_degenerate().then(|| CdfResult {
        value: if r_star >= r.as_slice()[0] { 1.0 } else { 0.0 },
        method,
        stability_warning: false,
        degenerate: true,
    })
}

/// Exact score by Varsi's O(n²) recurrence.
pub fn varsi_cdf(r: &MarketReturns, r_star: f64) -> CdfResult {
    if let Some(step) = degenerate_step(r, r_star, CdfMethod::Varsi) {
        return step;
    }
    let value = VarsiWorkspace::new().score(r.as_slice(), r_star);
    CdfResult {
        value: value.clamp(0.0, 1.0),
        method: CdfMethod::Varsi,
        stability_warning: false,
        degenerate: false,
    }
}

/// [`varsi_cdf`] together with its operation counts.
pub fn varsi_cdf_traced(r: &MarketReturns, r_star: f64) -> (CdfResult, VarsiTrace) {
    let (value, trace) = VarsiWorkspace::new().run(r.as_slice(), r_star);
    let result = degenerate_step(r, r_star, CdfMethod::Varsi).unwrap_or(CdfResult {
        value: value.clamp(0.0, 1.0),
        method: CdfMethod::Varsi,
        stability_warning: false,
        degenerate: false,
    });
    (result, trace)
}

/// Complete homogeneous symmetric polynomial `h_k(x)`: the sum over all
/// non-increasing index k-tuples of the product of the indexed entries.
///
/// Uses Newton's identity `h_k = (1/k) Σ_{j=1..k} p_j h_{k-j}` with power
/// sums `p_j`, which costs O(n·k + k²).
pub fn phi_k(x: &[f64], k: usize) -> f64 {
    complete_homogeneous(x, k)[k]
}

/// `h_0..=h_k` of `x`.
pub(crate) fn complete_homogeneous(x: &[f64], k: usize) -> Vec<f64> {
    let mut power_sums = vec![0.0; k + 1];
    for &xi in x {
        let mut p = 1.0;
        for ps in power_sums.iter_mut().skip(1) {
            p *= xi;
            *ps += p;
        }
    }
    let mut h = vec![0.0; k + 1];
    h[0] = 1.0;
    for m in 1..=k {
        let s: f64 = (1..=m).map(|j| power_sums[j] * h[m - j]).sum();
        h[m] = s / m as f64;
    }
    h
}

pub(crate) fn binomial(n: usize, k: usize) -> TwoFloat {
    if k > n {
        return TwoFloat::from(0.0);
    }
    let k = k.min(n - k);
    (1..=k).fold(TwoFloat::from(1.0), |acc, i| {
        div_dd(acc * (n - k + i) as f64, TwoFloat::from(i as f64))
    })
}

/// Double-double quotient with two correction steps. The crate's `/` is
/// only accurate to about 1e-17.
pub(crate) fn div_dd(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

pub(crate) fn plus_minus(even: bool) -> f64 {
    if even {
        1.0
    } else {
        -1.0
    }
}

/// Per-group data shared by the closed-form CDF and PDF, in double-double.
pub(crate) struct GroupTerms {
    pub value: f64,
    pub multiplicity: usize,
    /// `∏_{j ∉ J_i} 1 / (R_j - S_i)`.
    pub inv_product: TwoFloat,
    /// `Φ_0..Φ_{m-1}` of the vector `b_i = (1 / (R_j - S_i))_{j ∉ J_i}`.
    pub phi: Vec<TwoFloat>,
}

fn complete_homogeneous_dd(x: &[TwoFloat], k: usize) -> Vec<TwoFloat> {
    let zero = TwoFloat::from(0.0);
    let mut power_sums = vec![zero; k + 1];
    for &xi in x {
        let mut p = TwoFloat::from(1.0);
        for ps in power_sums.iter_mut().skip(1) {
            p *= xi;
            *ps += p;
        }
    }
    let mut h = vec![zero; k + 1];
    h[0] = TwoFloat::from(1.0);
    for m in 1..=k {
        let mut s = zero;
        for j in 1..=m {
            s += power_sums[j] * h[m - j];
        }
        h[m] = div_dd(s, TwoFloat::from(m as f64));
    }
    h
}

pub(crate) fn group_terms(r: &MarketReturns, groups: &DistinctReturnGroups) -> Vec<GroupTerms> {
    let x = r.as_slice();
    (0..groups.len())
        .map(|g| {
            let s = groups.values[g];
            let members = &groups.index_sets[g];
            let m = groups.multiplicities[g];
            let b: Vec<TwoFloat> = (0..x.len())
                .filter(|i| members.binary_search(i).is_err())
                .map(|i| div_dd(TwoFloat::from(1.0), TwoFloat::new_sub(x[i], s)))
                .collect();
            GroupTerms {
                value: s,
                multiplicity: m,
                inv_product: b.iter().fold(TwoFloat::from(1.0), |acc, &v| acc * v),
                phi: complete_homogeneous_dd(&b, m - 1),
            }
        })
        .collect()
}

/// The same market and grouping under `R -> -R`.
pub(crate) fn reflect(
    r: &MarketReturns,
    groups: &DistinctReturnGroups,
) -> (MarketReturns, DistinctReturnGroups) {
    let neg =
        MarketReturns::new(r.as_slice().iter().map(|v| -v).collect()).expect("negation keeps returns finite");
    let d = groups.len();
    let multiplicities: Vec<usize> = groups.multiplicities.iter().rev().copied().collect();
    let groups = DistinctReturnGroups {
        values: groups.values.iter().rev().map(|v| -v).collect(),
        index_sets: groups.index_sets.iter().rev().cloned().collect(),
        singles: (0..d).filter(|&g| multiplicities[g] == 1).collect(),
        repeated: (0..d).filter(|&g| multiplicities[g] > 1).collect(),
        multiplicities,
    };
    (neg, groups)
}

/// Whether fewer group terms lie above `x` than below it.
pub(crate) fn upper_side_is_shorter(groups: &DistinctReturnGroups, x: f64) -> bool {
    let below = groups.values.iter().filter(|&&v| v < x).count();
    let above = groups.values.iter().filter(|&&v| v > x).count();
    above < below
}

fn closed_form_sum(r: &MarketReturns, groups: &DistinctReturnGroups, r_star: f64) -> f64 {
    let n = r.len();
    let mut total = TwoFloat::from(0.0);
    for t in group_terms(r, groups) {
        if r_star <= t.value {
            continue;
        }
        let d = TwoFloat::new_sub(r_star, t.value);
        let m = t.multiplicity;
        let mut inner = TwoFloat::from(0.0);
        for j in 0..m {
            let sign = plus_minus((j + m + 1) % 2 == 0);
            inner += binomial(n - 1, j) * d.powi((n - 1 - j) as i32) * t.phi[m - 1 - j] * sign;
        }
        total += inner * t.inv_product;
    }
    f64::from(total)
}

/// Score by the closed form with equal-return corrections.
///
/// Terms are accumulated in double-double arithmetic.
/// For a group `S_i` of multiplicity `m_i` the contribution is
/// `Σ_{j<m_i} (-1)^{j+m_i+1} C(n-1, j) (r* - S_i)_+^{n-1-j} Φ_{m_i-1-j}(b_i) / ∏_{k∉J_i}(R_k - S_i)`,
/// which for `m_i = 1` is the single-return term. When fewer groups lie above
/// `r*` than below, the sum runs over the reflected market `-R` at `-r*` and
/// the complement is returned, which keeps the number of cancelling terms
/// small. Flags `stability_warning` from 20 assets on, or when the sum is not
/// finite.
pub fn lasserre_cdf(r: &MarketReturns, r_star: f64, groups: &DistinctReturnGroups) -> CdfResult {
    if let Some(step) = degenerate_step(r, r_star, CdfMethod::ClosedForm) {
        return step;
    }
    let mut warn = r.len() >= CLOSED_FORM_UNSTABLE_FROM;
    let value = if r_star >= r.max() {
        1.0
    } else if r_star <= r.min() {
        0.0
    } else {
        let total = if upper_side_is_shorter(groups, r_star) {
            let (neg, neg_groups) = reflect(r, groups);
            1.0 - closed_form_sum(&neg, &neg_groups, -r_star)
        } else {
            closed_form_sum(r, groups, r_star)
        };
        if !total.is_finite() {
            warn = true;
        }
        total
    };
    CdfResult {
        value: if value.is_nan() {
            0.0
        } else {
            value.clamp(0.0, 1.0)
        },
        method: CdfMethod::ClosedForm,
        stability_warning: warn,
        degenerate: false,
    }
}

/// [`lasserre_cdf`] with exact-equality grouping.
pub fn lasserre_cdf_exact_groups(r: &MarketReturns, r_star: f64) -> CdfResult {
    lasserre_cdf(r, r_star, &group_distinct(r, 0.0))
}

/// `(r*, score)` at each grid point, in grid order.
pub fn score_curve(r: &MarketReturns, grid: &[f64]) -> Vec<(f64, f64)> {
    score_curve_with(r, grid, Execution::default())
}

pub fn score_curve_with(r: &MarketReturns, grid: &[f64], exec: Execution) -> Vec<(f64, f64)> {
    exec.map_slice(grid, |&x| (x, varsi_cdf(r, x).value))
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|i| if i == count - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num::{BigInt, BigRational, ToPrimitive, Zero};
    use proptest::prelude::*;

    fn market(v: &[f64]) -> MarketReturns {
        MarketReturns::new(v.to_vec()).unwrap()
    }

    /// Sum over non-increasing index tuples, by explicit recursion.
    fn phi_brute(x: &[f64], k: usize) -> f64 {
        fn rec(x: &[f64], k: usize, upper: usize) -> f64 {
            if k == 0 {
                return 1.0;
            }
            (0..=upper).map(|i| x[i] * rec(x, k - 1, i)).sum()
        }
        if x.is_empty() {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        rec(x, k, x.len() - 1)
    }

    /// Score for distinct integer returns at a rational point, in exact
    /// arithmetic: Σ_{R_k <= r*} (r* - R_k)^{n-1} / ∏_{i≠k}(R_i - R_k).
    fn distinct_returns_score_exact(x: &[i64], r_star: &BigRational) -> f64 {
        let n = x.len();
        let big = |v: i64| BigRational::from_integer(BigInt::from(v));
        let mut total = BigRational::zero();
        for k in 0..n {
            let xk = big(x[k]);
            if &xk > r_star {
                continue;
            }
            let mut term = (r_star - &xk).pow(n as i32 - 1);
            for i in (0..n).filter(|&i| i != k) {
                term /= big(x[i]) - &xk;
            }
            total += term;
        }
        total.to_f64().unwrap()
    }

    #[test]
    fn varsi_three_asset_median() {
        let r = market(&[0.0, 0.01, 0.015]);
        let s = varsi_cdf(&r, 0.00866);
        assert!((s.value - 0.5).abs() <= 0.005, "{}", s.value);
        assert!(!s.stability_warning && !s.degenerate);
    }

    #[test]
    fn varsi_outside_support() {
        let r = market(&[0.0, 0.01, 0.015]);
        assert_eq!(varsi_cdf(&r, -0.001).value, 0.0);
        assert_eq!(varsi_cdf(&r, 0.015).value, 1.0);
        assert_eq!(varsi_cdf(&r, 0.5).value, 1.0);
    }

    #[test]
    fn varsi_two_assets_is_uniform() {
        let r = market(&[0.0, 0.01]);
        assert_abs_diff_eq!(varsi_cdf(&r, 0.0025).value, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_market_is_a_step() {
        let r = market(&[0.02, 0.02, 0.02]);
        let at = varsi_cdf(&r, 0.02);
        assert!(at.degenerate);
        assert_eq!(at.value, 1.0);
        assert_eq!(varsi_cdf(&r, 0.019).value, 0.0);
        assert_eq!(lasserre_cdf_exact_groups(&r, 0.02).value, 1.0);
    }

    #[test]
    fn inner_updates_are_j_times_k() {
        let r = market(&[-0.3, 0.1, 0.2, -0.05, 0.4, 0.0, 0.7]);
        for r_star in [-1.0, -0.1, 0.0, 0.15, 0.3, 1.0] {
            let (_, t) = varsi_cdf_traced(&r, r_star);
            assert_eq!(t.negatives + t.nonnegatives, r.len());
            assert_eq!(t.inner_updates, t.negatives * t.nonnegatives);
            assert!(t.inner_updates <= r.len() * r.len() / 4);
        }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi_k(&[0.3, -2.0], 0), 1.0);
        assert_eq!(phi_k(&[1.0, 1.0], 2), 3.0);
        assert_eq!(phi_k(&[], 0), 1.0);
        assert_eq!(phi_k(&[], 3), 0.0);
    }

    #[test]
    fn closed_form_tie_example_matches_varsi() {
        let r = market(&[0.01, 0.01, 0.02]);
        let c = lasserre_cdf_exact_groups(&r, 0.015);
        let v = varsi_cdf(&r, 0.015);
        assert_abs_diff_eq!(c.value, v.value, epsilon = 1e-9);
        assert_abs_diff_eq!(v.value, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_flags_large_markets() {
        let x: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).sin()).collect();
        let r = market(&x);
        assert!(lasserre_cdf_exact_groups(&r, 0.0).stability_warning);
        assert!(!lasserre_cdf_exact_groups(&market(&x[..10]), 0.0).stability_warning);
        assert_abs_diff_eq!(lasserre_cdf_exact_groups(&r, 2.0).value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn score_curve_edges() {
        let r = market(&[0.0, 0.01, 0.015]);
        assert_eq!(score_curve(&r, &[-1.0]), vec![(-1.0, 0.0)]);
        let c = score_curve(&r, &linspace(0.0, 0.015, 11));
        assert_eq!(c.first().unwrap().1, 0.0);
        assert_eq!(c.last().unwrap().1, 1.0);
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(-1.0, 2.0, 4);
        assert_eq!(g, vec![-1.0, 0.0, 1.0, 2.0]);
        assert_eq!(linspace(3.0, 4.0, 1), vec![3.0]);
    }

    proptest! {
        #[test]
        fn phi_matches_brute_force(x in prop::collection::vec(-2.0f64..2.0, 1..=6), k in 0usize..=4) {
            let fast = phi_k(&x, k);
            let slow = phi_brute(&x, k);
            prop_assert!((fast - slow).abs() <= 1e-10 * (1.0 + slow.abs()), "{fast} vs {slow}");
        }

        #[test]
        fn closed_form_distinct_matches_direct_sum(
            x in prop::collection::btree_set(-1000i64..1000, 2..=10),
            t in 0.0f64..1.0,
        ) {
            let x: Vec<i64> = x.into_iter().collect();
            let (lo, hi) = (x[0], x[x.len() - 1]);
            // r* = (2a + 1) / 2000 for an integer a in [lo, hi).
            let a = lo + ((hi - lo) as f64 * t) as i64;
            let a = a.min(hi - 1);
            let exact = distinct_returns_score_exact(&x, &BigRational::new(BigInt::from(2 * a + 1), BigInt::from(2)));
            let r = market(&x.iter().map(|&v| v as f64 / 1000.0).collect::<Vec<_>>());
            let c = lasserre_cdf_exact_groups(&r, (2 * a + 1) as f64 / 2000.0).value;
            prop_assert!((c - exact).abs() <= 1e-12, "{c} vs {exact}");
        }

        #[test]
        fn varsi_is_monotone_and_bounded(
            x in prop::collection::vec(-0.1f64..0.1, 2..=30),
            mut grid in prop::collection::vec(-0.15f64..0.15, 1..40),
        ) {
            let r = market(&x);
            grid.sort_by(f64::total_cmp);
            let curve = score_curve(&r, &grid);
            for w in curve.windows(2) {
                prop_assert!(w[1].1 >= w[0].1 - 1e-15, "{:?}", w);
            }
            prop_assert!(curve.iter().all(|&(_, s)| (0.0..=1.0).contains(&s)));
        }

        #[test]
        fn varsi_affine_invariance(
            x in prop::collection::vec(-1.0f64..1.0, 2..=25),
            t in 0.0f64..1.0,
            scale in 0.1f64..10.0,
            shift in -1.0f64..1.0,
        ) {
            let r = market(&x);
            let r_star = r.min() + t * (r.max() - r.min());
            let a = varsi_cdf(&r, r_star).value;
            let b = varsi_cdf(&r.affine(scale, shift).unwrap(), scale * r_star + shift).value;
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}
