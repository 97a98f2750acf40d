//! Cross-sectional PDF of portfolio returns.

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::cdf::{
    binomial, group_terms, plus_minus, reflect, upper_side_is_shorter, varsi_cdf, CLOSED_FORM_UNSTABLE_FROM,
};
use crate::market::{group_distinct, DistinctReturnGroups, MarketReturns};
use crate::{Error, Execution, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdfMethod {
    Bspline,
    ClosedForm,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdfResult {
    pub density: f64,
    pub method: PdfMethod,
    pub stability_warning: bool,
}

/// Finite-difference step for [`numeric_pdf`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Step {
    #[default]
    Auto,
    Fixed(f64),
}

fn check_support(r: &MarketReturns) -> Result<()> {
    if r.is_degenerate() {
        return Err(Error::DegenerateSupport(r.as_slice()[0]));
    }
    Ok(())
}

/// Normalized B-spline of order `knots.len() - 1` at `x` by Cox–de Boor.
///
/// `knots` must be sorted. Intervals are half-open except the last
/// non-empty one, which is closed on the right.
fn bspline_basis(knots: &[f64], x: f64) -> f64 {
    let n = knots.len();
    let last = knots[n - 1];
    if x < knots[0] || x > last {
        return 0.0;
    }
    let last_open = (0..n - 1).rev().find(|&i| knots[i] < knots[i + 1]);
    let mut nb: Vec<f64> = (0..n - 1)
        .map(|i| {
            let inside = knots[i] <= x && x < knots[i + 1];
            let closing = x == last && Some(i) == last_open;
            if inside || closing {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for j in 2..n {
        for i in 0..n - j {
            let left_den = knots[i + j - 1] - knots[i];
            let right_den = knots[i + j] - knots[i + 1];
            let left = if left_den > 0.0 {
                (x - knots[i]) / left_den * nb[i]
            } else {
                0.0
            };
            let right = if right_den > 0.0 {
                (knots[i + j] - x) / right_den * nb[i + 1]
            } else {
                0.0
            };
            nb[i] = left + right;
        }
    }
    nb[0]
}

/// Density as a scaled B-spline on the sorted return knots.
pub fn bspline_pdf(r: &MarketReturns, x: f64) -> Result<PdfResult> {
    check_support(r)?;
    let knots = r.sorted();
    let k = (knots.len() - 1) as f64;
    let span = knots[knots.len() - 1] - knots[0];
    Ok(PdfResult {
        density: k / span * bspline_basis(&knots, x),
        method: PdfMethod::Bspline,
        stability_warning: false,
    })
}

fn closed_form_density(r: &MarketReturns, groups: &DistinctReturnGroups, x: f64) -> f64 {
    let n = r.len();
    let mut total = TwoFloat::from(0.0);
    for t in group_terms(r, groups) {
        if x < t.value {
            continue;
        }
        let d = TwoFloat::new_sub(x, t.value);
        let m = t.multiplicity;
        let mut inner = TwoFloat::from(0.0);
        for j in 0..m.min(n - 1) {
            let p = n - 1 - j;
            let factor = if p == 1 {
                TwoFloat::from(1.0)
            } else {
                d.powi(p as i32 - 1) * p as f64
            };
            let sign = plus_minus((j + m + 1) % 2 == 0);
            inner += binomial(n - 1, j) * factor * t.phi[m - 1 - j] * sign;
        }
        total += inner * t.inv_product;
    }
    f64::from(total)
}

/// Derivative of the closed-form CDF, with the same grouping and the same
/// choice of the shorter side of the support.
pub fn lasserre_pdf(r: &MarketReturns, x: f64, groups: &DistinctReturnGroups) -> Result<PdfResult> {
    check_support(r)?;
    let mut warn = r.len() >= CLOSED_FORM_UNSTABLE_FROM;
    let density = if x < r.min() || x > r.max() {
        0.0
    } else {
        let total = if upper_side_is_shorter(groups, x) {
            let (neg, neg_groups) = reflect(r, groups);
            closed_form_density(&neg, &neg_groups, -x)
        } else {
            closed_form_density(r, groups, x)
        };
        if total.is_finite() {
            total.max(0.0)
        } else {
            warn = true;
            0.0
        }
    };
    Ok(PdfResult {
        density,
        method: PdfMethod::ClosedForm,
        stability_warning: warn,
    })
}

/// Default five-point step for a market.
pub fn default_step(r: &MarketReturns) -> f64 {
    ((r.max() - r.min()) * 2.5e-4).max(1e-12)
}

/// Five-point difference of the Varsi CDF.
///
/// With [`Step::Auto`] the stencil avoids the knots, where the CDF's
/// polynomial pieces meet: it is central when no knot lies strictly inside,
/// one-sided on a knot-free side otherwise (the right side first, matching
/// the right-continuous spline), and shrinks the step only when both sides are
/// crowded. [`Step::Fixed`] always uses the central stencil at the given step.
/// Negative outputs, from undershoot next to knots, are clamped to 0.
pub fn numeric_pdf(r: &MarketReturns, x: f64, step: Step) -> Result<PdfResult> {
    check_support(r)?;
    let f = |t: f64| varsi_cdf(r, t).value;
    let central = |h: f64| (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h);
    // h > 0 steps right, h < 0 steps left.
    let one_sided = |h: f64| {
        (-25.0 * f(x) + 48.0 * f(x + h) - 36.0 * f(x + 2.0 * h) + 16.0 * f(x + 3.0 * h)
            - 3.0 * f(x + 4.0 * h))
            / (12.0 * h)
    };
    let d = match step {
        Step::Fixed(h) if h > 0.0 && h.is_finite() => central(h),
        Step::Fixed(h) => {
            return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
        }
        Step::Auto => {
            if x < r.min() || x > r.max() {
                0.0
            } else {
                let h = default_step(r);
                let knots = r.sorted();
                let right_gap = knots.iter().find(|&&k| k > x).map_or(f64::INFINITY, |k| k - x);
                let left_gap = knots
                    .iter()
                    .rev()
                    .find(|&&k| k < x)
                    .map_or(f64::INFINITY, |k| x - k);
                let on_knot = knots.contains(&x);
                if x == r.max() {
                    one_sided(-h.min(left_gap / 4.0))
                } else if !on_knot && right_gap >= 2.0 * h && left_gap >= 2.0 * h {
                    central(h)
                } else if right_gap >= 4.0 * h {
                    one_sided(h)
                } else if left_gap >= 4.0 * h {
                    one_sided(-h.min(left_gap / 4.0))
                } else {
                    one_sided(right_gap / 4.0)
                }
            }
        }
    };
    Ok(PdfResult {
        density: d.max(0.0),
        method: PdfMethod::Numeric,
        stability_warning: false,
    })
}

/// Evaluate one method at `x`. `group_tol` only affects the closed form.
pub fn evaluate_pdf(r: &MarketReturns, x: f64, method: PdfMethod, group_tol: f64) -> Result<PdfResult> {
    match method {
        PdfMethod::Bspline => bspline_pdf(r, x),
        PdfMethod::ClosedForm => lasserre_pdf(r, x, &group_distinct(r, group_tol)),
        PdfMethod::Numeric => numeric_pdf(r, x, Step::Auto),
    }
}

/// `(x, density)` over the grid by the B-spline route.
pub fn pdf_curve(r: &MarketReturns, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    pdf_curve_with(r, grid, PdfMethod::Bspline, Execution::default())
}

pub fn pdf_curve_with(
    r: &MarketReturns,
    grid: &[f64],
    method: PdfMethod,
    exec: Execution,
) -> Result<Vec<(f64, f64)>> {
    check_support(r)?;
    let groups = group_distinct(r, 0.0);
    exec.try_map_range(grid.len(), |i| {
        let x = grid[i];
        let p = match method {
            PdfMethod::ClosedForm => lasserre_pdf(r, x, &groups)?,
            other => evaluate_pdf(r, x, other, 0.0)?,
        };
        Ok((x, p.density))
    })
}

/// Trapezoid rule over a sampled curve.
pub fn trapezoid(curve: &[(f64, f64)]) -> f64 {
    curve
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}
