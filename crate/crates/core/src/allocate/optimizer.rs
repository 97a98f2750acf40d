//! Derivative-free Nelder–Mead minimization.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iters: usize,
    /// Stop when the spread of simplex values and the simplex diameter both
    /// fall below this.
    pub tolerance: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `start`. `on_iter` is called after every iteration with
/// the current best point and value.
pub fn nelder_mead<F, G>(start: &[f64], opts: NelderMeadOptions, mut f: F, mut on_iter: G) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64], f64),
{
    let d = start.len();
    let mut points: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..d {
        let mut p = start.to_vec();
        p[i] += opts.initial_step;
        points.push(p);
    }
    let mut values: Vec<f64> = points.iter().map(|p| f(p)).collect();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        points = order.iter().map(|&i| points[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[d] - values[0];
        let diameter = points[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&points[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= opts.tolerance && diameter <= opts.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..d)
            .map(|j| points[..d].iter().map(|p| p[j]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..d)
                .map(|j| centroid[j] + t * (points[d][j] - centroid[j]))
                .collect()
        };

        let reflected = along(-1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                points[d] = expanded;
                values[d] = fe;
            } else {
                points[d] = reflected;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            points[d] = reflected;
            values[d] = fr;
        } else {
            let (contracted, fc) = if fr < values[d] {
                let c = along(-0.5);
                let fc = f(&c);
                (c, fc)
            } else {
                let c = along(0.5);
                let fc = f(&c);
                (c, fc)
            };
            if fc < values[d].min(fr) {
                points[d] = contracted;
                values[d] = fc;
            } else {
                for i in 1..=d {
                    let p: Vec<f64> = (0..d)
                        .map(|j| points[0][j] + 0.5 * (points[i][j] - points[0][j]))
                        .collect();
                    values[i] = f(&p);
                    points[i] = p;
                }
            }
        }

        let best = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        on_iter(&points[best], values[best]);
    }

    let best = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    NelderMeadResult {
        x: points[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OPTS: NelderMeadOptions = NelderMeadOptions {
        max_iters: 5000,
        tolerance: 1e-12,
        initial_step: 0.5,
    };

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(&[-1.2, 1.0], OPTS, f, |_, _| {});
        assert!(r.converged);
        assert!(
            (r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5,
            "{:?}",
            r.x
        );
    }

    #[test]
    fn one_dimensional_and_monotone_best() {
        let mut best = Vec::new();
        let r = nelder_mead(&[3.0], OPTS, |x| (x[0] + 2.0).powi(2), |_, v| best.push(v));
        assert!((r.x[0] + 2.0).abs() < 1e-6);
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let opts = NelderMeadOptions { max_iters: 3, ..OPTS };
        let r = nelder_mead(
            &[0.0, 0.0],
            opts,
            |x| (x[0] - 5.0).powi(2) + x[1] * x[1],
            |_, _| {},
        );
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }
}
