use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use portdist::allocate::{
    backtest, mean_variance_portfolio, optimize_score_portfolio, BacktestConfig, OptimizeConfig, Scenarios,
    Strategy,
};
use portdist::cdf::{lasserre_cdf, linspace, score_curve, varsi_cdf, CdfResult};
use portdist::io::ReturnMatrix;
use portdist::market::group_distinct;
use portdist::moments::{moment_closed, moment_general};
use portdist::pdf::{evaluate_pdf, PdfMethod};
use portdist::scoredist::{
    estimate_score_distribution, perf_measure, sample_simplex, PerfMeasureKind, ReturnSampler, DEFAULT_DRAWS,
};
use portdist::stats::{column_means, quadratic_form, sample_covariance};
use portdist::{Error, MarketReturns, PortfolioWeights, Result};

use crate::args::*;
use crate::output::{with_sink, write_json, write_pairs, Envelope};

pub fn run(cli: Cli, argv: &[String]) -> Result<()> {
    match cli.command {
        Command::Cdf(a) => cdf(a, argv),
        Command::Pdf(a) => pdf(a, argv),
        Command::Moments(a) => moments(a, argv),
        Command::ScoreDist(a) => score_dist(a, argv),
        Command::Optimize(a) => optimize(a, argv),
        Command::Backtest(a) => run_backtest(a, argv),
        Command::SampleSimplex(a) => simplex(a, argv),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Io(e.into()))
}

/// One market snapshot: the only row, or the one picked by `--row`.
fn snapshot(a: &SnapshotArgs) -> Result<MarketReturns> {
    let m = ReturnMatrix::read_path(&a.returns)?;
    match a.row {
        Some(i) => m.row_market(i),
        None if m.period_count() == 1 => m.row_market(0),
        None => Err(Error::InvalidInput(format!(
            "expected one market snapshot, found {} rows; pass --row",
            m.period_count()
        ))),
    }
}

fn vector(path: &Path) -> Result<Vec<f64>> {
    Ok(ReturnMatrix::read_path(path)?.single_row()?.to_vec())
}

fn matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    Ok(ReturnMatrix::read_path(path)?.square()?.to_vec())
}

fn need<'a>(opt: &'a Option<std::path::PathBuf>, flag: &str, why: &str) -> Result<&'a Path> {
    opt.as_deref()
        .ok_or_else(|| Error::InvalidInput(format!("{why} needs --{flag}")))
}

fn check_group_tol(tol: f64) -> Result<()> {
    if tol >= 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "--group-tol must be finite and >= 0, got {tol}"
        )))
    }
}

fn cdf(a: CdfArgs, argv: &[String]) -> Result<()> {
    check_group_tol(a.group_tol)?;
    let r = snapshot(&a.snapshot)?;
    let groups = group_distinct(&r, a.group_tol);
    let eval = |x: f64| -> CdfResult {
        match a.method {
            CdfMethodArg::Varsi => varsi_cdf(&r, x),
            CdfMethodArg::Closed => lasserre_cdf(&r, x, &groups),
        }
    };
    let method = match a.method {
        CdfMethodArg::Varsi => "varsi",
        CdfMethodArg::Closed => "closed_form",
    };
    let env = Envelope {
        command: "cdf",
        argv,
        seed: None,
        method,
    };
    let out = a.output.out.as_deref();
    if let Some(x) = a.points.at {
        let c = eval(x);
        if a.output.format == Format::Csv {
            return write_pairs(out, ["x", "score"], &[(x, c.value)]);
        }
        return write_json(
            out,
            &env.wrap(json!({
                "r_star": x,
                "score": c.value,
                "method": c.method,
                "stability_warning": c.stability_warning,
                "degenerate": c.degenerate,
            })),
        );
    }
    let g = a.points.grid.expect("clap enforces --at or --grid");
    let grid = linspace(g.lo, g.hi, g.count);
    let (points, warn, degenerate) = match a.method {
        CdfMethodArg::Varsi => (score_curve(&r, &grid), false, r.is_degenerate()),
        CdfMethodArg::Closed => {
            let results: Vec<_> = grid.iter().map(|&x| (x, eval(x))).collect();
            let warn = results.iter().any(|(_, c)| c.stability_warning);
            (
                results.iter().map(|(x, c)| (*x, c.value)).collect(),
                warn,
                r.is_degenerate(),
            )
        }
    };
    if a.output.format == Format::Csv {
        return write_pairs(out, ["x", "score"], &points);
    }
    let pts: Vec<Value> = points.iter().map(|(x, s)| json!({"x": x, "score": s})).collect();
    write_json(
        out,
        &env.wrap(json!({
            "points": pts,
            "stability_warning": warn,
            "degenerate": degenerate,
        })),
    )
}

fn pdf(a: PdfArgs, argv: &[String]) -> Result<()> {
    check_group_tol(a.group_tol)?;
    let r = snapshot(&a.snapshot)?;
    let method = match a.method {
        PdfMethodArg::Bspline => PdfMethod::Bspline,
        PdfMethodArg::Closed => PdfMethod::ClosedForm,
        PdfMethodArg::Numeric => PdfMethod::Numeric,
    };
    let tag = match method {
        PdfMethod::Bspline => "bspline",
        PdfMethod::ClosedForm => "closed_form",
        PdfMethod::Numeric => "numeric",
    };
    let env = Envelope {
        command: "pdf",
        argv,
        seed: None,
        method: tag,
    };
    let out = a.output.out.as_deref();
    let xs = match (a.points.at, a.points.grid) {
        (Some(x), _) => vec![x],
        (None, Some(g)) => linspace(g.lo, g.hi, g.count),
        (None, None) => unreachable!("clap enforces --at or --grid"),
    };
    let results = xs
        .iter()
        .map(|&x| evaluate_pdf(&r, x, method, a.group_tol))
        .collect::<Result<Vec<_>>>()?;
    if a.output.format == Format::Csv {
        let pairs: Vec<(f64, f64)> = xs.iter().zip(&results).map(|(x, p)| (*x, p.density)).collect();
        return write_pairs(out, ["x", "density"], &pairs);
    }
    let result = if a.points.at.is_some() {
        let p = results[0];
        json!({
            "x": xs[0],
            "density": p.density,
            "method": p.method,
            "stability_warning": p.stability_warning,
        })
    } else {
        let pts: Vec<Value> = xs
            .iter()
            .zip(&results)
            .map(|(x, p)| json!({"x": x, "density": p.density}))
            .collect();
        json!({
            "points": pts,
            "stability_warning": results.iter().any(|p| p.stability_warning),
        })
    };
    write_json(out, &env.wrap(result))
}

fn moments(a: MomentsArgs, argv: &[String]) -> Result<()> {
    let r = snapshot(&a.snapshot)?;
    let closed = match a.method {
        MomentMethodArg::Auto => a.order <= 4,
        MomentMethodArg::Closed => true,
        MomentMethodArg::General => false,
    };
    let m = if closed {
        moment_closed(&r, a.order)?
    } else {
        moment_general(&r, a.order)?
    };
    let method = if closed { "closed" } else { "partitions" };
    let env = Envelope {
        command: "moments",
        argv,
        seed: None,
        method,
    };
    let out = a.output.out.as_deref();
    if a.output.format == Format::Csv {
        return write_pairs(out, ["order", "value"], &[(m.order as f64, m.value)]);
    }
    write_json(
        out,
        &env.wrap(json!({
            "order": m.order,
            "value": m.value,
            "standardized": m.standardized,
        })),
    )
}

fn parse_measures(labels: &[String], s_star: f64) -> Result<Vec<PerfMeasureKind>> {
    if labels.is_empty() {
        return ["A", "B", "C", "D"]
            .iter()
            .map(|l| PerfMeasureKind::parse(l, s_star))
            .collect();
    }
    labels.iter().map(|l| PerfMeasureKind::parse(l, s_star)).collect()
}

fn score_dist(a: ScoreDistArgs, argv: &[String]) -> Result<()> {
    let measures = parse_measures(&a.measure, a.s_star)?;
    let wm = ReturnMatrix::read_path(&a.weights)?;
    let picked: Vec<(usize, &Vec<f64>)> = match a.row {
        Some(i) => vec![(
            i,
            wm.rows.get(i).ok_or_else(|| {
                Error::InvalidInput(format!("row {i} out of range ({} rows)", wm.rows.len()))
            })?,
        )],
        None => wm.rows.iter().enumerate().collect(),
    };
    if picked.is_empty() {
        return Err(Error::InvalidInput("weights file has no rows".into()));
    }
    let sampler = match a.sampler {
        SamplerArg::Gaussian => {
            let cov = matrix(need(&a.cov, "cov", "the gaussian sampler")?)?;
            let mean = match &a.mean {
                Some(p) => vector(p)?,
                None => vec![0.0; cov.len()],
            };
            ReturnSampler::gaussian(mean, &cov, a.seed)?
        }
        SamplerArg::Empirical => {
            let rows = ReturnMatrix::read_path(need(&a.returns, "returns", "the empirical sampler")?)?.rows;
            ReturnSampler::empirical(rows, a.seed)?
        }
        SamplerArg::File => {
            let rows = ReturnMatrix::read_path(need(&a.samples, "samples", "the file sampler")?)?.rows;
            ReturnSampler::file(rows)?
        }
    };
    let draws = match (a.draws, a.sampler, &a.samples) {
        (Some(d), _, _) => d,
        (None, SamplerArg::File, Some(p)) => ReturnMatrix::read_path(p)?.period_count(),
        _ => DEFAULT_DRAWS,
    };
    let seed = (a.sampler != SamplerArg::File).then_some(a.seed);
    let mut portfolios = Vec::with_capacity(picked.len());
    let mut kde_rows = Vec::new();
    for (i, row) in picked {
        let w = if a.normalize {
            PortfolioWeights::normalized(row.clone())?
        } else {
            PortfolioWeights::new(row.clone())?
        };
        let dist = estimate_score_distribution(&w, &sampler, draws)?;
        let mut table = serde_json::Map::new();
        for &k in &measures {
            let v = match perf_measure(&dist, k) {
                Ok(v) => json!(v),
                Err(Error::UndefinedMeasure(_)) => Value::Null,
                Err(e) => return Err(e),
            };
            table.insert(k.label().to_owned(), v);
        }
        let mut p = json!({
            "row": i,
            "weights": w.as_slice(),
            "mean": dist.mean,
            "std": dist.std,
            "skewness": dist.skewness,
            "kde": {"grid": dist.kde_grid, "density": dist.kde_density},
            "measures": table,
        });
        if a.include_samples {
            p["samples"] = json!(dist.samples);
        }
        for (x, d) in dist.kde_grid.iter().zip(&dist.kde_density) {
            kde_rows.push((i, *x, *d));
        }
        portfolios.push(p);
    }
    let out = a.output.out.as_deref();
    if a.output.format == Format::Csv {
        return with_sink(out, |w: &mut dyn Write| {
            writeln!(w, "portfolio,score,density")?;
            for (i, x, d) in &kde_rows {
                writeln!(w, "{i},{x},{d}")?;
            }
            Ok(())
        });
    }
    let env = Envelope {
        command: "score-dist",
        argv,
        seed,
        method: sampler.kind_name(),
    };
    write_json(
        out,
        &env.wrap(json!({
            "assets": wm.names,
            "sampler": sampler.kind_name(),
            "draws": draws,
            "s_star": a.s_star,
            "portfolios": portfolios,
        })),
    )
}

fn scenarios(s: ScenariosArg) -> Scenarios {
    match s {
        ScenariosArg::InSample => Scenarios::InSample,
        ScenariosArg::Bootstrap => Scenarios::Bootstrap,
        ScenariosArg::Gaussian => Scenarios::Gaussian,
    }
}

fn optimize(a: OptimizeArgs, argv: &[String]) -> Result<()> {
    let out = a.output.out.as_deref();
    let (names, weights, result, env) = match a.method {
        OptimizeMethodArg::Score => {
            let data = ReturnMatrix::read_path(need(&a.returns, "returns", "score optimization")?)?;
            let cfg = OptimizeConfig {
                variance_target: a.variance_target,
                draws: a.draws,
                seed: a.seed,
                max_iters: a.max_iters,
                tolerance: a.tolerance,
                scenarios: scenarios(a.scenarios),
                ..OptimizeConfig::new(PerfMeasureKind::parse(&a.measure, a.s_star)?)
            };
            let outcome = optimize_score_portfolio(&data, &cfg)?;
            let mut v = to_value(&outcome)?;
            v["config"] = to_value(&cfg)?;
            let seed = (cfg.scenarios != Scenarios::InSample).then_some(a.seed);
            (
                data.names,
                outcome.weights,
                v,
                Envelope {
                    command: "optimize",
                    argv,
                    seed,
                    method: "nelder_mead",
                },
            )
        }
        OptimizeMethodArg::MeanVariance => {
            let data = a.returns.as_deref().map(ReturnMatrix::read_path).transpose()?;
            let mean = match (&a.mean, &data) {
                (Some(p), _) => vector(p)?,
                (None, Some(d)) => column_means(&d.rows),
                (None, None) => {
                    return Err(Error::InvalidInput(
                        "mean-variance needs --mean or --returns".into(),
                    ))
                }
            };
            let cov = match (&a.cov, &data) {
                (Some(p), _) => matrix(p)?,
                (None, Some(d)) => sample_covariance(&d.rows),
                (None, None) => {
                    return Err(Error::InvalidInput(
                        "mean-variance needs --cov or --returns".into(),
                    ))
                }
            };
            let w = mean_variance_portfolio(&mean, &cov, a.variance_target)?;
            let names = match (&a.mean, &data) {
                (Some(p), _) => ReturnMatrix::read_path(p)?.names,
                (None, Some(d)) => d.names.clone(),
                (None, None) => unreachable!("mean came from one of the two"),
            };
            let v = json!({
                "weights": w.as_slice(),
                "expected_return": w.as_slice().iter().zip(&mean).map(|(a, b)| a * b).sum::<f64>(),
                "variance": quadratic_form(&cov, w.as_slice()),
                "variance_target": a.variance_target,
            });
            (
                names,
                w,
                v,
                Envelope {
                    command: "optimize",
                    argv,
                    seed: None,
                    method: "mean_variance_qp",
                },
            )
        }
    };
    if a.output.format == Format::Csv {
        return with_sink(out, |wr: &mut dyn Write| {
            writeln!(wr, "{}", names.join(","))?;
            let row: Vec<String> = weights.as_slice().iter().map(|v| v.to_string()).collect();
            writeln!(wr, "{}", row.join(","))?;
            Ok(())
        });
    }
    let mut result = result;
    result["assets"] = json!(names);
    write_json(out, &env.wrap(result))
}

fn run_backtest(a: BacktestArgs, argv: &[String]) -> Result<()> {
    let data = ReturnMatrix::read_path(&a.returns)?;
    let mut cfg = match &a.config {
        Some(p) => BacktestConfig::read_path(p)?,
        None => BacktestConfig::default(),
    };
    if let Some(w) = a.window {
        cfg.window = w;
    }
    if let Some(list) = &a.strategies {
        let inherited = cfg
            .strategies
            .iter()
            .find_map(|s| match s {
                Strategy::Score(k) => k.s_star(),
                _ => None,
            })
            .unwrap_or(portdist::scoredist::DEFAULT_S_STAR);
        cfg.strategies = Strategy::parse_list(list, inherited)?;
    }
    if let Some(s) = a.s_star {
        cfg.set_s_star(s)?;
    }
    if a.volatility_target {
        cfg.volatility_target = true;
    }
    if let Some(r) = a.risk_free {
        cfg.risk_free = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(m) = a.max_iters {
        cfg.max_iters = m;
    }
    if let Some(d) = a.draws {
        cfg.draws = d;
    }
    if let Some(s) = a.scenarios {
        cfg.scenarios = scenarios(s);
    }
    let report = backtest(&data, &cfg)?;
    if let Some(p) = &a.series {
        with_sink(Some(p), |w| report.write_csv(w))?;
    }
    let out = a.output.out.as_deref();
    if a.output.format == Format::Csv {
        return with_sink(out, |w| report.write_csv(w));
    }
    let mut result = to_value(&report)?;
    result["assets"] = json!(data.names);
    result["config"] = to_value(&cfg)?;
    let env = Envelope {
        command: "backtest",
        argv,
        seed: Some(cfg.seed),
        method: "rolling_window",
    };
    write_json(out, &env.wrap(result))
}

fn simplex(a: SampleSimplexArgs, argv: &[String]) -> Result<()> {
    let draws = sample_simplex(a.assets, a.count, a.seed)?;
    let out = a.output.out.as_deref();
    if a.output.format == Format::Csv {
        return with_sink(out, |w: &mut dyn Write| {
            let header: Vec<String> = (1..=a.assets).map(|i| format!("A{i}")).collect();
            writeln!(w, "{}", header.join(","))?;
            for d in &draws {
                let row: Vec<String> = d.as_slice().iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", row.join(","))?;
            }
            Ok(())
        });
    }
    let rows: Vec<&[f64]> = draws.iter().map(PortfolioWeights::as_slice).collect();
    let env = Envelope {
        command: "sample-simplex",
        argv,
        seed: Some(a.seed),
        method: "normalized_exponentials",
    };
    write_json(
        out,
        &env.wrap(json!({"assets": a.assets, "count": a.count, "weights": rows})),
    )
}
