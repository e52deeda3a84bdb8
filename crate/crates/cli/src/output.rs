//! File emission. CSV is always written; `json` adds a full JSON dump of
//! the result and `svg` adds charts.
//!
//! CSV schemas (one header per file):
//!
//! | experiment | file | header |
//! |---|---|---|
//! | score-convergence | `scores.csv` | `k,rep,theta_hat,score,boundary` |
//! | score-convergence | `summary.csv` | `k,fits,boundary,failures,mean_score,sd_score,max_abs_interior_score` |
//! | consistency | `estimates.csv` | `k,rep,theta_hat,abs_error,boundary` |
//! | consistency | `summary.csv` | `k,fits,boundary,failures,median_abs_error,mean_theta_hat,sd_theta_hat` |
//! | consistency | `loglik.csv` | `k,theta,loglik,theta_hat` |
//! | normality | `errors.csv` | `k,rep,theta_hat,normalized,standardized,boundary` |
//! | normality | `summary.csv` | see [`NORMALITY_SUMMARY_HEADER`] |
//! | std-vs-price | `std_theta_<t>.csv` | `price,std` |
//! | std-vs-price | `empirical_theta_<t>.csv` | `price,std,fits,boundary` |
//! | std-vs-price | `summary.csv` | `theta,weighting,argmin_price,min_std,skipped` |
//! | revenue-vs-price | `revenue_theta_<t>.csv` | `price,revenue` |
//! | revenue-vs-price | `summary.csv` | `theta,optimal_price,optimal_revenue,skipped` |
//! | pricing-tables | `table.csv` | `metric,<cell label>...` |
//! | pricing-tables | `cells.csv` | see [`CELLS_HEADER`] |
//! | pricing-tables | `iterations.csv` | see [`ITERATIONS_HEADER`] |
//! | pricing-tables | `failures.csv` | `cell,run,seed,error` |

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Format;
use crate::error::{CliError, Result};
use crate::experiments::curves::{RevenueCurve, StdCurve};
use crate::experiments::estimation::{Consistency, Normality, ScoreConvergence};
use crate::experiments::tables::{CellResult, ROW_LABELS};
use crate::svg::{histogram, line_chart, Series};

pub const NORMALITY_SUMMARY_HEADER: &str = "k,fits,boundary_excluded,failures,weighting,sigma_theory,mean_normalized,sd_normalized,mean_standardized,se_mean_standardized,sd_standardized,skewness,kurtosis,jb_statistic,jb_p_value,reject";
pub const CELLS_HEADER: &str = "label,schedule,k1_min,p1,runs,failures,flagged,iterations,total_observations,final_fraction,cumulative_fraction,lost_revenue,mean_price_error,std_price_error,tolerance_stops,budget_stops,max_iteration_stops";
pub const ITERATIONS_HEADER: &str = "cell,run,iter,k_min,k,theta,theta_pooled,price,price_next,delta,revenue,time,boundary_retries";

/// Tracks written files so commands can report them.
pub struct Emitter {
    dir: PathBuf,
    format: Format,
    pub written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(dir: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        Ok(Self { dir: dir.to_path_buf(), format, written: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T], header: &str) -> Result<()> {
        let path = self.path(name);
        let file = fs::File::create(&path).map_err(CliError::io(&path))?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        w.write_record(header.split(','))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(CliError::io(&path))?;
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, body).map_err(CliError::io(&path))
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let body = serde_json::to_string_pretty(value)? + "\n";
        self.text(name, &body)
    }

    /// JSON dump when the format asks for it.
    pub fn maybe_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        if self.format == Format::Json {
            self.json(name, value)?;
        }
        Ok(())
    }

    /// Chart when the format asks for it; `render` is only called then.
    pub fn maybe_svg(&mut self, name: &str, render: impl FnOnce() -> String) -> Result<()> {
        if self.format == Format::Svg {
            let body = render();
            self.text(name, &body)?;
        }
        Ok(())
    }
}

/// File-name fragment for a parameter value, e.g. `0.02`.
pub fn theta_tag(theta: f64) -> String {
    format!("{theta}")
}

pub fn score_convergence(e: &mut Emitter, r: &ScoreConvergence) -> Result<()> {
    e.csv("scores.csv", &r.rows, "k,rep,theta_hat,score,boundary")?;
    e.csv(
        "summary.csv",
        &r.summary,
        "k,fits,boundary,failures,mean_score,sd_score,max_abs_interior_score",
    )?;
    e.maybe_json("result.json", r)?;
    e.maybe_svg("scores.svg", || {
        let pts = r.rows.iter().map(|x| (x.k as f64, x.score)).collect();
        line_chart("Score at the fitted parameter", "k", "score", &[Series::scatter("score", pts)], true)
    })
}

pub fn consistency(e: &mut Emitter, r: &Consistency) -> Result<()> {
    e.csv("estimates.csv", &r.rows, "k,rep,theta_hat,abs_error,boundary")?;
    e.csv(
        "summary.csv",
        &r.summary,
        "k,fits,boundary,failures,median_abs_error,mean_theta_hat,sd_theta_hat",
    )?;
    e.csv("loglik.csv", &r.curves, "k,theta,loglik,theta_hat")?;
    e.maybe_json("result.json", r)?;
    e.maybe_svg("estimates.svg", || {
        let pts = r.rows.iter().map(|x| (x.k as f64, x.theta_hat)).collect();
        line_chart("Fitted parameter by path length", "k", "theta_hat", &[Series::scatter("theta_hat", pts)], true)
    })?;
    if !r.curves.is_empty() {
        e.maybe_svg("loglik.svg", || {
            let mut ks: Vec<usize> = r.curves.iter().map(|c| c.k).collect();
            ks.dedup();
            let series: Vec<Series> = ks
                .iter()
                .map(|&k| {
                    // per-step scale so curves of different length share axes
                    let pts = r
                        .curves
                        .iter()
                        .filter(|c| c.k == k)
                        .map(|c| (c.theta, c.loglik / k as f64))
                        .collect();
                    Series::line(format!("k={k}"), pts)
                })
                .collect();
            line_chart("Log-likelihood per step", "theta", "loglik / k", &series, false)
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct NormalitySummaryRow {
    k: usize,
    fits: usize,
    boundary_excluded: usize,
    failures: usize,
    weighting: balkwise_core::Weighting,
    sigma_theory: f64,
    mean_normalized: f64,
    sd_normalized: f64,
    mean_standardized: f64,
    se_mean_standardized: f64,
    sd_standardized: f64,
    skewness: f64,
    kurtosis: f64,
    jb_statistic: f64,
    jb_p_value: f64,
    reject: bool,
}

pub fn normality(e: &mut Emitter, r: &Normality) -> Result<()> {
    e.csv("errors.csv", &r.rows, "k,rep,theta_hat,normalized,standardized,boundary")?;
    let flat: Vec<NormalitySummaryRow> = r
        .summary
        .iter()
        .map(|s| NormalitySummaryRow {
            k: s.k,
            fits: s.fits,
            boundary_excluded: s.boundary_excluded,
            failures: s.failures,
            weighting: s.weighting,
            sigma_theory: s.sigma_theory,
            mean_normalized: s.mean_normalized,
            sd_normalized: s.sd_normalized,
            mean_standardized: s.mean_standardized,
            se_mean_standardized: s.se_mean_standardized,
            sd_standardized: s.sd_standardized,
            skewness: s.jarque_bera.skewness,
            kurtosis: s.jarque_bera.kurtosis,
            jb_statistic: s.jarque_bera.statistic,
            jb_p_value: s.jarque_bera.p_value,
            reject: s.jarque_bera.reject,
        })
        .collect();
    e.csv("summary.csv", &flat, NORMALITY_SUMMARY_HEADER)?;
    e.maybe_json("result.json", r)?;
    for s in &r.summary {
        e.maybe_svg(&format!("errors_k{}.svg", s.k), || {
            let z: Vec<f64> = r
                .rows
                .iter()
                .filter(|x| x.k == s.k && !x.boundary)
                .map(|x| x.standardized)
                .collect();
            let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            histogram(
                &format!("Standardized errors, k={}", s.k),
                "standardized error",
                &z,
                40,
                Some(&phi),
            )
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PricePoint {
    price: f64,
    value: f64,
}

#[derive(Serialize)]
struct StdSummaryRow {
    theta: f64,
    weighting: balkwise_core::Weighting,
    argmin_price: f64,
    min_std: f64,
    skipped: usize,
}

pub fn std_vs_price(e: &mut Emitter, curves: &[StdCurve]) -> Result<()> {
    for c in curves {
        let tag = theta_tag(c.theta);
        let pts: Vec<PricePoint> =
            c.points.iter().map(|p| PricePoint { price: p.price, value: p.value }).collect();
        e.csv(&format!("std_theta_{tag}.csv"), &pts, "price,std")?;
        if !c.empirical.is_empty() {
            e.csv(&format!("empirical_theta_{tag}.csv"), &c.empirical, "price,std,fits,boundary")?;
        }
    }
    let summary: Vec<StdSummaryRow> = curves
        .iter()
        .map(|c| StdSummaryRow {
            theta: c.theta,
            weighting: c.weighting,
            argmin_price: c.argmin_price,
            min_std: c.min_std,
            skipped: c.skipped.len(),
        })
        .collect();
    e.csv("summary.csv", &summary, "theta,weighting,argmin_price,min_std,skipped")?;
    e.maybe_json("result.json", curves)?;
    e.maybe_svg("std_vs_price.svg", || {
        let mut series = Vec::new();
        for c in curves {
            series.push(Series::line(
                format!("theory {}", c.theta),
                c.points.iter().map(|p| (p.price, p.value)).collect(),
            ));
            if !c.empirical.is_empty() {
                series.push(Series::scatter(
                    format!("empirical {}", c.theta),
                    c.empirical.iter().map(|p| (p.price, p.std)).collect(),
                ));
            }
        }
        line_chart("Asymptotic std of the estimator", "price", "std", &series, false)
    })
}

#[derive(Serialize)]
struct RevenueSummaryRow {
    theta: f64,
    optimal_price: f64,
    optimal_revenue: f64,
    skipped: usize,
}

pub fn revenue_vs_price(e: &mut Emitter, curves: &[RevenueCurve]) -> Result<()> {
    for c in curves {
        let pts: Vec<PricePoint> =
            c.points.iter().map(|p| PricePoint { price: p.price, value: p.value }).collect();
        e.csv(&format!("revenue_theta_{}.csv", theta_tag(c.theta)), &pts, "price,revenue")?;
    }
    let summary: Vec<RevenueSummaryRow> = curves
        .iter()
        .map(|c| RevenueSummaryRow {
            theta: c.theta,
            optimal_price: c.optimal_price,
            optimal_revenue: c.optimal_revenue,
            skipped: c.skipped.len(),
        })
        .collect();
    e.csv("summary.csv", &summary, "theta,optimal_price,optimal_revenue,skipped")?;
    e.maybe_json("result.json", curves)?;
    e.maybe_svg("revenue_vs_price.svg", || {
        let series: Vec<Series> = curves
            .iter()
            .map(|c| {
                Series::line(
                    format!("theta {}", c.theta),
                    c.points.iter().map(|p| (p.price, p.value)).collect(),
                )
            })
            .collect();
        line_chart("Stationary revenue rate", "price", "revenue", &series, false)
    })
}

#[derive(Serialize)]
struct CellRow<'a> {
    label: &'a str,
    schedule: String,
    k1_min: usize,
    p1: f64,
    runs: usize,
    failures: usize,
    flagged: bool,
    iterations: f64,
    total_observations: f64,
    final_fraction: f64,
    cumulative_fraction: f64,
    lost_revenue: f64,
    mean_price_error: f64,
    std_price_error: f64,
    tolerance_stops: usize,
    budget_stops: usize,
    max_iteration_stops: usize,
}

#[derive(Serialize)]
struct IterationRow<'a> {
    cell: &'a str,
    run: usize,
    iter: usize,
    k_min: usize,
    k: usize,
    theta: f64,
    theta_pooled: f64,
    price: f64,
    price_next: f64,
    delta: f64,
    revenue: f64,
    time: f64,
    boundary_retries: usize,
}

#[derive(Serialize)]
struct FailureRow<'a> {
    cell: &'a str,
    run: usize,
    seed: u64,
    error: &'a str,
}

fn schedule_name(s: balkwise_core::Schedule) -> String {
    match s {
        balkwise_core::Schedule::Increment => "increment".into(),
        balkwise_core::Schedule::Doubling => "doubling".into(),
        balkwise_core::Schedule::Multiplier(m) => format!("multiplier:{m}"),
    }
}

pub fn pricing_tables(e: &mut Emitter, cells: &[CellResult]) -> Result<()> {
    // transposed summary: one row per metric, one column per cell
    let mut header = vec!["metric".to_string()];
    header.extend(cells.iter().map(|c| c.summary.label.clone()));
    let mut table: Vec<Vec<String>> = Vec::new();
    for (i, label) in ROW_LABELS.iter().enumerate() {
        let mut row = vec![label.to_string()];
        row.extend(cells.iter().map(|c| c.summary.row_values()[i].to_string()));
        table.push(row);
    }
    e.csv("table.csv", &table, &header.join(","))?;

    let rows: Vec<CellRow> = cells
        .iter()
        .map(|c| {
            let s = &c.summary;
            CellRow {
                label: &s.label,
                schedule: schedule_name(c.cell.schedule),
                k1_min: c.cell.k1_min,
                p1: c.cell.p1,
                runs: s.runs,
                failures: s.failures,
                flagged: s.flagged,
                iterations: s.iterations,
                total_observations: s.total_observations,
                final_fraction: s.final_fraction,
                cumulative_fraction: s.cumulative_fraction,
                lost_revenue: s.lost_revenue,
                mean_price_error: s.mean_price_error,
                std_price_error: s.std_price_error,
                tolerance_stops: s.tolerance_stops,
                budget_stops: s.budget_stops,
                max_iteration_stops: s.max_iteration_stops,
            }
        })
        .collect();
    e.csv("cells.csv", &rows, CELLS_HEADER)?;

    let mut iters = Vec::new();
    let mut failures = Vec::new();
    for c in cells {
        for run in &c.runs {
            if let Some(err) = &run.error {
                failures.push(FailureRow { cell: &c.summary.label, run: run.run, seed: run.seed, error: err });
            }
            let Some(t) = &run.trace else { continue };
            for r in &t.records {
                iters.push(IterationRow {
                    cell: &c.summary.label,
                    run: run.run,
                    iter: r.index,
                    k_min: r.k_min,
                    k: r.k,
                    theta: r.theta[0],
                    theta_pooled: r.theta_pooled[0],
                    price: r.price,
                    price_next: r.price_next,
                    delta: r.delta,
                    revenue: r.revenue,
                    time: r.time,
                    boundary_retries: r.boundary_retries,
                });
            }
        }
    }
    e.csv("iterations.csv", &iters, ITERATIONS_HEADER)?;
    e.csv("failures.csv", &failures, "cell,run,seed,error")?;
    e.maybe_json("result.json", cells)?;
    e.maybe_svg("prices.svg", || {
        // first completed run of each cell
        let series: Vec<Series> = cells
            .iter()
            .filter_map(|c| {
                let t = c.runs.iter().find_map(|r| r.trace.as_ref())?;
                let mut used = 0usize;
                let pts = t
                    .records
                    .iter()
                    .map(|r| {
                        used += r.k;
                        (used as f64, r.price_next)
                    })
                    .collect();
                Some(Series::line(c.summary.label.clone(), pts))
            })
            .collect();
        line_chart("Price path of the first run", "observations", "price", &series, false)
    })
}
