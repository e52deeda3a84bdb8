//! Estimator experiments: score convergence, consistency and normality.

use balkwise_core::inference::{log_likelihood, score};
use balkwise_core::{asymptotic_std, Weighting};
use serde::Serialize;

use super::{rep_seed, simulate_and_fit, Setup};
use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;
use crate::parallel::replicate;
use crate::stats::{jarque_bera, mean, median, std_dev, JarqueBera};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub k: usize,
    pub rep: usize,
    pub theta_hat: f64,
    /// `Psi_k` at the fitted parameter.
    pub score: f64,
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSummary {
    pub k: usize,
    pub fits: usize,
    pub boundary: usize,
    pub failures: usize,
    pub mean_score: f64,
    pub sd_score: f64,
    pub max_abs_interior_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreConvergence {
    pub rows: Vec<ScoreRow>,
    pub summary: Vec<ScoreSummary>,
}

struct RepFit {
    theta_hat: f64,
    score: f64,
    boundary: bool,
}

fn fit_reps(
    setup: &Setup,
    group: u64,
    k: usize,
    with_score: bool,
) -> Result<Vec<Option<RepFit>>> {
    let cfg = &setup.cfg;
    let model = setup.model();
    replicate(cfg.replications, |rep| {
        let seed = rep_seed(cfg.seed, group, rep);
        let Some((path, fit)) = simulate_and_fit(&model, &cfg.theta0, k, seed)? else {
            return Ok(None);
        };
        let s = if with_score {
            score(&path, &fit.theta_hat, &model)?[0]
        } else {
            f64::NAN
        };
        Ok(Some(RepFit {
            theta_hat: fit.theta_hat[0],
            score: s,
            boundary: fit.boundary,
        }))
    })?
    .into_iter()
    .collect()
}

pub fn score_convergence(cfg: &ExperimentConfig) -> Result<ScoreConvergence> {
    cfg.validate(Experiment::ScoreConvergence)?;
    let setup = Setup::new(cfg)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (g, &k) in cfg.k_list()?.iter().enumerate() {
        let fits = fit_reps(&setup, g as u64, k, true)?;
        let start = rows.len();
        for (rep, f) in fits.iter().enumerate() {
            if let Some(f) = f {
                rows.push(ScoreRow {
                    k,
                    rep,
                    theta_hat: f.theta_hat,
                    score: f.score,
                    boundary: f.boundary,
                });
            }
        }
        let these = &rows[start..];
        let scores: Vec<f64> = these.iter().map(|r| r.score).collect();
        summary.push(ScoreSummary {
            k,
            fits: these.len(),
            boundary: these.iter().filter(|r| r.boundary).count(),
            failures: fits.len() - these.len(),
            mean_score: mean(&scores),
            sd_score: std_dev(&scores),
            max_abs_interior_score: these
                .iter()
                .filter(|r| !r.boundary)
                .map(|r| r.score.abs())
                .fold(0.0, f64::max),
        });
    }
    Ok(ScoreConvergence { rows, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub k: usize,
    pub rep: usize,
    pub theta_hat: f64,
    pub abs_error: f64,
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencySummary {
    pub k: usize,
    pub fits: usize,
    pub boundary: usize,
    pub failures: usize,
    pub median_abs_error: f64,
    pub mean_theta_hat: f64,
    pub sd_theta_hat: f64,
}

/// Log-likelihood of one replication's path over the parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoglikPoint {
    pub k: usize,
    pub theta: f64,
    pub loglik: f64,
    pub theta_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Consistency {
    pub rows: Vec<ConsistencyRow>,
    pub summary: Vec<ConsistencySummary>,
    pub curves: Vec<LoglikPoint>,
}

pub fn consistency(cfg: &ExperimentConfig) -> Result<Consistency> {
    cfg.validate(Experiment::Consistency)?;
    let setup = Setup::new(cfg)?;
    let model = setup.model();
    let theta0 = cfg.theta0[0];
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut curves = Vec::new();
    for (g, &k) in cfg.k_list()?.iter().enumerate() {
        let fits = fit_reps(&setup, g as u64, k, false)?;
        let start = rows.len();
        for (rep, f) in fits.iter().enumerate() {
            if let Some(f) = f {
                rows.push(ConsistencyRow {
                    k,
                    rep,
                    theta_hat: f.theta_hat,
                    abs_error: (f.theta_hat - theta0).abs(),
                    boundary: f.boundary,
                });
            }
        }
        let these = &rows[start..];
        let errs: Vec<f64> = these.iter().map(|r| r.abs_error).collect();
        let thetas: Vec<f64> = these.iter().map(|r| r.theta_hat).collect();
        summary.push(ConsistencySummary {
            k,
            fits: these.len(),
            boundary: these.iter().filter(|r| r.boundary).count(),
            failures: fits.len() - these.len(),
            median_abs_error: median(&errs),
            mean_theta_hat: mean(&thetas),
            sd_theta_hat: std_dev(&thetas),
        });

        if let Some(grid) = &cfg.theta_grid {
            // replication 0 of this k, regenerated from its seed
            if let Some((path, fit)) =
                simulate_and_fit(&model, &cfg.theta0, k, rep_seed(cfg.seed, g as u64, 0))?
            {
                for theta in grid.values() {
                    curves.push(LoglikPoint {
                        k,
                        theta,
                        loglik: log_likelihood(&path, &[theta], &model)?,
                        theta_hat: fit.theta_hat[0],
                    });
                }
            }
        }
    }
    Ok(Consistency { rows, summary, curves })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityRow {
    pub k: usize,
    pub rep: usize,
    pub theta_hat: f64,
    /// `sqrt(k) (theta_hat - theta0)`
    pub normalized: f64,
    /// normalized error over its theoretical standard deviation
    pub standardized: f64,
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalitySummary {
    pub k: usize,
    pub fits: usize,
    /// Boundary fits, excluded from the statistics below.
    pub boundary_excluded: usize,
    pub failures: usize,
    pub weighting: Weighting,
    /// Theoretical standard deviation of the normalized error.
    pub sigma_theory: f64,
    pub mean_normalized: f64,
    pub sd_normalized: f64,
    pub mean_standardized: f64,
    pub se_mean_standardized: f64,
    pub sd_standardized: f64,
    pub jarque_bera: JarqueBera,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Normality {
    pub rows: Vec<NormalityRow>,
    pub summary: Vec<NormalitySummary>,
}

pub fn normality(cfg: &ExperimentConfig) -> Result<Normality> {
    cfg.validate(Experiment::Normality)?;
    let setup = Setup::new(cfg)?;
    let model = setup.model();
    let theta0 = cfg.theta0[0];
    let sigma = asymptotic_std(cfg.model.price, &cfg.theta0, &model, cfg.eps, cfg.weighting)?[0];
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (g, &k) in cfg.k_list()?.iter().enumerate() {
        let fits = fit_reps(&setup, g as u64, k, false)?;
        let start = rows.len();
        let root_k = (k as f64).sqrt();
        for (rep, f) in fits.iter().enumerate() {
            if let Some(f) = f {
                let normalized = root_k * (f.theta_hat - theta0);
                rows.push(NormalityRow {
                    k,
                    rep,
                    theta_hat: f.theta_hat,
                    normalized,
                    standardized: normalized / sigma,
                    boundary: f.boundary,
                });
            }
        }
        let these = &rows[start..];
        let interior: Vec<&NormalityRow> = these.iter().filter(|r| !r.boundary).collect();
        let norm: Vec<f64> = interior.iter().map(|r| r.normalized).collect();
        let z: Vec<f64> = interior.iter().map(|r| r.standardized).collect();
        let sd_z = std_dev(&z);
        summary.push(NormalitySummary {
            k,
            fits: these.len(),
            boundary_excluded: these.len() - interior.len(),
            failures: fits.len() - these.len(),
            weighting: cfg.weighting,
            sigma_theory: sigma,
            mean_normalized: mean(&norm),
            sd_normalized: std_dev(&norm),
            mean_standardized: mean(&z),
            se_mean_standardized: sd_z / (z.len() as f64).sqrt(),
            sd_standardized: sd_z,
            jarque_bera: jarque_bera(&z)?,
        });
    }
    Ok(Normality { rows, summary })
}
