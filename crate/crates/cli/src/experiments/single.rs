//! Single-shot commands: simulate one path, fit one path, optimise a price.

use balkwise_core::{
    confidence_interval, fit_mle, optimal_price, simulate_path, std_minimizing_price, FitResult,
    QueuePath, SimOptions, Weighting,
};
use serde::Serialize;

use super::Setup;
use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;

pub fn simulate(cfg: &ExperimentConfig) -> Result<QueuePath> {
    cfg.validate(Experiment::Simulate)?;
    let setup = Setup::new(cfg)?;
    Ok(simulate_path(
        &setup.model(),
        &cfg.theta0,
        &SimOptions::new(cfg.k()?, cfg.seed),
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub fit: FitResult,
    /// 95% Wald interval per parameter.
    pub ci95: Option<Vec<(f64, f64)>>,
}

/// Fits `path` under the config's model; the path's own price is used.
pub fn fit_path(cfg: &ExperimentConfig, path: &QueuePath) -> Result<FitReport> {
    cfg.validate(Experiment::Fit)?;
    let setup = Setup::new(cfg)?;
    let model = setup.model_at(path.price())?;
    let fit = fit_mle(path, &model, None)?;
    let ci95 = confidence_interval(&fit, 0.95).ok();
    Ok(FitReport { fit, ci95 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceOpt {
    pub theta: Vec<f64>,
    pub optimal_price: f64,
    pub optimal_revenue: f64,
    pub weighting: Weighting,
    /// Price minimising the asymptotic std of the first parameter, if the
    /// information is invertible somewhere on the search interval.
    pub std_min_price: Option<f64>,
    pub min_std: Option<f64>,
}

pub fn price_opt(cfg: &ExperimentConfig) -> Result<PriceOpt> {
    cfg.validate(Experiment::PriceOpt)?;
    let setup = Setup::new(cfg)?;
    let model = setup.model();
    let bounds = cfg.pricing.price_bounds;
    let best = optimal_price(&model, &cfg.theta0, cfg.eps, bounds)?;
    let std = std_minimizing_price(&model, &cfg.theta0, cfg.eps, cfg.weighting, bounds).ok();
    Ok(PriceOpt {
        theta: cfg.theta0.clone(),
        optimal_price: best.arg,
        optimal_revenue: best.value,
        weighting: cfg.weighting,
        std_min_price: std.map(|s| s.arg),
        min_std: std.map(|s| s.value),
    })
}
