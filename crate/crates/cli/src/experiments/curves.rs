//! Curves over a price grid: expected revenue and asymptotic std.

use balkwise_core::{asymptotic_std, expected_revenue, optimal_price, std_minimizing_price, Weighting};
use serde::Serialize;

use super::{rep_seed, simulate_and_fit, Setup};
use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;
use crate::parallel::replicate;
use crate::stats::std_dev;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub price: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevenueCurve {
    pub theta: f64,
    pub points: Vec<CurvePoint>,
    /// Grid prices where the stationary law could not be truncated.
    pub skipped: Vec<f64>,
    pub optimal_price: f64,
    pub optimal_revenue: f64,
}

pub fn revenue_vs_price(cfg: &ExperimentConfig) -> Result<Vec<RevenueCurve>> {
    cfg.validate(Experiment::RevenueVsPrice)?;
    let setup = Setup::new(cfg)?;
    let model = setup.model();
    let prices = cfg.price_grid()?.values();
    let mut out = Vec::new();
    for &theta in cfg.theta_list()? {
        let values = replicate(prices.len(), |i| {
            expected_revenue(prices[i], &[theta], &model, cfg.eps)
        })?;
        let mut points = Vec::new();
        let mut skipped = Vec::new();
        for (&price, v) in prices.iter().zip(values) {
            match v {
                Ok(value) => points.push(CurvePoint { price, value }),
                Err(balkwise_core::Error::TruncationFailed(_)) => skipped.push(price),
                Err(e) => return Err(e.into()),
            }
        }
        let best = optimal_price(&model, &[theta], cfg.eps, None)?;
        out.push(RevenueCurve {
            theta,
            points,
            skipped,
            optimal_price: best.arg,
            optimal_revenue: best.value,
        });
    }
    Ok(out)
}

/// Monte-Carlo std of `sqrt(k) (theta_hat - theta)` at one price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalStd {
    pub price: f64,
    pub std: f64,
    pub fits: usize,
    pub boundary: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StdCurve {
    pub theta: f64,
    pub weighting: Weighting,
    pub points: Vec<CurvePoint>,
    /// Grid prices where the information is singular or untruncatable.
    pub skipped: Vec<f64>,
    pub empirical: Vec<EmpiricalStd>,
    pub k: Option<usize>,
    pub argmin_price: f64,
    pub min_std: f64,
}

pub fn std_vs_price(cfg: &ExperimentConfig) -> Result<Vec<StdCurve>> {
    cfg.validate(Experiment::StdVsPrice)?;
    let setup = Setup::new(cfg)?;
    let model = setup.model();
    let prices = cfg.price_grid()?.values();
    let mut out = Vec::new();
    for (t_idx, &theta) in cfg.theta_list()?.iter().enumerate() {
        let values = replicate(prices.len(), |i| {
            asymptotic_std(prices[i], &[theta], &model, cfg.eps, cfg.weighting)
        })?;
        let mut points = Vec::new();
        let mut skipped = Vec::new();
        for (&price, v) in prices.iter().zip(values) {
            match v {
                Ok(s) => points.push(CurvePoint { price, value: s[0] }),
                Err(
                    balkwise_core::Error::InformationSingular
                    | balkwise_core::Error::TruncationFailed(_),
                ) => skipped.push(price),
                Err(e) => return Err(e.into()),
            }
        }
        let best = std_minimizing_price(&model, &[theta], cfg.eps, cfg.weighting, None)?;

        let mut empirical = Vec::new();
        if cfg.empirical_reps > 0 {
            let k = cfg.k()?;
            let root_k = (k as f64).sqrt();
            for (p_idx, &price) in prices.iter().enumerate() {
                let at = setup.model_at(price)?;
                let group = (t_idx * prices.len() + p_idx) as u64;
                let fits = replicate(cfg.empirical_reps, |rep| {
                    simulate_and_fit(&at, &[theta], k, rep_seed(cfg.seed, group, rep))
                        .map(|o| o.map(|(_, f)| (f.theta_hat[0], f.boundary)))
                })?;
                let mut errs = Vec::new();
                let mut boundary = 0;
                for f in fits {
                    if let Some((th, b)) = f? {
                        errs.push(root_k * (th - theta));
                        boundary += usize::from(b);
                    }
                }
                empirical.push(EmpiricalStd {
                    price,
                    std: std_dev(&errs),
                    fits: errs.len(),
                    boundary,
                });
            }
        }

        out.push(StdCurve {
            theta,
            weighting: cfg.weighting,
            points,
            skipped,
            empirical,
            k: cfg.k,
            argmin_price: best.arg,
            min_std: best.value,
        });
    }
    Ok(out)
}
