//! Summary tables of repeated pricing runs, one cell per
//! (schedule, k1_min, p1) combination.

use balkwise_core::pricing::trace_metrics_with_optimum;
use balkwise_core::{optimal_price, run_pricing_simulated, PricingTrace, StopReason, TraceMetrics};
use serde::Serialize;

use super::{rep_seed, Setup};
use crate::config::{Experiment, ExperimentConfig, TableCell};
use crate::error::Result;
use crate::parallel::replicate;
use crate::stats::{mean, std_dev};

/// Share of failed runs above which a cell is flagged.
pub const FAILURE_FLAG_SHARE: f64 = 0.05;

/// Row labels of the summary table, in output order.
pub const ROW_LABELS: [&str; 8] = [
    "Iterations",
    "Total number of observations used for learning",
    "Final stationary fraction of max revenue",
    "Stationary cumulative fraction of max revenue",
    "Total lost revenue",
    "Mean error of final price",
    "Std of final price error",
    "Failed runs",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub label: String,
    pub runs: usize,
    pub failures: usize,
    /// More than [`FAILURE_FLAG_SHARE`] of the runs failed.
    pub flagged: bool,
    pub iterations: f64,
    pub total_observations: f64,
    pub final_fraction: f64,
    pub cumulative_fraction: f64,
    pub lost_revenue: f64,
    /// Mean of `|p_final - p*|`.
    pub mean_price_error: f64,
    /// Sample std of `|p_final - p*|`.
    pub std_price_error: f64,
    pub tolerance_stops: usize,
    pub budget_stops: usize,
    pub max_iteration_stops: usize,
}

impl CellSummary {
    /// Values in [`ROW_LABELS`] order.
    pub fn row_values(&self) -> [f64; 8] {
        [
            self.iterations,
            self.total_observations,
            self.final_fraction,
            self.cumulative_fraction,
            self.lost_revenue,
            self.mean_price_error,
            self.std_price_error,
            self.failures as f64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub run: usize,
    pub seed: u64,
    pub trace: Option<PricingTrace>,
    pub metrics: Option<TraceMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub cell: TableCell,
    pub summary: CellSummary,
    pub runs: Vec<RunOutcome>,
}

pub fn pricing_tables(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    cfg.validate(Experiment::PricingTables)?;
    let setup = Setup::new(cfg)?;
    let model = setup.model();
    let best = optimal_price(&model, &cfg.theta0, cfg.eps, cfg.pricing.price_bounds)?;
    let mut out = Vec::new();
    for (c_idx, cell) in cfg.cells()?.iter().enumerate() {
        let mut pcfg = cfg.pricing.clone();
        pcfg.schedule = cell.schedule;
        pcfg.k1_min = cell.k1_min;
        pcfg.p1 = cell.p1;
        let runs = replicate(cfg.replications, |run| {
            let seed = rep_seed(cfg.seed, c_idx as u64, run);
            let result = run_pricing_simulated(&model, &cfg.theta0, &pcfg, seed).and_then(|t| {
                let m = trace_metrics_with_optimum(
                    &t,
                    &cfg.theta0,
                    &model,
                    cfg.eps,
                    best.arg,
                    best.value,
                )?;
                Ok((t, m))
            });
            match result {
                Ok((t, m)) => RunOutcome { run, seed, trace: Some(t), metrics: Some(m), error: None },
                Err(e) => RunOutcome { run, seed, trace: None, metrics: None, error: Some(e.to_string()) },
            }
        })?;
        out.push(CellResult {
            cell: *cell,
            summary: summarize(cell, &runs),
            runs,
        });
    }
    Ok(out)
}

fn summarize(cell: &TableCell, runs: &[RunOutcome]) -> CellSummary {
    let ok: Vec<(&PricingTrace, &TraceMetrics)> = runs
        .iter()
        .filter_map(|r| Some((r.trace.as_ref()?, r.metrics.as_ref()?)))
        .collect();
    let col = |f: &dyn Fn(&TraceMetrics) -> f64| -> Vec<f64> { ok.iter().map(|(_, m)| f(m)).collect() };
    let stops = |reason: StopReason| ok.iter().filter(|(t, _)| t.stopped_reason == reason).count();
    let price_err = col(&|m| m.final_price_error.abs());
    let failures = runs.len() - ok.len();
    CellSummary {
        label: cell.label(),
        runs: runs.len(),
        failures,
        flagged: failures as f64 > FAILURE_FLAG_SHARE * runs.len() as f64,
        iterations: mean(&col(&|m| m.iterations as f64)),
        total_observations: mean(&col(&|m| m.total_observations as f64)),
        final_fraction: mean(&col(&|m| m.final_fraction)),
        cumulative_fraction: mean(&col(&|m| m.cumulative_fraction)),
        lost_revenue: mean(&col(&|m| m.lost_revenue)),
        mean_price_error: mean(&price_err),
        std_price_error: std_dev(&price_err),
        tolerance_stops: stops(StopReason::Tolerance),
        budget_stops: stops(StopReason::Budget),
        max_iteration_stops: stops(StopReason::MaxIterations),
    }
}
