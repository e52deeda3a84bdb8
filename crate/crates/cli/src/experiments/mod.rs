//! Experiment drivers. Each returns its rows and summary as plain data;
//! writing files is left to [`crate::output`].

pub mod curves;
pub mod estimation;
pub mod single;
pub mod tables;

use balkwise_core::{
    derive_seed, fit_mle, simulate_path, Error, FitResult, Model, QueuePath, SimOptions,
    ValueFamily,
};

use crate::config::ExperimentConfig;
use crate::error::Result;

pub use curves::{revenue_vs_price, std_vs_price, RevenueCurve, StdCurve};
pub use estimation::{consistency, normality, score_convergence};
pub use single::{fit_path, price_opt, simulate, FitReport, PriceOpt};
pub use tables::{pricing_tables, CellResult, CellSummary};

/// A validated config with its family instantiated.
pub struct Setup {
    pub cfg: ExperimentConfig,
    pub family: Box<dyn ValueFamily>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            family: cfg.family.build()?,
            cfg: cfg.clone(),
        })
    }

    pub fn model(&self) -> Model<'_> {
        Model::new(self.cfg.model, self.family.as_ref())
    }

    pub fn model_at(&self, price: f64) -> Result<Model<'_>> {
        Ok(self.model().at_price(price)?)
    }
}

/// Seed of replication `rep` within group `group` (a k, a price, a cell).
pub fn rep_seed(master: u64, group: u64, rep: usize) -> u64 {
    derive_seed(derive_seed(master, group), rep as u64)
}

/// Simulates a stationary path of `k` steps and fits it. An empty
/// effective sample yields `Ok(None)`; the caller counts it.
pub(crate) fn simulate_and_fit(
    model: &Model<'_>,
    theta0: &[f64],
    k: usize,
    seed: u64,
) -> Result<Option<(QueuePath, FitResult)>> {
    let path = simulate_path(model, theta0, &SimOptions::new(k, seed))?;
    match fit_mle(&path, model, None) {
        Ok(fit) => Ok(Some((path, fit))),
        Err(Error::NoInformativeTransitions) => Ok(None),
        Err(e) => Err(e.into()),
    }
}
