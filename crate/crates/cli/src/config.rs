//! Experiment configuration.
//!
//! A config file is a JSON object laid over the experiment's preset, so it
//! only needs the fields it changes. Unknown fields are rejected.

use std::path::{Path, PathBuf};

use balkwise_core::{ExponentialFamily, ModelConfig, PricingConfig, Schedule, ValueFamily, Weighting};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

/// Total-observation budget used by the pricing-table preset.
pub const TABLE_BUDGET: usize = 1530;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ScoreConvergence,
    Consistency,
    Normality,
    StdVsPrice,
    RevenueVsPrice,
    PricingTables,
    Fit,
    Simulate,
    PriceOpt,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::ScoreConvergence => "score-convergence",
            Experiment::Consistency => "consistency",
            Experiment::Normality => "normality",
            Experiment::StdVsPrice => "std-vs-price",
            Experiment::RevenueVsPrice => "revenue-vs-price",
            Experiment::PricingTables => "pricing-tables",
            Experiment::Fit => "fit",
            Experiment::Simulate => "simulate",
            Experiment::PriceOpt => "price-opt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub name: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            name: "exponential".into(),
            lower: vec![0.01],
            upper: vec![5.0],
        }
    }
}

impl FamilyConfig {
    pub fn build(&self) -> Result<Box<dyn ValueFamily>> {
        match self.name.as_str() {
            "exponential" => {
                if self.lower.len() != 1 || self.upper.len() != 1 {
                    return Err(CliError::Config(
                        "the exponential family has one parameter: give one lower and one upper bound"
                            .into(),
                    ));
                }
                Ok(Box::new(ExponentialFamily::new(self.lower[0], self.upper[0])?))
            }
            other => Err(CliError::Config(format!(
                "unknown family {other:?}; supported: exponential"
            ))),
        }
    }
}

/// Evenly spaced grid `lo..=hi` with `points` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        balkwise_core::optimize::grid(self.lo, self.hi, self.points, false)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo && self.points >= 2) {
            return Err(CliError::Config(format!(
                "{what} needs finite lo < hi and at least 2 points, got [{}, {}] x {}",
                self.lo, self.hi, self.points
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableCell {
    pub schedule: Schedule,
    pub k1_min: usize,
    pub p1: f64,
}

impl TableCell {
    pub fn label(&self) -> String {
        let g = match self.schedule {
            Schedule::Increment => "k+1".to_string(),
            Schedule::Doubling => "2k".to_string(),
            Schedule::Multiplier(m) => format!("{m}k"),
        };
        format!("{g}|k1={}|p1={}", self.k1_min, self.p1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    pub model: ModelConfig,
    pub family: FamilyConfig,
    pub theta0: Vec<f64>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub k_list: Option<Vec<usize>>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub price_grid: Option<Grid>,
    /// Parameter values for the curve experiments.
    #[serde(default)]
    pub theta_list: Option<Vec<f64>>,
    /// Parameter grid for log-likelihood curves.
    #[serde(default)]
    pub theta_grid: Option<Grid>,
    pub weighting: Weighting,
    pub eps: f64,
    /// Monte-Carlo fits per price point for the empirical std overlay.
    pub empirical_reps: usize,
    pub pricing: PricingConfig,
    #[serde(default)]
    pub cells: Option<Vec<TableCell>>,
    pub out: PathBuf,
    pub format: Format,
}

impl ExperimentConfig {
    /// Anchor setting: `lambda = mu = C = 1`, price 15, exponential values
    /// with `theta0 = 0.02` on `[0.01, 5]`.
    pub fn base() -> Self {
        let pricing = PricingConfig::new(15.0, 2, Schedule::Increment, 0.01);
        Self {
            experiment: None,
            model: ModelConfig::new(1.0, 1.0, 1.0, 15.0).expect("valid anchor"),
            family: FamilyConfig::default(),
            theta0: vec![0.02],
            k: None,
            k_list: None,
            replications: 200,
            seed: 1,
            price_grid: None,
            theta_list: None,
            theta_grid: None,
            weighting: Weighting::Jump,
            eps: balkwise_core::stationary::DEFAULT_EPS,
            empirical_reps: 500,
            pricing,
            cells: None,
            out: PathBuf::from("out"),
            format: Format::Csv,
        }
    }

    pub fn preset(exp: Experiment) -> Self {
        let mut c = Self::base();
        c.experiment = Some(exp);
        c.out = PathBuf::from("out").join(exp.name());
        match exp {
            Experiment::ScoreConvergence => {
                c.k_list = Some(vec![1_000, 10_000, 100_000]);
            }
            Experiment::Consistency => {
                c.k_list = Some(vec![1_000, 10_000, 100_000]);
                c.theta_grid = Some(Grid { lo: 0.01, hi: 0.05, points: 161 });
            }
            Experiment::Normality => {
                c.k_list = Some(vec![200, 10_000]);
                c.replications = 5000;
            }
            Experiment::StdVsPrice => {
                c.price_grid = Some(Grid { lo: 2.0, hi: 250.0, points: 125 });
                c.theta_list = Some(vec![0.02, 0.08]);
                c.weighting = Weighting::Time;
                c.k = Some(1_000);
            }
            Experiment::RevenueVsPrice => {
                c.price_grid = Some(Grid { lo: 1.0, hi: 250.0, points: 250 });
                c.theta_list = Some(vec![0.02, 0.08]);
            }
            Experiment::PricingTables => {
                c.replications = 100;
                c.pricing.budget = Some(TABLE_BUDGET);
                let mut cells = Vec::new();
                for schedule in [Schedule::Increment, Schedule::Doubling] {
                    for k1_min in [2, 100] {
                        for p1 in [1.0, 15.0, 100.0, 250.0] {
                            cells.push(TableCell { schedule, k1_min, p1 });
                        }
                    }
                }
                c.cells = Some(cells);
            }
            Experiment::Simulate | Experiment::Fit => {
                c.k = Some(1_000);
                c.replications = 1;
            }
            Experiment::PriceOpt => {
                c.replications = 1;
            }
        }
        c
    }

    /// Preset for `exp`, overlaid with the JSON file at `path` if given.
    pub fn load(exp: Experiment, path: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::preset(exp);
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let overlay: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            cfg = cfg.overlay(overlay)?;
            if let Some(named) = cfg.experiment {
                if named != exp {
                    return Err(CliError::Config(format!(
                        "config is for experiment {:?} but {:?} was requested",
                        named.name(),
                        exp.name()
                    )));
                }
            }
            cfg.experiment = Some(exp);
        }
        Ok(cfg)
    }

    pub fn overlay(self, overlay: Value) -> Result<Self> {
        if !overlay.is_object() {
            return Err(CliError::Config("config must be a JSON object".into()));
        }
        let mut base = serde_json::to_value(&self)?;
        merge(&mut base, overlay);
        serde_json::from_value(base).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn k_list(&self) -> Result<&[usize]> {
        match &self.k_list {
            Some(ks) if !ks.is_empty() => Ok(ks),
            _ => Err(CliError::Config("k_list is required and must be non-empty".into())),
        }
    }

    pub fn k(&self) -> Result<usize> {
        self.k.ok_or_else(|| CliError::Config("k is required".into()))
    }

    pub fn price_grid(&self) -> Result<Grid> {
        self.price_grid
            .ok_or_else(|| CliError::Config("price_grid is required".into()))
    }

    pub fn theta_list(&self) -> Result<&[f64]> {
        match &self.theta_list {
            Some(t) if !t.is_empty() => Ok(t),
            _ => Err(CliError::Config("theta_list is required and must be non-empty".into())),
        }
    }

    pub fn cells(&self) -> Result<&[TableCell]> {
        match &self.cells {
            Some(c) if !c.is_empty() => Ok(c),
            _ => Err(CliError::Config("cells is required and must be non-empty".into())),
        }
    }

    /// Checks every field `exp` needs; nothing is run before this passes.
    pub fn validate(&self, exp: Experiment) -> Result<()> {
        if self.replications < 1 {
            return Err(CliError::Config("replications must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(CliError::Config(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        self.model.validate()?;
        let fam = self.family.build()?;
        let space = fam.param_space();
        let sim = !matches!(exp, Experiment::PriceOpt | Experiment::Fit | Experiment::RevenueVsPrice);
        if sim || exp == Experiment::PriceOpt {
            space.check(&self.theta0)?;
        }
        let positive = |ks: &[usize]| -> Result<()> {
            if ks.contains(&0) {
                return Err(CliError::Config("step counts must be positive".into()));
            }
            Ok(())
        };
        match exp {
            Experiment::ScoreConvergence | Experiment::Normality => positive(self.k_list()?)?,
            Experiment::Consistency => {
                positive(self.k_list()?)?;
                if let Some(g) = &self.theta_grid {
                    g.validate("theta_grid")?;
                    if g.lo < space.lower()[0] || g.hi > space.upper()[0] {
                        return Err(CliError::Config("theta_grid must lie inside the family bounds".into()));
                    }
                }
            }
            Experiment::StdVsPrice | Experiment::RevenueVsPrice => {
                let g = self.price_grid()?;
                g.validate("price_grid")?;
                if g.lo < 0.0 {
                    return Err(CliError::Config("prices must be non-negative".into()));
                }
                for t in self.theta_list()? {
                    space.check(&[*t])?;
                }
                if exp == Experiment::StdVsPrice && self.empirical_reps > 0 {
                    positive(&[self.k()?])?;
                }
            }
            Experiment::PricingTables => {
                for cell in self.cells()? {
                    let mut p = self.pricing.clone();
                    p.schedule = cell.schedule;
                    p.k1_min = cell.k1_min;
                    p.p1 = cell.p1;
                    p.validate()?;
                }
            }
            Experiment::Simulate | Experiment::Fit => positive(&[self.k()?])?,
            Experiment::PriceOpt => {}
        }
        Ok(())
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}
