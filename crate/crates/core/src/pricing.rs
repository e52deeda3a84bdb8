//! Iterative estimate-then-reprice loop.
//!
//! Each iteration collects at least `k_min` transitions at the current
//! price, fits the MLE on that iteration's data alone, pools the
//! per-iteration estimates by sample size, and moves to the price that
//! maximises stationary revenue under the pooled estimate. The loop stops
//! once the realised revenue rate of the iteration agrees with the model's
//! prediction to within `tol`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{fit_counts, TransitionCounts};
use crate::model::Model;
use crate::rng::{rng_from_seed, SimRng};
use crate::simulator::{JumpChainSampler, Transition};
use crate::stationary::{expected_revenue, optimal_price, DEFAULT_EPS};

/// Growth rule for the minimum observation count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// `k + 1`
    Increment,
    /// `2k`
    Doubling,
    /// `max(k + 1, ceil(m k))`
    Multiplier(f64),
}

impl Schedule {
    pub fn next(&self, k: usize) -> usize {
        match *self {
            Schedule::Increment => k + 1,
            Schedule::Doubling => 2 * k,
            Schedule::Multiplier(m) => ((m * k as f64).ceil() as usize).max(k + 1),
        }
    }
}

impl std::str::FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "increment" => Ok(Self::Increment),
            "doubling" => Ok(Self::Doubling),
            other => other
                .strip_prefix("multiplier:")
                .and_then(|m| m.parse::<f64>().ok())
                .map(Self::Multiplier)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "unknown schedule {other:?} (increment, doubling or multiplier:<m>)"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingConfig {
    pub p1: f64,
    pub k1_min: usize,
    pub schedule: Schedule,
    pub tol: f64,
    pub max_iterations: usize,
    /// Price search interval; defaults to `[0.01, ceiling]`.
    #[serde(default)]
    pub price_bounds: Option<(f64, f64)>,
    /// Total observation budget. Before each new iteration the loop stops
    /// if running it would end farther from the budget than stopping now.
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

impl PricingConfig {
    pub fn new(p1: f64, k1_min: usize, schedule: Schedule, tol: f64) -> Self {
        Self {
            p1,
            k1_min,
            schedule,
            tol,
            max_iterations: 1000,
            price_bounds: None,
            budget: None,
            eps: DEFAULT_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.p1 >= 0.0 && self.p1.is_finite()) {
            return bad(format!("p1 must be finite and non-negative, got {}", self.p1));
        }
        if self.k1_min < 1 {
            return bad("k1_min must be at least 1".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1".into());
        }
        if let Schedule::Multiplier(m) = self.schedule {
            if !(m.is_finite() && m > 0.0) {
                return bad(format!("schedule multiplier must be positive, got {m}"));
            }
        }
        if let Some((lo, hi)) = self.price_bounds {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return bad(format!("invalid price bounds [{lo}, {hi}]"));
            }
        }
        if self.budget == Some(0) {
            return bad("budget must be positive".into());
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps must lie in (0, 1), got {}", self.eps));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub k_min: usize,
    pub k: usize,
    pub theta: Vec<f64>,
    pub theta_pooled: Vec<f64>,
    /// Price charged during this iteration.
    pub price: f64,
    pub price_next: f64,
    pub delta: f64,
    pub revenue: f64,
    pub time: f64,
    pub joins: usize,
    pub boundary_retries: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Tolerance,
    MaxIterations,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingTrace {
    pub records: Vec<IterationRecord>,
    pub final_price: f64,
    pub stopped_reason: StopReason,
}

impl PricingTrace {
    pub fn total_observations(&self) -> usize {
        self.records.iter().map(|r| r.k).sum()
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// `iter,k_i,theta_i,theta_pooled,price_next,delta,revenue,time`;
    /// vector parameters are `;`-joined.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        writeln!(w, "iter,k_i,theta_i,theta_pooled,price_next,delta,revenue,time")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.index,
                r.k,
                join(&r.theta),
                join(&r.theta_pooled),
                r.price_next,
                r.delta,
                r.revenue,
                r.time
            )?;
        }
        Ok(())
    }
}

/// Supplies transitions of the observable queue at a requested price.
pub trait ObservationSource {
    fn next(&mut self, price: f64) -> Result<Transition>;
}

/// Simulator-backed source; the queue keeps running across price changes.
#[derive(Debug)]
pub struct SimulatedSource<'a> {
    base: Model<'a>,
    theta0: Vec<f64>,
    sampler: JumpChainSampler,
    rng: SimRng,
}

impl<'a> SimulatedSource<'a> {
    pub fn new(base: Model<'a>, theta0: &[f64], seed: u64) -> Result<Self> {
        base.check_theta(theta0)?;
        Ok(Self {
            base,
            theta0: theta0.to_vec(),
            sampler: JumpChainSampler::new(0),
            rng: rng_from_seed(seed),
        })
    }
}

impl ObservationSource for SimulatedSource<'_> {
    fn next(&mut self, price: f64) -> Result<Transition> {
        let model = self.base.at_price(price)?;
        self.sampler.step(&model, &self.theta0, &mut self.rng)
    }
}

/// Replays externally recorded transitions, ignoring the requested price.
#[derive(Debug)]
pub struct StreamSource<I> {
    inner: I,
}

impl<I: Iterator<Item = Transition>> StreamSource<I> {
    pub fn new(inner: I) -> Self {
        Self { inner }
    }
}

impl<I: Iterator<Item = Transition>> ObservationSource for StreamSource<I> {
    fn next(&mut self, _price: f64) -> Result<Transition> {
        self.inner.next().ok_or(Error::SourceExhausted)
    }
}

/// Sample-size weighted mean of the per-iteration estimates.
pub fn pooled_theta(records: &[IterationRecord]) -> Vec<f64> {
    pool(records.iter().map(|r| (r.k, r.theta.as_slice())))
}

fn pool<'r>(items: impl Iterator<Item = (usize, &'r [f64])>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut total = 0.0;
    for (k, theta) in items {
        if acc.is_empty() {
            acc = vec![0.0; theta.len()];
        }
        for (a, t) in acc.iter_mut().zip(theta) {
            *a += k as f64 * t;
        }
        total += k as f64;
    }
    acc.iter().map(|a| a / total).collect()
}

/// Relative gap between the realised revenue rate and the predicted one.
/// Infinite when the iteration earned nothing.
pub fn delta_metric(revenue: f64, time: f64, predicted: f64) -> f64 {
    if revenue <= 0.0 || time <= 0.0 {
        return f64::INFINITY;
    }
    let rate = revenue / time;
    (rate - predicted).abs() / rate
}

/// Runs the pricing loop against `source`. The price in `base` is ignored.
pub fn run_pricing(
    base: &Model<'_>,
    source: &mut dyn ObservationSource,
    pcfg: &PricingConfig,
) -> Result<PricingTrace> {
    pcfg.validate()?;
    base.cfg.validate()?;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut price = pcfg.p1;
    let mut k_min = pcfg.k1_min;
    let mut used = 0usize;
    loop {
        let model = base.at_price(price)?;
        let mut counts = TransitionCounts::default();
        let (mut time, mut joins) = (0.0, 0usize);
        let mut observe = |counts: &mut TransitionCounts| -> Result<()> {
            let t = source.next(price)?;
            counts.push(t.from, t.up);
            time += t.hold;
            joins += usize::from(t.up);
            Ok(())
        };
        for _ in 0..k_min {
            observe(&mut counts)?;
        }
        let cap = 10 * k_min;
        let mut retries = 0;
        let fit = loop {
            match fit_counts(&counts, &model, None) {
                Ok(f) if !f.boundary => break f,
                Ok(_) | Err(Error::NoInformativeTransitions) => {}
                Err(e) => return Err(e),
            }
            if retries == cap {
                return Err(Error::BoundaryRetriesExhausted(cap));
            }
            observe(&mut counts)?;
            retries += 1;
        };
        let k = counts.total();
        used += k;
        let theta_pooled = pool(
            records
                .iter()
                .map(|r| (r.k, r.theta.as_slice()))
                .chain(std::iter::once((k, fit.theta_hat.as_slice()))),
        );
        let best = optimal_price(base, &theta_pooled, pcfg.eps, pcfg.price_bounds)?;
        let revenue = price * joins as f64;
        let delta = delta_metric(revenue, time, best.value);
        records.push(IterationRecord {
            index: records.len() + 1,
            k_min,
            k,
            theta: fit.theta_hat,
            theta_pooled,
            price,
            price_next: best.arg,
            delta,
            revenue,
            time,
            joins,
            boundary_retries: retries,
        });
        price = best.arg;
        k_min = pcfg.schedule.next(k);

        let stop = if delta < pcfg.tol {
            Some(StopReason::Tolerance)
        } else if records.len() >= pcfg.max_iterations {
            Some(StopReason::MaxIterations)
        } else {
            pcfg.budget.and_then(|b| {
                let now = used.abs_diff(b);
                let after = (used + k_min).abs_diff(b);
                (after > now).then_some(StopReason::Budget)
            })
        };
        if let Some(stopped_reason) = stop {
            return Ok(PricingTrace {
                records,
                final_price: price,
                stopped_reason,
            });
        }
    }
}

/// [`run_pricing`] against the simulator with true parameter `theta0`,
/// starting from an empty queue.
pub fn run_pricing_simulated(
    base: &Model<'_>,
    theta0: &[f64],
    pcfg: &PricingConfig,
    seed: u64,
) -> Result<PricingTrace> {
    let mut source = SimulatedSource::new(*base, theta0, seed)?;
    run_pricing(base, &mut source, pcfg)
}

/// Evaluation of a trace against the true parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetrics {
    pub optimal_price: f64,
    pub optimal_revenue: f64,
    /// `Pi(p_final, theta0) / Pi(p*, theta0)`
    pub final_fraction: f64,
    /// `sum t_i Pi(p_i, theta0) / sum t_i Pi(p*, theta0)`
    pub cumulative_fraction: f64,
    /// `sum t_i (Pi(p*, theta0) - Pi(p_i, theta_i))`
    pub lost_revenue: f64,
    /// `p_final - p*`
    pub final_price_error: f64,
    pub iterations: usize,
    pub total_observations: usize,
}

pub fn trace_metrics(
    trace: &PricingTrace,
    theta0: &[f64],
    base: &Model<'_>,
    eps: f64,
) -> Result<TraceMetrics> {
    let best = optimal_price(base, theta0, eps, None)?;
    trace_metrics_with_optimum(trace, theta0, base, eps, best.arg, best.value)
}

/// As [`trace_metrics`] with a precomputed optimum, for batches of runs.
pub fn trace_metrics_with_optimum(
    trace: &PricingTrace,
    theta0: &[f64],
    base: &Model<'_>,
    eps: f64,
    p_star: f64,
    pi_star: f64,
) -> Result<TraceMetrics> {
    let pi = |p: f64, theta: &[f64]| expected_revenue(p, theta, base, eps);
    let mut earned = 0.0;
    let mut attainable = 0.0;
    let mut lost = 0.0;
    for r in &trace.records {
        earned += r.time * pi(r.price, theta0)?;
        attainable += r.time * pi_star;
        lost += r.time * (pi_star - pi(r.price, &r.theta)?);
    }
    Ok(TraceMetrics {
        optimal_price: p_star,
        optimal_revenue: pi_star,
        final_fraction: pi(trace.final_price, theta0)? / pi_star,
        cumulative_fraction: earned / attainable,
        lost_revenue: lost,
        final_price_error: trace.final_price - p_star,
        iterations: trace.iterations(),
        total_observations: trace.total_observations(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExponentialFamily, ModelConfig};

    fn rec(k: usize, theta: f64) -> IterationRecord {
        IterationRecord {
            index: 1,
            k_min: k,
            k,
            theta: vec![theta],
            theta_pooled: vec![theta],
            price: 1.0,
            price_next: 1.0,
            delta: 0.0,
            revenue: 1.0,
            time: 1.0,
            joins: 1,
            boundary_retries: 0,
        }
    }

    #[test]
    fn pooling_examples() {
        assert_eq!(pooled_theta(&[rec(7, 0.3)]), vec![0.3]);
        let p = pooled_theta(&[rec(100, 0.02), rec(300, 0.04)]);
        assert!((p[0] - 0.035).abs() < 1e-15);
        let p = pooled_theta(&[rec(3, 0.5), rec(11, 0.5), rec(1, 0.5)]);
        assert!((p[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_metric(10.0, 2.0, 5.0), 0.0);
        assert_eq!(delta_metric(10.0, 1.0, 5.0), 0.5);
        assert_eq!(delta_metric(0.0, 1.0, 5.0), f64::INFINITY);
        // relative: common rescaling leaves it unchanged
        assert!((delta_metric(30.0, 1.0, 15.0) - delta_metric(10.0, 1.0, 5.0)).abs() < 1e-15);
    }

    #[test]
    fn schedules_strictly_increase() {
        for s in [Schedule::Increment, Schedule::Doubling, Schedule::Multiplier(1.01)] {
            for k in 1..200 {
                assert!(s.next(k) > k);
            }
        }
        assert_eq!(Schedule::Increment.next(5), 6);
        assert_eq!(Schedule::Doubling.next(5), 10);
        assert_eq!(Schedule::Multiplier(1.5).next(5), 8);
        assert_eq!("multiplier:1.5".parse::<Schedule>().unwrap(), Schedule::Multiplier(1.5));
        assert!("halving".parse::<Schedule>().is_err());
    }

    #[test]
    fn config_validation() {
        let ok = PricingConfig::new(15.0, 2, Schedule::Increment, 0.01);
        assert!(ok.validate().is_ok());
        let mut c = ok.clone();
        c.k1_min = 0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.tol = 0.0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.p1 = -1.0;
        assert!(c.validate().is_err());
        let mut c = ok;
        c.max_iterations = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn infinite_tolerance_stops_after_one_iteration() {
        let fam = ExponentialFamily::new(1e-3, 1.0).unwrap();
        let base = Model::new(ModelConfig::new(1.0, 1.0, 1.0, 0.0).unwrap(), &fam);
        let pcfg = PricingConfig::new(15.0, 50, Schedule::Increment, f64::INFINITY);
        let trace = run_pricing_simulated(&base, &[0.02], &pcfg, 3).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.stopped_reason, StopReason::Tolerance);
        assert_eq!(trace.final_price, trace.records[0].price_next);
    }

    #[test]
    fn stream_source_exhausts() {
        let fam = ExponentialFamily::new(1e-3, 1.0).unwrap();
        let base = Model::new(ModelConfig::new(1.0, 1.0, 1.0, 0.0).unwrap(), &fam);
        let steps = vec![Transition { from: 0, up: true, hold: 1.0 }];
        let mut src = StreamSource::new(steps.into_iter());
        let pcfg = PricingConfig::new(15.0, 5, Schedule::Increment, 0.01);
        assert_eq!(run_pricing(&base, &mut src, &pcfg), Err(Error::SourceExhausted));
    }

    #[test]
    fn budget_stops_doubling_after_four() {
        let fam = ExponentialFamily::new(1e-3, 1.0).unwrap();
        let base = Model::new(ModelConfig::new(1.0, 1.0, 1.0, 0.0).unwrap(), &fam);
        let mut pcfg = PricingConfig::new(100.0, 100, Schedule::Doubling, 1e-12);
        pcfg.budget = Some(1530);
        let trace = run_pricing_simulated(&base, &[0.02], &pcfg, 11).unwrap();
        if trace.stopped_reason == StopReason::Budget {
            let total = trace.total_observations();
            assert!(total.abs_diff(1530) < 200, "{total}");
        }
        for w in trace.records.windows(2) {
            assert!(w[1].k_min > w[0].k_min);
        }
    }

    #[test]
    fn metrics_single_iteration_arithmetic() {
        let fam = ExponentialFamily::new(1e-3, 1.0).unwrap();
        let base = Model::new(ModelConfig::new(1.0, 1.0, 1.0, 0.0).unwrap(), &fam);
        let theta0 = [0.02];
        let best = optimal_price(&base, &theta0, DEFAULT_EPS, None).unwrap();
        let mut r = rec(10, 0.02);
        r.price = best.arg;
        r.price_next = best.arg;
        r.time = 3.0;
        let trace = PricingTrace {
            records: vec![r],
            final_price: best.arg,
            stopped_reason: StopReason::Tolerance,
        };
        let m = trace_metrics(&trace, &theta0, &base, DEFAULT_EPS).unwrap();
        assert!((m.final_fraction - 1.0).abs() < 1e-12);
        assert!((m.cumulative_fraction - 1.0).abs() < 1e-12);
        assert!(m.lost_revenue.abs() < 1e-9);
        assert_eq!(m.final_price_error, 0.0);
    }
}
