//! Simulation of the observable (balking-censored) queue-length process.
//!
//! The default sampler draws the thinned jump chain directly: from `q > 0`
//! the holding time is `Exp(lambda_q + mu)` and the chain moves up with
//! probability `lambda_q / (lambda_q + mu)`; from the empty queue the holding
//! time is the wait for the next *joining* arrival, `Exp(lambda_0)`.
//! [`simulate_full_arrivals`] instead plays out every Poisson arrival and
//! its join/balk decision, and serves as an independent oracle.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::{rng_from_seed, SimRng};

/// Default number of discarded burn-in transitions.
pub const DEFAULT_WARMUP_STEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// Start from this queue length.
    Fixed(u32),
    /// Start from the empty queue and rely on burn-in.
    StationaryWarmup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub steps: usize,
    pub seed: u64,
    pub initial_state: InitialState,
    pub warmup_steps: usize,
}

impl SimOptions {
    /// `steps` recorded transitions after the default burn-in.
    pub fn new(steps: usize, seed: u64) -> Self {
        Self {
            steps,
            seed,
            initial_state: InitialState::StationaryWarmup,
            warmup_steps: DEFAULT_WARMUP_STEPS,
        }
    }

    /// Record from queue length `q` with no burn-in.
    pub fn from_state(steps: usize, seed: u64, q: u32) -> Self {
        Self {
            steps,
            seed,
            initial_state: InitialState::Fixed(q),
            warmup_steps: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be >= 1".into()));
        }
        Ok(())
    }

    fn start(&self) -> u32 {
        match self.initial_state {
            InitialState::Fixed(q) => q,
            InitialState::StationaryWarmup => 0,
        }
    }
}

/// One observed move of the queue-length process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: u32,
    pub up: bool,
    pub hold: f64,
}

impl Transition {
    pub fn to(&self) -> u32 {
        if self.up {
            self.from + 1
        } else {
            self.from - 1
        }
    }
}

/// An observed trajectory `Q_0, ..., Q_k` of the jump chain, with holding
/// times and the admission revenue it generated.
#[derive(Debug, Clone, PartialEq)]
pub struct QueuePath {
    states: Vec<u32>,
    ups: Vec<bool>,
    holds: Vec<f64>,
    price: f64,
    revenue: f64,
    total_time: f64,
    informative_mask: Vec<bool>,
}

impl QueuePath {
    /// Builds a path from its states and holding times. The informative
    /// mask defaults to `Q_{i-1} > 0`; use [`QueuePath::with_informative_mask`]
    /// for families whose CDF can reach 0 or 1.
    pub fn new(states: Vec<u32>, holds: Vec<f64>, price: f64) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::MalformedPath("path has no states".into()));
        }
        if holds.len() + 1 != states.len() {
            return Err(Error::MalformedPath(format!(
                "{} states need {} holding times, got {}",
                states.len(),
                states.len() - 1,
                holds.len()
            )));
        }
        let mut ups = Vec::with_capacity(holds.len());
        for (i, w) in states.windows(2).enumerate() {
            let up = if w[1] == w[0] + 1 {
                true
            } else if w[0] > 0 && w[1] == w[0] - 1 {
                false
            } else {
                return Err(Error::MalformedPath(format!(
                    "step {} jumps from {} to {}",
                    i + 1,
                    w[0],
                    w[1]
                )));
            };
            ups.push(up);
        }
        if let Some(h) = holds.iter().find(|h| !(h.is_finite() && **h >= 0.0)) {
            return Err(Error::MalformedPath(format!("invalid holding time {h}")));
        }
        let joins = ups.iter().filter(|u| **u).count();
        let informative_mask = states[..states.len() - 1].iter().map(|q| *q > 0).collect();
        Ok(Self {
            total_time: holds.iter().sum(),
            revenue: price * joins as f64,
            states,
            ups,
            holds,
            price,
            informative_mask,
        })
    }

    /// Path with zero holding times; for likelihood work where timing is
    /// irrelevant.
    pub fn from_states(states: Vec<u32>, price: f64) -> Result<Self> {
        let k = states.len().saturating_sub(1);
        Self::new(states, vec![0.0; k], price)
    }

    pub(crate) fn from_transitions(start: u32, transitions: &[Transition], price: f64) -> Self {
        let mut states = Vec::with_capacity(transitions.len() + 1);
        states.push(start);
        states.extend(transitions.iter().map(Transition::to));
        let holds = transitions.iter().map(|t| t.hold).collect();
        Self::new(states, holds, price).expect("sampler produced a malformed path")
    }

    /// Recomputes the informative mask at `theta`.
    pub fn with_informative_mask(mut self, model: &Model<'_>, theta: &[f64]) -> Self {
        self.informative_mask = self.states[..self.states.len() - 1]
            .iter()
            .map(|q| model.is_informative(*q, theta))
            .collect();
        self
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn ups(&self) -> &[bool] {
        &self.ups
    }

    pub fn holds(&self) -> &[f64] {
        &self.holds
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn revenue(&self) -> f64 {
        self.revenue
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn informative_mask(&self) -> &[bool] {
        &self.informative_mask
    }

    /// Number of transitions `k`.
    pub fn steps(&self) -> usize {
        self.ups.len()
    }

    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        self.states
            .iter()
            .zip(&self.ups)
            .zip(&self.holds)
            .map(|((from, up), hold)| Transition {
                from: *from,
                up: *up,
                hold: *hold,
            })
    }

    /// Writes `step,state,up,hold`; row 0 carries the initial state only.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,state,up,hold")?;
        writeln!(w, "0,{},,", self.states[0])?;
        for (i, t) in self.transitions().enumerate() {
            writeln!(w, "{},{},{},{}", i + 1, t.to(), u8::from(t.up), t.hold)?;
        }
        Ok(())
    }

    /// Parses the format written by [`QueuePath::write_csv`].
    pub fn read_csv<R: BufRead>(r: R, price: f64) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedPath("empty input".into()))?
            .map_err(|e| Error::MalformedPath(e.to_string()))?;
        if header.trim() != "step,state,up,hold" {
            return Err(Error::MalformedPath(format!("unexpected header {header:?}")));
        }
        let mut states = Vec::new();
        let mut holds = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::MalformedPath(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::MalformedPath(format!("row {n}: expected 4 fields")));
            }
            let bad = |what: &str| Error::MalformedPath(format!("row {n}: bad {what}"));
            let step: usize = fields[0].parse().map_err(|_| bad("step"))?;
            if step != n {
                return Err(bad("step index"));
            }
            states.push(fields[1].parse::<u32>().map_err(|_| bad("state"))?);
            if n > 0 {
                holds.push(fields[3].parse::<f64>().map_err(|_| bad("hold"))?);
                let up = match fields[2] {
                    "1" => true,
                    "0" => false,
                    _ => return Err(bad("up flag")),
                };
                let prev = states[n - 1];
                if up != (states[n] > prev) {
                    return Err(bad("up flag (disagrees with states)"));
                }
            }
        }
        Self::new(states, holds, price)
    }
}

/// Summary counts and occupancies of a path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathStats {
    pub ups: usize,
    pub downs: usize,
    pub effective_n: usize,
    /// Fraction of transitions made out of each state.
    pub occupancy_jump: Vec<f64>,
    /// Fraction of elapsed time spent in each state.
    pub occupancy_time: Vec<f64>,
    pub revenue_rate: f64,
}

pub fn path_stats(path: &QueuePath) -> PathStats {
    let k = path.steps();
    let max_state = path.states().iter().copied().max().unwrap_or(0) as usize;
    let mut jump = vec![0.0; max_state + 1];
    let mut time = vec![0.0; max_state + 1];
    for t in path.transitions() {
        jump[t.from as usize] += 1.0;
        time[t.from as usize] += t.hold;
    }
    if k > 0 {
        jump.iter_mut().for_each(|v| *v /= k as f64);
    }
    let total = path.total_time();
    if total > 0.0 {
        time.iter_mut().for_each(|v| *v /= total);
    }
    let ups = path.ups().iter().filter(|u| **u).count();
    PathStats {
        ups,
        downs: k - ups,
        effective_n: path.informative_mask().iter().filter(|m| **m).count(),
        occupancy_jump: jump,
        occupancy_time: time,
        revenue_rate: if total > 0.0 { path.revenue() / total } else { 0.0 },
    }
}

/// Stateful sampler of the thinned jump chain. Used by [`simulate_path`] and
/// by the pricing loop, which keeps the queue running across price changes.
#[derive(Debug, Clone)]
pub struct JumpChainSampler {
    state: u32,
}

impl JumpChainSampler {
    pub fn new(state: u32) -> Self {
        Self { state }
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        model: &Model<'_>,
        theta: &[f64],
        rng: &mut R,
    ) -> Result<Transition> {
        let q = self.state;
        let rate = model.rate_unchecked(q, theta);
        let (total, up) = if q == 0 {
            if rate <= 0.0 {
                return Err(Error::AbsorbingEmptyState);
            }
            (rate, true)
        } else {
            let total = rate + model.cfg.mu;
            (total, rng.random::<f64>() * total < rate)
        };
        let e: f64 = rng.sample(Exp1);
        let t = Transition {
            from: q,
            up,
            hold: e / total,
        };
        self.state = t.to();
        Ok(t)
    }
}

fn check_inputs(model: &Model<'_>, theta: &[f64], opts: &SimOptions) -> Result<()> {
    model.check_theta(theta)?;
    model.cfg.validate()?;
    opts.validate()?;
    if model.rate_unchecked(0, theta) <= 0.0 {
        return Err(Error::AbsorbingEmptyState);
    }
    Ok(())
}

/// Simulates `opts.steps` transitions of the observable queue under
/// `theta0`. Deterministic given the seed.
pub fn simulate_path(model: &Model<'_>, theta0: &[f64], opts: &SimOptions) -> Result<QueuePath> {
    check_inputs(model, theta0, opts)?;
    let mut rng = rng_from_seed(opts.seed);
    simulate_path_with(model, theta0, opts, &mut rng)
}

/// As [`simulate_path`] with a caller-provided generator; `opts.seed` is
/// ignored.
pub fn simulate_path_with(
    model: &Model<'_>,
    theta0: &[f64],
    opts: &SimOptions,
    rng: &mut SimRng,
) -> Result<QueuePath> {
    check_inputs(model, theta0, opts)?;
    let mut sampler = JumpChainSampler::new(opts.start());
    for _ in 0..opts.warmup_steps {
        sampler.step(model, theta0, rng)?;
    }
    let start = sampler.state();
    let mut transitions = Vec::with_capacity(opts.steps);
    for _ in 0..opts.steps {
        transitions.push(sampler.step(model, theta0, rng)?);
    }
    Ok(QueuePath::from_transitions(start, &transitions, model.cfg.price)
        .with_informative_mask(model, theta0))
}

/// Simulates every Poisson arrival, draws its service value and applies the
/// joining rule; balking customers are dropped from the record. Same output
/// law as [`simulate_path`], built independently of it.
pub fn simulate_full_arrivals(
    model: &Model<'_>,
    theta0: &[f64],
    opts: &SimOptions,
) -> Result<QueuePath> {
    check_inputs(model, theta0, opts)?;
    let mut rng = rng_from_seed(opts.seed);
    let cfg = model.cfg;
    let mut q = opts.start();
    let mut start = q;
    let mut transitions = Vec::with_capacity(opts.steps);
    let mut elapsed = 0.0;
    let mut recorded = 0usize;
    while recorded < opts.warmup_steps + opts.steps {
        let total = if q == 0 { cfg.lambda } else { cfg.lambda + cfg.mu };
        let e: f64 = rng.sample(Exp1);
        elapsed += e / total;
        let arrival = q == 0 || rng.random::<f64>() * total < cfg.lambda;
        let moved = if arrival {
            let value = model.family.quantile(rng.random::<f64>(), theta0);
            joins(value, q, &cfg).then_some(true)
        } else {
            Some(false)
        };
        if let Some(up) = moved {
            if recorded >= opts.warmup_steps {
                transitions.push(Transition {
                    from: q,
                    up,
                    hold: elapsed,
                });
            }
            q = if up { q + 1 } else { q - 1 };
            elapsed = 0.0;
            recorded += 1;
            if recorded == opts.warmup_steps {
                start = q;
            }
        }
    }
    Ok(QueuePath::from_transitions(start, &transitions, cfg.price)
        .with_informative_mask(model, theta0))
}

/// The joining rule: join iff `R - p >= (q + 1) C / mu`.
pub fn joins(value: f64, q: u32, cfg: &crate::model::ModelConfig) -> bool {
    value - cfg.price >= (f64::from(q) + 1.0) * cfg.cost_c / cfg.mu
}
