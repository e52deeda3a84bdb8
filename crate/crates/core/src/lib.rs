//! Estimation of customer service-value distributions from balking-censored
//! queue-length data, and revenue-maximising admission pricing built on it.
//!
//! The queue is an M/M/1 system in which an arriving customer joins only if
//! their service value `R` covers the price plus the expected waiting cost,
//! `R >= p + (q + 1) C / mu`. Balking customers are never seen, so only the
//! up/down moves of the queue length are observed.

// `!(x > y)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod inference;
pub mod model;
pub mod optimize;
pub mod pricing;
pub mod rng;
pub mod simulator;
pub mod stationary;

pub use error::{Error, Result};
pub use inference::{confidence_interval, fit_counts, fit_mle, FitResult, TransitionCounts};
pub use model::{offered_reward, ExponentialFamily, Model, ModelConfig, ParamSpace, ValueFamily};
pub use pricing::{
    run_pricing, run_pricing_simulated, trace_metrics, IterationRecord, ObservationSource,
    PricingConfig, PricingTrace, Schedule, SimulatedSource, StopReason, StreamSource, TraceMetrics,
};
pub use rng::{derive_seed, rng_from_seed, SimRng};
pub use simulator::{
    path_stats, simulate_full_arrivals, simulate_path, InitialState, PathStats, QueuePath,
    SimOptions, Transition,
};
pub use stationary::{
    asymptotic_std, expected_revenue, optimal_price, stationary_distribution,
    std_minimizing_price, theoretical_sigma, StationaryDist, Weighting,
};
