//! Fixtures shared by the benchmarks.

use balkwise_core::{simulate_path, ExponentialFamily, Model, ModelConfig, QueuePath, SimOptions};

/// Exponential family on `[0.01, 5]`.
pub fn family() -> ExponentialFamily {
    ExponentialFamily::new(0.01, 5.0).expect("valid bounds")
}

/// `lambda = mu = C = 1` at the given price.
pub fn model(fam: &ExponentialFamily, price: f64) -> Model<'_> {
    Model::new(ModelConfig::new(1.0, 1.0, 1.0, price).expect("valid config"), fam)
}

pub fn path(fam: &ExponentialFamily, steps: usize, seed: u64) -> QueuePath {
    simulate_path(&model(fam, 15.0), &[0.02], &SimOptions::new(steps, seed)).expect("simulation")
}
