//! Stationary analysis of the birth-death queue: xi-products, truncated
//! stationary laws, expected revenue, and the asymptotic information matrix.
//!
//! Two stationary laws appear. The continuous-time law has
//! `P(Q = q) ∝ xi_q` and governs revenue per unit time. The jump-chain law,
//! `∝ xi_q (lambda_q + mu 1{q > 0})`, is what averages over transition
//! epochs converge to, and so is the one matching the observed information.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::optimize::{grid, grid_golden_max, ScalarMax};

/// Default tail tolerance for truncating the state space.
pub const DEFAULT_EPS: f64 = 1e-12;
/// Hard cap on the number of states summed.
pub const MAX_STATES: usize = 1_000_000;
/// Lowest price considered by the price searches.
pub const PRICE_FLOOR: f64 = 0.01;
/// Grid resolution of the price searches.
pub const PRICE_GRID_POINTS: usize = 256;
/// The search ceiling is the price at which `lambda_0 < PRICE_CEILING_REL * lambda`.
pub const PRICE_CEILING_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Continuous-time occupancy.
    Time,
    /// Occupancy at transition epochs.
    Jump,
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(Self::Time),
            "jump" => Ok(Self::Jump),
            other => Err(Error::InvalidArgument(format!("unknown weighting {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDist {
    pub probs: Vec<f64>,
    pub qstar: u32,
    pub tail_bound: f64,
    pub weighting: Weighting,
}

/// `xi_0 = 1`, `xi_q = xi_{q-1} lambda_{q-1} / mu`.
pub fn xi_products(model: &Model<'_>, theta: &[f64], qmax: u32) -> Result<Vec<f64>> {
    model.check_theta(theta)?;
    let mu = model.cfg.mu;
    let mut xi = Vec::with_capacity(qmax as usize + 1);
    xi.push(1.0);
    for q in 1..=qmax {
        let prev = xi[q as usize - 1];
        xi.push(prev * model.rate_unchecked(q - 1, theta) / mu);
    }
    Ok(xi)
}

/// Truncated stationary distribution over `0..=qstar`.
///
/// `qstar` is the first state where `lambda_q / mu < 1/2` and the state's
/// (weighted) mass is below `eps` times the running total; the geometric
/// tail beyond it is then bounded by that mass.
pub fn stationary_distribution(
    model: &Model<'_>,
    theta: &[f64],
    eps: f64,
    weighting: Weighting,
) -> Result<StationaryDist> {
    model.check_theta(theta)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    let mu = model.cfg.mu;
    if model.rate_unchecked(0, theta) <= 0.0 {
        return Err(Error::AbsorbingEmptyState);
    }
    let mut weights = Vec::new();
    let mut xi = 1.0;
    let mut time_sum = 0.0;
    let mut weight_sum = 0.0;
    let mut q: u32 = 0;
    loop {
        if weights.len() >= MAX_STATES {
            return Err(Error::TruncationFailed(MAX_STATES));
        }
        let rate = model.rate_unchecked(q, theta);
        let w = match weighting {
            Weighting::Time => xi,
            Weighting::Jump => xi * (rate + if q > 0 { mu } else { 0.0 }),
        };
        weights.push(w);
        time_sum += xi;
        weight_sum += w;
        let settled = rate / mu < 0.5 && xi < eps * time_sum && w < eps * weight_sum;
        if settled {
            let tail_bound = w / weight_sum;
            let probs = weights.into_iter().map(|w| w / weight_sum).collect();
            return Ok(StationaryDist {
                probs,
                qstar: q,
                tail_bound,
                weighting,
            });
        }
        xi *= rate / mu;
        q += 1;
    }
}

/// Stationary revenue per unit time `p * sum_q P(Q = q) lambda_q` at price
/// `price`; the price in `base` is ignored.
pub fn expected_revenue(price: f64, theta: &[f64], base: &Model<'_>, eps: f64) -> Result<f64> {
    let model = base.at_price(price)?;
    model.check_theta(theta)?;
    if price == 0.0 {
        return Ok(0.0);
    }
    if model.rate_unchecked(0, theta) <= 0.0 {
        return Ok(0.0);
    }
    let dist = stationary_distribution(&model, theta, eps, Weighting::Time)?;
    let throughput: f64 = dist
        .probs
        .iter()
        .enumerate()
        .map(|(q, p)| p * model.rate_unchecked(q as u32, theta))
        .sum();
    Ok(price * throughput)
}

/// Theoretical information matrix with an invertibility flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Sigma {
    pub matrix: DMatrix<f64>,
    pub invertible: bool,
}

/// `Sigma = E[ mu lambda F' F'^T / ((1 - F)(mu + lambda (1 - F))^2) ]` at
/// `r(Q)`, with `Q` drawn from the chosen stationary law.
///
/// Under jump weighting the empty state contributes nothing (its up-step is
/// forced), so the result is the ergodic limit of the observed information.
/// Time weighting evaluates the summand at every state, including `q = 0`.
pub fn theoretical_sigma(
    model: &Model<'_>,
    theta: &[f64],
    eps: f64,
    weighting: Weighting,
) -> Result<Sigma> {
    let dist = stationary_distribution(model, theta, eps, weighting)?;
    let n = model.family.dim();
    let (lambda, mu) = (model.cfg.lambda, model.cfg.mu);
    let mut sigma = DMatrix::zeros(n, n);
    for (q, prob) in dist.probs.iter().enumerate() {
        if weighting == Weighting::Jump && q == 0 {
            continue;
        }
        let t = model.terms(q as u32, theta);
        if t.survival <= 0.0 || *prob == 0.0 {
            continue;
        }
        let scale = mu * lambda / (t.survival * t.denom * t.denom);
        sigma += &t.grad_f * t.grad_f.transpose() * (scale * prob);
    }
    let invertible = sigma.clone().cholesky().is_some();
    Ok(Sigma {
        matrix: sigma,
        invertible,
    })
}

/// Asymptotic standard deviations of `sqrt(k) (theta_hat - theta)` at a
/// given price: `sqrt(diag(Sigma^-1))`.
pub fn asymptotic_std(
    price: f64,
    theta: &[f64],
    base: &Model<'_>,
    eps: f64,
    weighting: Weighting,
) -> Result<Vec<f64>> {
    let model = base.at_price(price)?;
    let sigma = theoretical_sigma(&model, theta, eps, weighting)?;
    if !sigma.invertible {
        return Err(Error::InformationSingular);
    }
    let inv = crate::inference::invert_information(&sigma.matrix)?;
    Ok(inv.diagonal().iter().map(|v| v.sqrt()).collect())
}

/// Price interval searched by [`optimal_price`] and [`std_minimizing_price`].
pub fn price_search_bounds(
    base: &Model<'_>,
    theta: &[f64],
    bounds: Option<(f64, f64)>,
) -> Result<(f64, f64)> {
    let ceiling = base.price_ceiling(theta, PRICE_CEILING_REL)?;
    let (lo, hi) = match bounds {
        Some((lo, hi)) => (lo.max(0.0), hi.min(ceiling.max(lo))),
        None => (PRICE_FLOOR, ceiling),
    };
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!(
            "empty price search interval [{lo}, {hi}]"
        )));
    }
    Ok((lo, hi))
}

/// Revenue-maximising price: 256-point grid over the search interval, then
/// golden-section refinement in the best bracket.
pub fn optimal_price(
    base: &Model<'_>,
    theta: &[f64],
    eps: f64,
    bounds: Option<(f64, f64)>,
) -> Result<ScalarMax> {
    base.check_theta(theta)?;
    let (lo, hi) = price_search_bounds(base, theta, bounds)?;
    let mut failure = None;
    let res = grid_golden_max(
        |p| match expected_revenue(p, theta, base, eps) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        &grid(lo, hi, PRICE_GRID_POINTS, false),
        1e-9 * hi,
    );
    match failure {
        Some(e) if !res.value.is_finite() => Err(e),
        _ => Ok(res),
    }
}

/// Price minimising the asymptotic standard deviation of the first
/// parameter. `value` in the result is the (positive) minimum std.
pub fn std_minimizing_price(
    base: &Model<'_>,
    theta: &[f64],
    eps: f64,
    weighting: Weighting,
    bounds: Option<(f64, f64)>,
) -> Result<ScalarMax> {
    base.check_theta(theta)?;
    let (lo, hi) = price_search_bounds(base, theta, bounds)?;
    let res = grid_golden_max(
        |p| match asymptotic_std(p, theta, base, eps, weighting) {
            Ok(s) => -s[0],
            Err(_) => f64::NEG_INFINITY,
        },
        &grid(lo, hi, PRICE_GRID_POINTS, false),
        1e-9 * hi,
    );
    if !res.value.is_finite() {
        return Err(Error::InformationSingular);
    }
    Ok(ScalarMax {
        value: -res.value,
        ..res
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExponentialFamily, ModelConfig};
    use approx::assert_relative_eq;

    fn anchor(fam: &ExponentialFamily) -> Model<'_> {
        Model::new(ModelConfig::new(1.0, 1.0, 1.0, 15.0).unwrap(), fam)
    }

    #[test]
    fn xi_first_terms() {
        let fam = ExponentialFamily::new(1e-3, 1.0).unwrap();
        let m = anchor(&fam);
        let xi = xi_products(&m, &[0.02], 5).unwrap();
        assert_eq!(xi[0], 1.0);
        assert_relative_eq!(xi[1], (-0.32f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(xi[2], (-0.32f64).exp() * (-0.34f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn geometric_without_balking() {
        // theta at the tiny lower bound: joining rate is lambda to 1e-10
        let fam = ExponentialFamily::new(1e-13, 1.0).unwrap();
        let m = Model::new(ModelConfig::new(0.5, 1.0, 1.0, 0.0).unwrap(), &fam);
        let xi = xi_products(&m, &[1e-13], 10).unwrap();
        for (q, x) in xi.iter().enumerate() {
            assert_relative_eq!(*x, 0.5f64.powi(q as i32), max_relative = 1e-9);
        }
        let d = stationary_distribution(&m, &[1e-13], 1e-12, Weighting::Time).unwrap();
        for (q, p) in d.probs.iter().enumerate() {
            assert!((p - 0.5 * 0.5f64.powi(q as i32)).abs() < 1e-9);
        }
    }

    #[test]
    fn distributions_normalised_with_small_tail() {
        let fam = ExponentialFamily::new(1e-3, 1.0).unwrap();
        let m = anchor(&fam);
        for w in [Weighting::Time, Weighting::Jump] {
            let d = stationary_distribution(&m, &[0.02], 1e-12, w).unwrap();
            let total: f64 = d.probs.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(d.tail_bound <= 1e-12);
            assert!(d.probs.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn bad_eps_rejected() {
        let fam = ExponentialFamily::new(1e-3, 1.0).unwrap();
        let m = anchor(&fam);
        assert!(stationary_distribution(&m, &[0.02], 0.0, Weighting::Time).is_err());
        assert!(stationary_distribution(&m, &[0.02], 1.0, Weighting::Time).is_err());
    }

    #[test]
    fn revenue_zero_price_and_vanishing_tail() {
        let fam = ExponentialFamily::new(1e-3, 1.0).unwrap();
        let m = anchor(&fam);
        assert_eq!(expected_revenue(0.0, &[0.02], &m, DEFAULT_EPS).unwrap(), 0.0);
        assert!(expected_revenue(1e4, &[0.02], &m, DEFAULT_EPS).unwrap() <= 1e-3);
    }

    #[test]
    fn sigma_summand_exponential() {
        // with a single reachable state the expectation is the summand itself
        let fam = ExponentialFamily::new(1e-3, 10.0).unwrap();
        let m = Model::new(ModelConfig::new(1.0, 1.0, 1.0, 15.0).unwrap(), &fam);
        let theta = 0.02;
        let d = stationary_distribution(&m, &[theta], DEFAULT_EPS, Weighting::Time).unwrap();
        let s = theoretical_sigma(&m, &[theta], DEFAULT_EPS, Weighting::Time).unwrap();
        let manual: f64 = d
            .probs
            .iter()
            .enumerate()
            .map(|(q, p)| {
                let r = 15.0 + (q as f64 + 1.0);
                let e = (-theta * r).exp();
                p * r * r * e / ((1.0 + e) * (1.0 + e))
            })
            .sum();
        assert_relative_eq!(s.matrix[(0, 0)], manual, max_relative = 1e-12);
        assert!(s.invertible);
    }

    #[test]
    fn std_positive_on_price_grid() {
        let fam = ExponentialFamily::new(1e-3, 1.0).unwrap();
        let m = anchor(&fam);
        for p in (1..=250).step_by(7) {
            let s = asymptotic_std(p as f64, &[0.02], &m, DEFAULT_EPS, Weighting::Time).unwrap();
            assert!(s[0].is_finite() && s[0] > 0.0, "p={p}");
        }
    }

    #[test]
    fn weighting_parses() {
        assert_eq!("time".parse::<Weighting>().unwrap(), Weighting::Time);
        assert_eq!("jump".parse::<Weighting>().unwrap(), Weighting::Jump);
        assert!("other".parse::<Weighting>().is_err());
    }
}
