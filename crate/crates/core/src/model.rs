//! Queueing primitives of the observable M/M/1 queue with heterogeneous
//! service values.
//!
//! A customer arriving at queue length `q` joins iff their service value
//! `R` satisfies `R - p >= (q + 1) C / mu`, so the joining rate at `q` is
//! `lambda * (1 - F(r(q); theta))` with `r(q) = p + (q + 1) C / mu`. Balking
//! customers are never observed; what the operator sees is the jump chain of
//! queue lengths, whose up-probability from `q > 0` is
//! `lambda_q / (lambda_q + mu)` and from `q = 0` is one.

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Economic environment of the queue: arrival rate, service rate, waiting
/// cost per unit time and admission price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub lambda: f64,
    pub mu: f64,
    pub cost_c: f64,
    pub price: f64,
}

impl ModelConfig {
    pub fn new(lambda: f64, mu: f64, cost_c: f64, price: f64) -> Result<Self> {
        let cfg = Self {
            lambda,
            mu,
            cost_c,
            price,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("mu", self.mu)?;
        positive("cost_c", self.cost_c)?;
        if !(self.price.is_finite() && self.price >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "price must be finite and >= 0, got {}",
                self.price
            )));
        }
        Ok(())
    }

    /// Same environment at a different admission price.
    pub fn with_price(&self, price: f64) -> Result<Self> {
        Self::new(self.lambda, self.mu, self.cost_c, price)
    }
}

/// Offered reward threshold `r(q) = p + (q + 1) C / mu`: the smallest
/// service value that makes joining at queue length `q` worthwhile.
pub fn offered_reward(q: u32, cfg: &ModelConfig) -> f64 {
    cfg.price + (f64::from(q) + 1.0) * cfg.cost_c / cfg.mu
}

/// Compact box `[lower, upper]` of admissible parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidConfig("parameter space must have dimension >= 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidConfig(format!(
                "lower has {} bounds but upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!(
                    "bound {j}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (lo, hi))| *lo <= *t && *t <= *hi)
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        if !self.contains(theta) {
            return Err(Error::OutsideParamSpace {
                theta: theta.to_vec(),
            });
        }
        Ok(())
    }

    /// Clamp every coordinate into the box.
    pub fn project(&self, theta: &mut [f64]) {
        for (j, t) in theta.iter_mut().enumerate() {
            *t = t.clamp(self.lower[j], self.upper[j]);
        }
    }

    /// True when some coordinate is within `rel_tol * width` of a bound.
    pub fn near_boundary(&self, theta: &[f64], rel_tol: f64) -> bool {
        theta.iter().enumerate().any(|(j, t)| {
            let tol = rel_tol * self.width(j);
            (t - self.lower[j]).abs() <= tol || (self.upper[j] - t).abs() <= tol
        })
    }
}

/// Parametric distribution `F(r; theta)` of customers' service values.
///
/// Implementations must be immutable after construction; they are shared
/// across simulation workers.
pub trait ValueFamily: Debug + Send + Sync {
    fn name(&self) -> &str;

    fn param_space(&self) -> &ParamSpace;

    fn dim(&self) -> usize {
        self.param_space().dim()
    }

    /// `F(r; theta)`, nondecreasing in `r`, zero for `r < 0`.
    fn cdf(&self, r: f64, theta: &[f64]) -> f64;

    /// `1 - F(r; theta)`. Override when the tail can be evaluated without
    /// cancellation.
    fn survival(&self, r: f64, theta: &[f64]) -> f64 {
        1.0 - self.cdf(r, theta)
    }

    /// Gradient of `F(r; theta)` with respect to `theta`.
    fn grad_cdf(&self, r: f64, theta: &[f64]) -> DVector<f64>;

    /// Hessian of `F(r; theta)` with respect to `theta`.
    fn hess_cdf(&self, r: f64, theta: &[f64]) -> DMatrix<f64>;

    /// Inverse CDF, used to draw service values. The default brackets by
    /// doubling and bisects.
    fn quantile(&self, u: f64, theta: &[f64]) -> f64 {
        let mut hi = 1.0;
        while self.cdf(hi, theta) < u && hi < 1e300 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid, theta) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Exponentially distributed service values, `F(r; theta) = 1 - exp(-theta r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFamily {
    space: ParamSpace,
}

impl ExponentialFamily {
    /// Rate parameter restricted to `[lower, upper]`, with `lower > 0`.
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "exponential rate bounds must be positive, got lower = {lower}"
            )));
        }
        Ok(Self {
            space: ParamSpace::new(vec![lower], vec![upper])?,
        })
    }
}

impl ValueFamily for ExponentialFamily {
    fn name(&self) -> &str {
        "exponential"
    }

    fn param_space(&self) -> &ParamSpace {
        &self.space
    }

    fn cdf(&self, r: f64, theta: &[f64]) -> f64 {
        if r <= 0.0 {
            0.0
        } else {
            -(-theta[0] * r).exp_m1()
        }
    }

    fn survival(&self, r: f64, theta: &[f64]) -> f64 {
        if r <= 0.0 {
            1.0
        } else {
            (-theta[0] * r).exp()
        }
    }

    fn grad_cdf(&self, r: f64, theta: &[f64]) -> DVector<f64> {
        if r <= 0.0 {
            return DVector::zeros(1);
        }
        DVector::from_element(1, r * (-theta[0] * r).exp())
    }

    fn hess_cdf(&self, r: f64, theta: &[f64]) -> DMatrix<f64> {
        if r <= 0.0 {
            return DMatrix::zeros(1, 1);
        }
        DMatrix::from_element(1, 1, -r * r * (-theta[0] * r).exp())
    }

    fn quantile(&self, u: f64, theta: &[f64]) -> f64 {
        -(-u).ln_1p() / theta[0]
    }
}

/// Per-state quantities of the jump chain at a fixed parameter.
#[derive(Debug, Clone)]
pub(crate) struct StateTerms {
    /// `1 - F(r(q))`
    pub survival: f64,
    /// `dF/dtheta` at `r(q)`
    pub grad_f: DVector<f64>,
    /// `mu + lambda (1 - F)`
    pub denom: f64,
}

/// A queue environment paired with a service-value family.
#[derive(Debug, Clone, Copy)]
pub struct Model<'a> {
    pub cfg: ModelConfig,
    pub family: &'a dyn ValueFamily,
}

impl<'a> Model<'a> {
    pub fn new(cfg: ModelConfig, family: &'a dyn ValueFamily) -> Self {
        Self { cfg, family }
    }

    pub fn at_price(&self, price: f64) -> Result<Model<'a>> {
        Ok(Model {
            cfg: self.cfg.with_price(price)?,
            family: self.family,
        })
    }

    pub fn param_space(&self) -> &ParamSpace {
        self.family.param_space()
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        self.family.param_space().check(theta)
    }

    pub fn offered_reward(&self, q: u32) -> f64 {
        offered_reward(q, &self.cfg)
    }

    pub(crate) fn cdf_at(&self, q: u32, theta: &[f64]) -> f64 {
        let r = self.offered_reward(q);
        if r < 0.0 {
            0.0
        } else {
            self.family.cdf(r, theta)
        }
    }

    pub(crate) fn survival_at(&self, q: u32, theta: &[f64]) -> f64 {
        let r = self.offered_reward(q);
        if r < 0.0 {
            1.0
        } else {
            self.family.survival(r, theta)
        }
    }

    /// `lambda_q` without the parameter-space check.
    pub(crate) fn rate_unchecked(&self, q: u32, theta: &[f64]) -> f64 {
        self.cfg.lambda * self.survival_at(q, theta)
    }

    pub(crate) fn terms(&self, q: u32, theta: &[f64]) -> StateTerms {
        let r = self.offered_reward(q);
        let n = self.family.dim();
        let (survival, grad_f) = if r < 0.0 {
            (1.0, DVector::zeros(n))
        } else {
            (self.family.survival(r, theta), self.family.grad_cdf(r, theta))
        };
        StateTerms {
            survival,
            grad_f,
            denom: self.cfg.mu + self.cfg.lambda * survival,
        }
    }

    pub(crate) fn hess_f(&self, q: u32, theta: &[f64]) -> DMatrix<f64> {
        let r = self.offered_reward(q);
        if r < 0.0 {
            let n = self.family.dim();
            DMatrix::zeros(n, n)
        } else {
            self.family.hess_cdf(r, theta)
        }
    }

    /// Effective (joining) arrival rate `lambda_q = lambda (1 - F(r(q)))`.
    pub fn joining_rate(&self, q: u32, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.rate_unchecked(q, theta))
    }

    pub(crate) fn up_probability_unchecked(&self, q: u32, theta: &[f64]) -> f64 {
        if q == 0 {
            return 1.0;
        }
        let rate = self.rate_unchecked(q, theta);
        if rate <= 0.0 {
            0.0
        } else {
            rate / (rate + self.cfg.mu)
        }
    }

    /// Probability that the jump chain moves up from `q`.
    pub fn up_probability(&self, q: u32, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.up_probability_unchecked(q, theta))
    }

    pub(crate) fn up_prob_grad_from(&self, q: u32, t: &StateTerms) -> DVector<f64> {
        if q == 0 {
            return DVector::zeros(t.grad_f.len());
        }
        let scale = -self.cfg.mu * self.cfg.lambda / (t.denom * t.denom);
        &t.grad_f * scale
    }

    /// Gradient of the up-probability in `theta`. Zero at `q = 0`, where the
    /// up-step is forced.
    pub fn up_prob_grad(&self, q: u32, theta: &[f64]) -> Result<DVector<f64>> {
        self.check_theta(theta)?;
        let t = self.terms(q, theta);
        Ok(self.up_prob_grad_from(q, &t))
    }

    pub(crate) fn up_prob_hess_from(
        &self,
        q: u32,
        t: &StateTerms,
        hess_f: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let n = t.grad_f.len();
        if q == 0 {
            return DMatrix::zeros(n, n);
        }
        let (lambda, mu) = (self.cfg.lambda, self.cfg.mu);
        let d = t.denom;
        let outer = &t.grad_f * t.grad_f.transpose();
        (hess_f * d + outer * (2.0 * lambda)) * (-mu * lambda / (d * d * d))
    }

    /// Hessian of the up-probability in `theta`. Zero at `q = 0`.
    pub fn up_prob_hess(&self, q: u32, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        let t = self.terms(q, theta);
        let h = self.hess_f(q, theta);
        Ok(self.up_prob_hess_from(q, &t, &h))
    }

    /// Whether a transition out of `q` carries information about `theta`:
    /// `q > 0` and `F(r(q))` strictly inside `(0, 1)`.
    pub fn is_informative(&self, q: u32, theta: &[f64]) -> bool {
        q > 0 && self.cdf_at(q, theta) > 0.0 && self.survival_at(q, theta) > 0.0
    }

    /// Smallest price at which `lambda_0` falls below `rel * lambda`.
    pub fn price_ceiling(&self, theta: &[f64], rel: f64) -> Result<f64> {
        self.check_theta(theta)?;
        let empty_survival = |price: f64| {
            let r = price + self.cfg.cost_c / self.cfg.mu;
            self.family.survival(r, theta)
        };
        if empty_survival(0.0) < rel {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        while empty_survival(hi) >= rel {
            hi *= 2.0;
            if hi > 1e15 {
                return Err(Error::InvalidArgument(
                    "joining rate at the empty queue never vanishes".into(),
                ));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-9 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if empty_survival(mid) < rel {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}
