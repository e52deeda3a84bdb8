//! Censored-data maximum likelihood for the service-value parameter.
//!
//! Only transitions out of informative states (queue non-empty and
//! `F(r(q))` strictly inside `(0, 1)`) depend on `theta`; each is a
//! Bernoulli draw with success probability `p(q, theta)`. The log-likelihood
//! below omits the `theta`-free constants, so values are comparable only
//! within one path. Score and observed information are normalised by the
//! full step count `k`, not by the effective sample size.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::optimize::{golden_section_max, grid};
use crate::rng::rng_from_seed;
use crate::simulator::QueuePath;

/// Relative distance to a bound below which a fit is flagged as boundary.
pub const BOUNDARY_REL_TOL: f64 = 1e-6;
const PARAM_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 129;
const MULTI_STARTS: usize = 5;

/// Up/down counts per pre-transition state: a sufficient statistic for the
/// likelihood.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionCounts {
    ups: Vec<u64>,
    downs: Vec<u64>,
    total: usize,
}

impl TransitionCounts {
    pub fn from_path(path: &QueuePath) -> Self {
        let mut counts = Self::default();
        for t in path.transitions() {
            counts.push(t.from, t.up);
        }
        counts
    }

    pub fn push(&mut self, from: u32, up: bool) {
        let q = from as usize;
        if q >= self.ups.len() {
            self.ups.resize(q + 1, 0);
            self.downs.resize(q + 1, 0);
        }
        if up {
            self.ups[q] += 1;
        } else {
            self.downs[q] += 1;
        }
        self.total += 1;
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// `(state, ups, downs)` for non-empty states with at least one visit.
    fn visited(&self) -> impl Iterator<Item = (u32, f64, f64)> + '_ {
        self.ups
            .iter()
            .zip(&self.downs)
            .enumerate()
            .skip(1)
            .filter(|(_, (u, d))| **u + **d > 0)
            .map(|(q, (u, d))| (q as u32, *u as f64, *d as f64))
    }

    /// Number of transitions whose pre-state is informative at `theta`.
    pub fn effective_n(&self, model: &Model<'_>, theta: &[f64]) -> usize {
        self.visited()
            .filter(|(q, _, _)| model.is_informative(*q, theta))
            .map(|(_, u, d)| (u + d) as usize)
            .sum()
    }

    pub fn log_likelihood(&self, model: &Model<'_>, theta: &[f64]) -> f64 {
        let mut ll = 0.0;
        for (q, ups, downs) in self.visited() {
            ll += state_loglik(model, q, theta, ups, downs);
            if ll == f64::NEG_INFINITY {
                break;
            }
        }
        ll
    }

    pub fn score(&self, model: &Model<'_>, theta: &[f64]) -> DVector<f64> {
        let mut s = DVector::zeros(model.family.dim());
        if self.total == 0 {
            return s;
        }
        for (q, ups, downs) in self.visited() {
            if !model.is_informative(q, theta) {
                continue;
            }
            let b = BernoulliTerms::new(model, q, theta, false);
            s += b.psi_up() * ups + b.psi_down() * downs;
        }
        s / self.total as f64
    }

    pub fn observed_information(&self, model: &Model<'_>, theta: &[f64]) -> DMatrix<f64> {
        let n = model.family.dim();
        let mut info = DMatrix::zeros(n, n);
        if self.total == 0 {
            return info;
        }
        for (q, ups, downs) in self.visited() {
            if !model.is_informative(q, theta) {
                continue;
            }
            let b = BernoulliTerms::new(model, q, theta, true);
            info -= b.dpsi_up() * ups + b.dpsi_down() * downs;
        }
        symmetrize(info / self.total as f64)
    }
}

fn state_loglik(model: &Model<'_>, q: u32, theta: &[f64], ups: f64, downs: f64) -> f64 {
    if !model.is_informative(q, theta) {
        // a full-balking state cannot produce an up-move
        if q > 0 && ups > 0.0 && model.survival_at(q, theta) <= 0.0 {
            return f64::NEG_INFINITY;
        }
        return 0.0;
    }
    let (lambda, mu) = (model.cfg.lambda, model.cfg.mu);
    // log p = ln(rho) - ln(1 + rho), log(1 - p) = -ln(1 + rho) with
    // rho = lambda s / mu; ln_1p keeps the tiny-rho regime from going flat
    let rho = lambda * model.survival_at(q, theta) / mu;
    let log_1p = rho.ln_1p();
    let mut ll = 0.0;
    if ups > 0.0 {
        ll += ups * (rho.ln() - log_1p);
    }
    if downs > 0.0 {
        ll -= downs * log_1p;
    }
    ll
}

/// Up-probability and its derivatives at one informative state.
struct BernoulliTerms {
    p: f64,
    dp: DVector<f64>,
    d2p: Option<DMatrix<f64>>,
}

impl BernoulliTerms {
    fn new(model: &Model<'_>, q: u32, theta: &[f64], second: bool) -> Self {
        let t = model.terms(q, theta);
        let p = model.cfg.lambda * t.survival / t.denom;
        let dp = model.up_prob_grad_from(q, &t);
        let d2p = second.then(|| model.up_prob_hess_from(q, &t, &model.hess_f(q, theta)));
        Self { p, dp, d2p }
    }

    /// `psi` for `Y = 1`: `p' / p`.
    fn psi_up(&self) -> DVector<f64> {
        &self.dp / self.p
    }

    /// `psi` for `Y = 0`: `-p' / (1 - p)`.
    fn psi_down(&self) -> DVector<f64> {
        &self.dp / -(1.0 - self.p)
    }

    /// `d psi / d theta` for `Y = 1`: `(p'' p - p' p'^T) / p^2`.
    fn dpsi_up(&self) -> DMatrix<f64> {
        let d2p = self.d2p.as_ref().expect("second derivatives requested");
        (d2p * self.p - &self.dp * self.dp.transpose()) / (self.p * self.p)
    }

    /// `d psi / d theta` for `Y = 0`: `-(p'' (1 - p) + p' p'^T) / (1 - p)^2`.
    fn dpsi_down(&self) -> DMatrix<f64> {
        let d2p = self.d2p.as_ref().expect("second derivatives requested");
        let c = 1.0 - self.p;
        (d2p * c + &self.dp * self.dp.transpose()) / -(c * c)
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Log-likelihood of `theta` given the observed path (constants omitted).
/// Returns `-inf` when the path is impossible under `theta`.
pub fn log_likelihood(path: &QueuePath, theta: &[f64], model: &Model<'_>) -> Result<f64> {
    model.check_theta(theta)?;
    let mut ll = 0.0;
    for t in path.transitions() {
        let (ups, downs) = if t.up { (1.0, 0.0) } else { (0.0, 1.0) };
        ll += state_loglik(model, t.from, theta, ups, downs);
    }
    Ok(ll)
}

/// Score `Psi_k(theta)`: gradient of the log-likelihood divided by `k`.
pub fn score(path: &QueuePath, theta: &[f64], model: &Model<'_>) -> Result<DVector<f64>> {
    model.check_theta(theta)?;
    Ok(TransitionCounts::from_path(path).score(model, theta))
}

/// Per-transition score contribution `psi(q, y, theta)`; zero outside the
/// effective sample.
pub fn psi(model: &Model<'_>, q: u32, up: bool, theta: &[f64]) -> Result<DVector<f64>> {
    model.check_theta(theta)?;
    if !model.is_informative(q, theta) {
        return Ok(DVector::zeros(model.family.dim()));
    }
    let b = BernoulliTerms::new(model, q, theta, false);
    Ok(if up { b.psi_up() } else { b.psi_down() })
}

/// Observed information `-grad Psi_k(theta)`.
pub fn observed_information(
    path: &QueuePath,
    theta: &[f64],
    model: &Model<'_>,
) -> Result<DMatrix<f64>> {
    model.check_theta(theta)?;
    Ok(TransitionCounts::from_path(path).observed_information(model, theta))
}

/// Outer-product-of-scores information `(1/k) sum psi psi^T`; a cross-check
/// for [`observed_information`].
pub fn outer_product_information(
    path: &QueuePath,
    theta: &[f64],
    model: &Model<'_>,
) -> Result<DMatrix<f64>> {
    model.check_theta(theta)?;
    let n = model.family.dim();
    let mut acc = DMatrix::zeros(n, n);
    for t in path.transitions() {
        let g = psi(model, t.from, t.up, theta)?;
        acc += &g * g.transpose();
    }
    Ok(acc / path.steps().max(1) as f64)
}

/// Outcome of [`fit_mle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub loglik: f64,
    pub score_norm: f64,
    pub boundary: bool,
    pub effective_n: usize,
    pub total_k: usize,
    /// Observed information at the estimate.
    pub sigma_plugin: Vec<Vec<f64>>,
    /// `sqrt(diag(sigma_plugin^-1) / k)`; NaN when the information is
    /// singular.
    pub std_err: Vec<f64>,
}

impl FitResult {
    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        let n = self.theta_hat.len();
        DMatrix::from_fn(n, n, |i, j| self.sigma_plugin[i][j])
    }
}

/// Inverts a symmetric information matrix, failing unless it is positive
/// definite.
pub fn invert_information(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::InformationSingular);
    }
    let chol = sigma.clone().cholesky().ok_or(Error::InformationSingular)?;
    let inv = chol.inverse();
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::InformationSingular);
    }
    Ok(inv)
}

/// Maximum likelihood estimate of `theta` over the family's parameter box.
///
/// One parameter: grid scan of the log-likelihood, golden-section
/// refinement in the best bracket, then a safeguarded Newton polish on the
/// score. Several parameters: projected BFGS from the box centre (or `init`)
/// and four seeded interior starts, keeping the best.
pub fn fit_mle(path: &QueuePath, model: &Model<'_>, init: Option<&[f64]>) -> Result<FitResult> {
    fit_counts(&TransitionCounts::from_path(path), model, init)
}

/// [`fit_mle`] on pre-aggregated counts.
pub fn fit_counts(
    counts: &TransitionCounts,
    model: &Model<'_>,
    init: Option<&[f64]>,
) -> Result<FitResult> {
    let space = model.param_space();
    if let Some(t) = init {
        space.check(t)?;
    }
    let probe = init.map(<[f64]>::to_vec).unwrap_or_else(|| space.center());
    if counts.effective_n(model, &probe) == 0 {
        return Err(Error::NoInformativeTransitions);
    }
    let theta = if space.dim() == 1 {
        maximize_scalar(counts, model)
    } else {
        maximize_box(counts, model, &probe)
    };
    let k = counts.total();
    let loglik = counts.log_likelihood(model, &theta);
    let score = counts.score(model, &theta);
    let sigma = counts.observed_information(model, &theta);
    let std_err = match invert_information(&sigma) {
        Ok(inv) => inv.diagonal().iter().map(|v| (v / k as f64).sqrt()).collect(),
        Err(_) => vec![f64::NAN; theta.len()],
    };
    let n = theta.len();
    Ok(FitResult {
        boundary: space.near_boundary(&theta, BOUNDARY_REL_TOL),
        effective_n: counts.effective_n(model, &theta),
        total_k: k,
        score_norm: score.norm(),
        loglik,
        sigma_plugin: (0..n).map(|i| (0..n).map(|j| sigma[(i, j)]).collect()).collect(),
        std_err,
        theta_hat: theta,
    })
}

fn maximize_scalar(counts: &TransitionCounts, model: &Model<'_>) -> Vec<f64> {
    let space = model.param_space();
    let (lo, hi) = (space.lower()[0], space.upper()[0]);
    let f = |x: f64| counts.log_likelihood(model, &[x]);
    let points = grid(lo, hi, SCAN_POINTS, lo > 0.0 && hi / lo > 10.0);
    let values: Vec<f64> = points.iter().map(|x| f(*x)).collect();
    let best = (0..points.len()).fold(0, |b, i| if values[i] > values[b] { i } else { b });
    let mut a = points[best.saturating_sub(1)];
    let mut b = points[(best + 1).min(points.len() - 1)];
    let (mut x, mut fx) = golden_section_max(f, a, b, PARAM_TOL * (hi - lo), 300);
    if values[best] > fx {
        x = points[best];
        fx = values[best];
    }
    // ties with a bound go to the bound: a likelihood that is flat to
    // machine precision carries no evidence for an interior point
    for bound in [hi, lo] {
        let fb = f(bound);
        if fb >= fx {
            x = bound;
            fx = fb;
        }
    }
    let width = hi - lo;
    if (x - lo) <= BOUNDARY_REL_TOL * width || (hi - x) <= BOUNDARY_REL_TOL * width {
        return vec![x];
    }
    // Newton on the score, falling back to bisection of the bracket.
    for _ in 0..100 {
        let g = counts.score(model, &[x])[0];
        if g == 0.0 {
            break;
        }
        if g > 0.0 {
            a = a.max(x);
        } else {
            b = b.min(x);
        }
        let info = counts.observed_information(model, &[x])[(0, 0)];
        let newton = if info > 0.0 { x + g / info } else { f64::NAN };
        let candidate = if newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        let fc = f(candidate);
        let step = (candidate - x).abs();
        if fc >= fx - 1e-12 * fx.abs().max(1.0) {
            x = candidate;
            fx = fc;
        } else if g > 0.0 {
            b = candidate;
        } else {
            a = candidate;
        }
        if step <= PARAM_TOL * x.abs().max(1e-3) || b - a <= PARAM_TOL * x.abs().max(1e-3) {
            break;
        }
    }
    vec![x]
}

fn maximize_box(counts: &TransitionCounts, model: &Model<'_>, first: &[f64]) -> Vec<f64> {
    let space = model.param_space();
    let mut rng = rng_from_seed(0x0005_EED0_FF17 ^ counts.total() as u64);
    let mut starts = vec![first.to_vec()];
    while starts.len() < MULTI_STARTS {
        let s: Vec<f64> = (0..space.dim())
            .map(|j| {
                let u: f64 = rng.random_range(0.05..0.95);
                space.lower()[j] + u * space.width(j)
            })
            .collect();
        starts.push(s);
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts {
        let x = projected_bfgs(counts, model, s);
        let fx = counts.log_likelihood(model, &x);
        if best.as_ref().is_none_or(|(_, fb)| fx > *fb) {
            best = Some((x, fx));
        }
    }
    best.expect("at least one start").0
}

fn projected_bfgs(counts: &TransitionCounts, model: &Model<'_>, start: Vec<f64>) -> Vec<f64> {
    let space = model.param_space();
    let n = space.dim();
    let k = counts.total() as f64;
    let f = |x: &DVector<f64>| counts.log_likelihood(model, x.as_slice());
    let grad = |x: &DVector<f64>| counts.score(model, x.as_slice()) * k;
    let project = |x: &mut DVector<f64>| space.project(x.as_mut_slice());

    let mut x = DVector::from_vec(start);
    project(&mut x);
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let at_bound = |x: &DVector<f64>, g: &DVector<f64>, j: usize| {
        let tol = BOUNDARY_REL_TOL * space.width(j);
        (x[j] - space.lower()[j] <= tol && g[j] < 0.0) || (space.upper()[j] - x[j] <= tol && g[j] > 0.0)
    };

    for _ in 0..500 {
        let mut pg = g.clone();
        for j in 0..n {
            if at_bound(&x, &g, j) {
                pg[j] = 0.0;
            }
        }
        if pg.norm() <= 1e-10 * fx.abs().max(1.0) {
            break;
        }
        let mut d = &h * &pg;
        for j in 0..n {
            if at_bound(&x, &g, j) {
                d[j] = 0.0;
            }
        }
        if d.dot(&pg) <= 0.0 {
            h = DMatrix::identity(n, n);
            d = pg.clone();
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-20 {
            let mut trial = &x + &d * alpha;
            project(&mut trial);
            let ft = f(&trial);
            if ft.is_finite() && ft >= fx + 1e-4 * g.dot(&(&trial - &x)) {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let g_new = grad(&x_new);
        let s = &x_new - &x;
        let y = &g - &g_new;
        let sy = s.dot(&y);
        if sy > 1e-14 {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - &s * y.transpose() * rho;
            let right = &eye - &y * s.transpose() * rho;
            h = &left * &h * &right + &s * s.transpose() * rho;
        }
        let step = s.norm();
        x = x_new;
        fx = f_new;
        g = g_new;
        if step <= PARAM_TOL * x.norm().max(1e-3) {
            break;
        }
    }

    // Newton polish on the exact information when interior.
    if !space.near_boundary(x.as_slice(), BOUNDARY_REL_TOL) {
        for _ in 0..20 {
            let info = counts.observed_information(model, x.as_slice());
            let Ok(inv) = invert_information(&info) else { break };
            let step = inv * counts.score(model, x.as_slice());
            let mut trial = &x + &step;
            project(&mut trial);
            let ft = f(&trial);
            if !(ft >= fx - 1e-12 * fx.abs().max(1.0)) {
                break;
            }
            let moved = (&trial - &x).norm();
            x = trial;
            fx = ft;
            if moved <= PARAM_TOL * x.norm().max(1e-3) {
                break;
            }
        }
    }
    x.iter().copied().collect()
}

/// Wald intervals `theta_hat +/- z * std_err` at the given confidence level.
pub fn confidence_interval(fit: &FitResult, level: f64) -> Result<Vec<(f64, f64)>> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidArgument(format!("level must lie in [0, 1), got {level}")));
    }
    if fit.std_err.iter().any(|s| !s.is_finite()) {
        return Err(Error::InformationSingular);
    }
    invert_information(&fit.sigma_matrix())?;
    let z = if level == 0.0 {
        0.0
    } else {
        Normal::standard().inverse_cdf(0.5 * (1.0 + level))
    };
    Ok(fit
        .theta_hat
        .iter()
        .zip(&fit.std_err)
        .map(|(t, s)| (t - z * s, t + z * s))
        .collect())
}
