//! Sample statistics for the experiment summaries.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::statistics::{Data, OrderStatistics, Statistics};

use crate::error::{CliError, Result};

/// 95% quantile of the chi-square distribution with two degrees of freedom.
pub const JB_CRITICAL_5PCT: f64 = 5.991_464_547_107_979;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().mean()
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    xs.iter().std_dev()
}

pub fn median(xs: &[f64]) -> f64 {
    Data::new(xs.to_vec()).median()
}

/// Sample skewness and kurtosis from central moments (population form,
/// as used by the Jarque-Bera statistic).
pub fn skew_kurtosis(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    (m3 / m2.powf(1.5), m4 / (m2 * m2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JarqueBera {
    pub statistic: f64,
    pub p_value: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    /// Normality rejected at the 5% level.
    pub reject: bool,
}

/// `JB = n/6 (S^2 + (K - 3)^2 / 4)`, asymptotically chi-square(2).
pub fn jarque_bera(xs: &[f64]) -> Result<JarqueBera> {
    if xs.len() < 20 {
        return Err(CliError::Config(format!(
            "jarque-bera needs at least 20 observations, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Config("jarque-bera sample contains non-finite values".into()));
    }
    let m = mean(xs);
    if xs.iter().all(|x| (x - m).abs() <= f64::EPSILON * m.abs().max(1.0)) {
        return Err(CliError::Config("jarque-bera sample has zero variance".into()));
    }
    let (s, k) = skew_kurtosis(xs);
    let statistic = xs.len() as f64 / 6.0 * (s * s + (k - 3.0).powi(2) / 4.0);
    let chi2 = ChiSquared::new(2.0).expect("two degrees of freedom");
    Ok(JarqueBera {
        statistic,
        p_value: chi2.sf(statistic),
        skewness: s,
        kurtosis: k,
        reject: statistic > JB_CRITICAL_5PCT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use balkwise_core::{derive_seed, rng_from_seed};
    use rand::Rng;
    use rand_distr::{Exp1, StandardNormal};

    #[test]
    fn critical_value_matches_chi_square() {
        let chi2 = ChiSquared::new(2.0).unwrap();
        assert!((chi2.inverse_cdf(0.95) - JB_CRITICAL_5PCT).abs() < 1e-9);
    }

    #[test]
    fn normal_samples_rarely_rejected() {
        let trials = 4000;
        let mut accepted = 0;
        for t in 0..trials {
            let mut rng = rng_from_seed(derive_seed(100, t));
            let xs: Vec<f64> = (0..5000).map(|_| rng.sample(StandardNormal)).collect();
            if !jarque_bera(&xs).unwrap().reject {
                accepted += 1;
            }
        }
        assert!(accepted as f64 / trials as f64 >= 0.94, "{accepted}");
    }

    #[test]
    fn exponential_samples_rejected() {
        let mut rng = rng_from_seed(5);
        let xs: Vec<f64> = (0..5000).map(|_| rng.sample(Exp1)).collect();
        let jb = jarque_bera(&xs).unwrap();
        assert!(jb.reject);
        assert!((jb.skewness - 2.0).abs() < 0.5);
    }

    #[test]
    fn degenerate_samples_error() {
        assert!(jarque_bera(&[3.0; 100]).is_err());
        assert!(jarque_bera(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn moments_of_a_small_sample() {
        let xs = [1.0, 2.0, 3.0, 4.0, 10.0];
        assert_eq!(mean(&xs), 4.0);
        assert_eq!(median(&xs), 3.0);
        let (s, k) = skew_kurtosis(&xs);
        // central moments: m2 = 50/5, m3 = 180/5, m4 = 1394/5
        assert!((s - 36.0 / 10f64.powf(1.5)).abs() < 1e-12);
        assert!((k - 278.8 / 100.0).abs() < 1e-12);
    }
}
