#![allow(dead_code)]

use balkwise_core::{ExponentialFamily, Model, ModelConfig, ParamSpace, ValueFamily};
use nalgebra::{DMatrix, DVector};

/// `F(r) = 1 - exp(-a r - b r^2)`: a two-parameter family with closed-form
/// derivatives, to exercise the vector code paths.
#[derive(Debug)]
pub struct QuadExp {
    space: ParamSpace,
}

impl QuadExp {
    pub fn new(lower: [f64; 2], upper: [f64; 2]) -> Self {
        Self {
            space: ParamSpace::new(lower.to_vec(), upper.to_vec()).unwrap(),
        }
    }
}

impl ValueFamily for QuadExp {
    fn name(&self) -> &str {
        "quad-exp"
    }

    fn param_space(&self) -> &ParamSpace {
        &self.space
    }

    fn cdf(&self, r: f64, t: &[f64]) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        -(-t[0] * r - t[1] * r * r).exp_m1()
    }

    fn survival(&self, r: f64, t: &[f64]) -> f64 {
        if r <= 0.0 {
            return 1.0;
        }
        (-t[0] * r - t[1] * r * r).exp()
    }

    fn grad_cdf(&self, r: f64, t: &[f64]) -> DVector<f64> {
        if r <= 0.0 {
            return DVector::zeros(2);
        }
        let s = self.survival(r, t);
        DVector::from_vec(vec![r * s, r * r * s])
    }

    fn hess_cdf(&self, r: f64, t: &[f64]) -> DMatrix<f64> {
        if r <= 0.0 {
            return DMatrix::zeros(2, 2);
        }
        let s = self.survival(r, t);
        -DMatrix::from_row_slice(2, 2, &[r * r, r * r * r, r * r * r, r.powi(4)]) * s
    }
}

/// `R ~ U(0, theta)`: the CDF reaches 1, so high states balk fully.
#[derive(Debug)]
pub struct UniformFamily {
    space: ParamSpace,
}

impl UniformFamily {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self {
            space: ParamSpace::new(vec![lower], vec![upper]).unwrap(),
        }
    }
}

impl ValueFamily for UniformFamily {
    fn name(&self) -> &str {
        "uniform"
    }

    fn param_space(&self) -> &ParamSpace {
        &self.space
    }

    fn cdf(&self, r: f64, t: &[f64]) -> f64 {
        (r / t[0]).clamp(0.0, 1.0)
    }

    fn grad_cdf(&self, r: f64, t: &[f64]) -> DVector<f64> {
        let g = if r > 0.0 && r < t[0] { -r / (t[0] * t[0]) } else { 0.0 };
        DVector::from_element(1, g)
    }

    fn hess_cdf(&self, r: f64, t: &[f64]) -> DMatrix<f64> {
        let h = if r > 0.0 && r < t[0] { 2.0 * r / t[0].powi(3) } else { 0.0 };
        DMatrix::from_element(1, 1, h)
    }
}

pub fn exp_family() -> ExponentialFamily {
    ExponentialFamily::new(0.01, 5.0).unwrap()
}

/// `lambda = mu = C = 1`.
pub fn unit_model(fam: &dyn ValueFamily, price: f64) -> Model<'_> {
    Model::new(ModelConfig::new(1.0, 1.0, 1.0, price).unwrap(), fam)
}

/// Five-point central difference.
pub fn diff5(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(a.abs()).max(1e-12)
}
