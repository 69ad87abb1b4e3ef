//! Anisotropic squared-exponential kernel and its closed-form derivatives.

use super::GpError;
use nalgebra::{DMatrix, DVector};

/// Hyperparameters of the SE kernel
/// k(x, x') = sigma_se^2 * exp(-0.5 (x-x')^T diag(lambdas)^-1 (x-x'))
/// plus the observation-noise variance. `lambdas[d]` is the diagonal entry
/// of the scale matrix, i.e. the squared length-scale of dimension d.
#[derive(Debug, Clone, PartialEq)]
pub struct SEKernelParams {
    pub sigma_se: f64,
    pub lambdas: DVector<f64>,
    pub noise_var: f64,
}

impl SEKernelParams {
    pub fn validate(&self) -> Result<(), GpError> {
        let ok = self.sigma_se.is_finite()
            && self.sigma_se > 0.0
            && self.noise_var.is_finite()
            && self.noise_var > 0.0
            && !self.lambdas.is_empty()
            && self.lambdas.iter().all(|&l| l.is_finite() && l > 0.0);
        if ok {
            Ok(())
        } else {
            Err(GpError::InvalidParams(format!("{self:?}")))
        }
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }
}

/// Kernel value k(a, b).
pub fn kernel_eval(p: &SEKernelParams, a: &[f64], b: &[f64]) -> f64 {
    let mut q = 0.0;
    for d in 0..a.len() {
        let u = a[d] - b[d];
        q += u * u / p.lambdas[d];
    }
    p.sigma_se * p.sigma_se * (-0.5 * q).exp()
}

/// Gradient of the kernel with respect to its second argument:
/// d k(a, b) / d b = diag(lambdas)^-1 (a - b) k(a, b).
/// (The gradient with respect to the first argument is its negation.)
pub fn kernel_grad(p: &SEKernelParams, a: &[f64], b: &[f64]) -> DVector<f64> {
    let k = kernel_eval(p, a, b);
    DVector::from_fn(a.len(), |d, _| (a[d] - b[d]) / p.lambdas[d] * k)
}

/// Second derivative of the kernel in its first argument:
/// d^2 k(a, b) / da da = diag(lambdas)^-1 ((a-b)(a-b)^T diag(lambdas)^-1 - I) k(a, b).
/// By symmetry this also equals the second derivative in the second argument.
pub fn kernel_hess(p: &SEKernelParams, a: &[f64], b: &[f64]) -> DMatrix<f64> {
    let m = a.len();
    let k = kernel_eval(p, a, b);
    let mut h = DMatrix::zeros(m, m);
    for r in 0..m {
        let ur = (a[r] - b[r]) / p.lambdas[r];
        for c in 0..m {
            let uc = (a[c] - b[c]) / p.lambdas[c];
            let delta = if r == c { 1.0 / p.lambdas[r] } else { 0.0 };
            h[(r, c)] = (ur * uc - delta) * k;
        }
    }
    h
}
