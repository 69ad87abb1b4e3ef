//! Gaussian-process inference of the potential-gradient field and its
//! derivatives.
//!
//! The M force components are modelled as independent GP outputs sharing one
//! anisotropic SE kernel. Besides the usual predictive mean/variance, the
//! posterior of the field's Jacobian is available in closed form through the
//! kernel derivatives, and its trace gives the Laplacian of the underlying
//! potential - the quantity the attractor stage scores.

mod grid;
mod kernel;
mod train;

pub use grid::{test_grid, GridSettings};
pub use kernel::{kernel_eval, kernel_grad, kernel_hess, SEKernelParams};
pub use train::{train, train_with_report, StartReport, TrainOpts};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("kernel matrix is singular even after jitter escalation")]
    SingularKernel,
    #[error("non-finite value encountered ({0})")]
    NonFinite(String),
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),
    #[error("{n} observations, need at least {min}")]
    TooFewObservations { n: usize, min: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Trained gradient-field model: kernel hyperparameters plus the factorized
/// training system.
pub struct PotentialFieldModel {
    params: SEKernelParams,
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    /// (K + noise I + jitter I)^-1 Y, one column per output.
    alpha: DMatrix<f64>,
    /// Diagonal inflation that was needed to factorize, 0 when none.
    jitter: f64,
}

/// Posterior of the field and its derivatives on a set of test points.
pub struct FieldPosterior {
    /// Q x M test points.
    pub points: DMatrix<f64>,
    /// Posterior mean of the gradient field, Q x M.
    pub grad_mean: DMatrix<f64>,
    /// Predictive variance (including observation noise), Q x M. The
    /// columns coincide because the outputs share one kernel.
    pub grad_var: DMatrix<f64>,
    /// Posterior mean Jacobian of the field at each point; entry (d, e) is
    /// the derivative of component d along axis e.
    pub jac_mean: Vec<DMatrix<f64>>,
    /// trace(jac_mean), the Laplacian of the potential, per point.
    pub lap_mean: DVector<f64>,
    /// Variance of the Laplacian per point (independent-output sum).
    pub lap_var: DVector<f64>,
    /// Most negative raw variance seen before clamping (0 when none went
    /// negative); stays at roundoff scale for well-conditioned systems.
    pub preclamp_min_var: f64,
    /// Largest Frobenius norm of jac_mean - jac_mean^T over the points. The
    /// exact Jacobian of a gradient field is symmetric, so this measures how
    /// far the inferred field is from one.
    pub jac_asym_max: f64,
}

impl PotentialFieldModel {
    /// Builds a model from fixed hyperparameters and training data,
    /// factorizing K + noise I (+ escalating jitter if needed).
    pub fn with_params(
        params: SEKernelParams,
        x: DMatrix<f64>,
        y: DMatrix<f64>,
    ) -> Result<Self, GpError> {
        params.validate()?;
        if x.nrows() != y.nrows() {
            return Err(GpError::DimensionMismatch(format!(
                "{} states vs {} observations",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.ncols() != params.dim() || (y.ncols() != x.ncols() && x.nrows() > 0) {
            return Err(GpError::DimensionMismatch(format!(
                "kernel dim {} vs data dims {}x{}",
                params.dim(),
                x.ncols(),
                y.ncols()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite("training data".into()));
        }
        if x.nrows() == 0 {
            let alpha = DMatrix::zeros(0, y.ncols().max(params.dim()));
            return Ok(Self { params, x, y, chol: None, alpha, jitter: 0.0 });
        }
        let n = x.nrows();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = kernel_eval(
                    &params,
                    x.row(i).transpose().as_slice(),
                    x.row(j).transpose().as_slice(),
                );
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        // Base jitter 1e-9 * mean diagonal (= sigma_se^2 for this kernel),
        // escalated tenfold up to 1e-3 before giving up.
        let scale = k.trace() / n as f64;
        let mut chol = None;
        let mut jitter = 0.0;
        let mut factor = 1e-9;
        while factor <= 1.001e-3 {
            jitter = factor * scale;
            let mut c = k.clone();
            for i in 0..n {
                c[(i, i)] += params.noise_var + jitter;
            }
            if let Some(f) = Cholesky::new(c) {
                chol = Some(f);
                break;
            }
            factor *= 10.0;
        }
        let Some(chol) = chol else {
            return Err(GpError::SingularKernel);
        };
        let alpha = chol.solve(&y);
        Ok(Self { params, x, y, chol: Some(chol), alpha, jitter })
    }

    pub fn params(&self) -> &SEKernelParams {
        &self.params
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn n_obs(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// L L^T of the factorized training system, for reconstruction checks.
    pub fn chol_l(&self) -> Option<DMatrix<f64>> {
        self.chol.as_ref().map(|c| c.l())
    }

    fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.chol {
            Some(c) => c.solve(rhs),
            None => DMatrix::zeros(rhs.nrows(), rhs.ncols()),
        }
    }

    /// Cross-covariance vector k(x_n, q) for all training rows.
    fn kvec(&self, q: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.n_obs(), |n, _| {
            kernel_eval(&self.params, self.x.row(n).transpose().as_slice(), q)
        })
    }

    /// Derivative cross-covariance d k(x_n, q) / d q, one row per training
    /// point (N x M). Built from the kernel gradient in its second argument.
    fn gmat(&self, q: &[f64]) -> DMatrix<f64> {
        let m = self.dim();
        let mut g = DMatrix::zeros(self.n_obs(), m);
        for n in 0..self.n_obs() {
            let row = kernel_grad(&self.params, self.x.row(n).transpose().as_slice(), q);
            for d in 0..m {
                g[(n, d)] = row[d];
            }
        }
        g
    }
}

/// Predictive mean and variance of the gradient field at `points` (Q x M).
pub fn posterior_gradient(
    model: &PotentialFieldModel,
    points: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>), GpError> {
    check_points(model, points)?;
    let q = points.nrows();
    let m = model.dim();
    let s2 = model.params.sigma_se * model.params.sigma_se;
    let rows: Vec<(Vec<f64>, f64)> = (0..q)
        .into_par_iter()
        .map(|i| {
            let pt = points.row(i).transpose();
            let kv = model.kvec(pt.as_slice());
            let mean: Vec<f64> = (0..m).map(|c| kv.dot(&model.alpha.column(c))).collect();
            let w = model.solve(&DMatrix::from_column_slice(kv.len(), 1, kv.as_slice()));
            let var = (s2 + model.params.noise_var - kv.dot(&w.column(0))).max(0.0);
            (mean, var)
        })
        .collect();
    let mut mean = DMatrix::zeros(q, m);
    let mut var = DMatrix::zeros(q, m);
    for (i, (mu, v)) in rows.into_iter().enumerate() {
        for c in 0..m {
            mean[(i, c)] = mu[c];
            var[(i, c)] = v;
        }
    }
    Ok((mean, var))
}

/// Full derivative posterior: field mean/variance, Jacobian mean, Laplacian
/// mean and variance at every test point.
pub fn posterior_field(
    model: &PotentialFieldModel,
    points: &DMatrix<f64>,
) -> Result<FieldPosterior, GpError> {
    check_points(model, points)?;
    let q = points.nrows();
    let m = model.dim();
    let p = &model.params;
    let s2 = p.sigma_se * p.sigma_se;
    // Prior covariance of the field derivative at a point: the mixed kernel
    // derivative at zero separation, sigma_se^2 diag(1/lambda).
    let prior_jj: Vec<f64> = (0..m).map(|d| s2 / p.lambdas[d]).collect();

    struct Row {
        mean: Vec<f64>,
        var: f64,
        jac: DMatrix<f64>,
        lap_var: f64,
        preclamp_min: f64,
        asym: f64,
    }

    let rows: Vec<Row> = (0..q)
        .into_par_iter()
        .map(|i| {
            let pt = points.row(i).transpose();
            let pts = pt.as_slice();
            let kv = model.kvec(pts);
            let mean: Vec<f64> = (0..m).map(|c| kv.dot(&model.alpha.column(c))).collect();
            let w = model.solve(&DMatrix::from_column_slice(kv.len(), 1, kv.as_slice()));
            let raw_var = s2 + p.noise_var - kv.dot(&w.column(0));
            let mut preclamp_min = raw_var.min(0.0);
            let var = raw_var.max(0.0);

            // Jacobian mean: J[d][e] = sum_n dk(x_n, q)/dq_e alpha[n][d].
            let g = model.gmat(pts);
            let jac = model.alpha.transpose() * &g;
            let asym = (&jac - jac.transpose()).norm();

            // Laplacian variance: sum over axes of the derivative variance,
            // each diag(prior) - g_d^T C^-1 g_d.
            let wg = model.solve(&g);
            let mut lap_var = 0.0;
            for d in 0..m {
                let raw = prior_jj[d] - g.column(d).dot(&wg.column(d));
                preclamp_min = preclamp_min.min(raw);
                lap_var += raw.max(0.0);
            }
            Row { mean, var, jac, lap_var, preclamp_min, asym }
        })
        .collect();

    let mut grad_mean = DMatrix::zeros(q, m);
    let mut grad_var = DMatrix::zeros(q, m);
    let mut jac_mean = Vec::with_capacity(q);
    let mut lap_mean = DVector::zeros(q);
    let mut lap_var = DVector::zeros(q);
    let mut preclamp_min_var = 0.0f64;
    let mut jac_asym_max = 0.0f64;
    for (i, row) in rows.into_iter().enumerate() {
        for c in 0..m {
            grad_mean[(i, c)] = row.mean[c];
            grad_var[(i, c)] = row.var;
        }
        lap_mean[i] = row.jac.trace();
        lap_var[i] = row.lap_var;
        preclamp_min_var = preclamp_min_var.min(row.preclamp_min);
        jac_asym_max = jac_asym_max.max(row.asym);
        jac_mean.push(row.jac);
    }
    Ok(FieldPosterior {
        points: points.clone(),
        grad_mean,
        grad_var,
        jac_mean,
        lap_mean,
        lap_var,
        preclamp_min_var,
        jac_asym_max,
    })
}

fn check_points(model: &PotentialFieldModel, points: &DMatrix<f64>) -> Result<(), GpError> {
    if points.ncols() != model.dim() {
        return Err(GpError::DimensionMismatch(format!(
            "test points have {} columns, model dimension is {}",
            points.ncols(),
            model.dim()
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(GpError::NonFinite("test points".into()));
    }
    Ok(())
}
