//! Synthetic trajectories from known potentials.
//!
//! Integrates x'' = -grad(phi)(x) - gamma x' + noise with fixed-step RK4 and
//! exposes the analytic gradient and energy, so every downstream estimator
//! can be checked against ground truth.

use crate::market_data::Trajectory;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("step size too large for the potential's curvature (dt * sqrt(max eig) = {0:.4}, limit 0.1)")]
    UnstableStep(f64),
}

/// The potential landscape driving the particle.
#[derive(Debug, Clone)]
pub enum Potential {
    /// phi(x) = 0.5 (x-c)^T A (x-c), A symmetric positive definite.
    Quadratic { center: DVector<f64>, curvature: DMatrix<f64> },
    /// phi(x) = h ((x/w)^2 - 1)^2, scalar double well with minima at +-w.
    DoubleWell { height: f64, half_width: f64 },
}

impl Potential {
    pub fn dim(&self) -> usize {
        match self {
            Potential::Quadratic { center, .. } => center.len(),
            Potential::DoubleWell { .. } => 1,
        }
    }

    /// Largest curvature scale, used by the step-size guard.
    fn max_curvature(&self) -> f64 {
        match self {
            Potential::Quadratic { curvature, .. } => curvature
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .fold(0.0f64, |a, &b| a.max(b)),
            // Curvature at the wells, phi''(+-w) = 8h/w^2.
            Potential::DoubleWell { height, half_width } => 8.0 * height / (half_width * half_width),
        }
    }
}

/// Full description of a synthetic run.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub potential: Potential,
    /// Viscous damping coefficient, >= 0.
    pub gamma: f64,
    /// Std of the per-step random acceleration, >= 0.
    pub noise_std: f64,
    pub x0: DVector<f64>,
    pub v0: DVector<f64>,
    pub dt: f64,
    pub steps: usize,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let m = self.potential.dim();
        if self.x0.len() != m || self.v0.len() != m {
            return Err(SynthError::InvalidSpec(format!(
                "x0/v0 length must match potential dimension {m}"
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SynthError::InvalidSpec(format!("dt = {}", self.dt)));
        }
        if self.steps < 3 {
            return Err(SynthError::InvalidSpec("need at least 3 steps".into()));
        }
        if self.gamma < 0.0 || !self.gamma.is_finite() {
            return Err(SynthError::InvalidSpec(format!("gamma = {}", self.gamma)));
        }
        if self.noise_std < 0.0 || !self.noise_std.is_finite() {
            return Err(SynthError::InvalidSpec(format!("noise_std = {}", self.noise_std)));
        }
        match &self.potential {
            Potential::Quadratic { center, curvature } => {
                if curvature.nrows() != center.len() || curvature.ncols() != center.len() {
                    return Err(SynthError::InvalidSpec("curvature shape mismatch".into()));
                }
                let asym = (curvature - curvature.transpose()).norm();
                if asym > 1e-9 * curvature.norm().max(1.0) {
                    return Err(SynthError::InvalidSpec("curvature matrix is not symmetric".into()));
                }
                if Cholesky::new(curvature.clone()).is_none() {
                    return Err(SynthError::InvalidSpec(
                        "curvature matrix is not positive definite".into(),
                    ));
                }
            }
            Potential::DoubleWell { height, half_width } => {
                if !(*height > 0.0) || !(*half_width > 0.0) {
                    return Err(SynthError::InvalidSpec(
                        "double well needs positive height and half-width".into(),
                    ));
                }
            }
        }
        let guard = self.dt * self.potential.max_curvature().sqrt();
        if !(guard < 0.1) {
            return Err(SynthError::UnstableStep(guard));
        }
        Ok(())
    }
}

/// Analytic gradient of the potential at `x`.
pub fn analytic_gradient(potential: &Potential, x: &DVector<f64>) -> DVector<f64> {
    match potential {
        Potential::Quadratic { center, curvature } => curvature * (x - center),
        Potential::DoubleWell { height, half_width } => {
            let w2 = half_width * half_width;
            let u = x[0] * x[0] / w2 - 1.0;
            DVector::from_element(1, 4.0 * height * x[0] * u / w2)
        }
    }
}

/// Potential energy phi(x).
pub fn potential_value(potential: &Potential, x: &DVector<f64>) -> f64 {
    match potential {
        Potential::Quadratic { center, curvature } => {
            let d = x - center;
            0.5 * (curvature * &d).dot(&d)
        }
        Potential::DoubleWell { height, half_width } => {
            let u = x[0] * x[0] / (half_width * half_width) - 1.0;
            height * u * u
        }
    }
}

/// Total mechanical energy phi(x) + |v|^2 / 2.
pub fn total_energy(potential: &Potential, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
    potential_value(potential, x) + 0.5 * v.norm_squared()
}

/// Integrates the spec and returns the positions as a [`Trajectory`]
/// (`steps` rows, the first being x0), with asset labels x1..xM.
pub fn simulate(spec: &SynthSpec, seed: u64) -> Result<Trajectory, SynthError> {
    let (states, _) = simulate_full(spec, seed)?;
    let m = spec.potential.dim();
    let labels = (1..=m).map(|i| format!("x{i}")).collect();
    Trajectory::new(states, spec.dt, 0.0, labels, None)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))
}

/// As [`simulate`] but also returns the velocity at every step, which the
/// energy checks need.
pub fn simulate_full(
    spec: &SynthSpec,
    seed: u64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), SynthError> {
    spec.validate()?;
    let m = spec.potential.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut x = spec.x0.clone();
    let mut v = spec.v0.clone();
    let mut xs = DMatrix::zeros(spec.steps, m);
    let mut vs = DMatrix::zeros(spec.steps, m);
    let dt = spec.dt;
    for i in 0..spec.steps {
        xs.row_mut(i).copy_from(&x.transpose());
        vs.row_mut(i).copy_from(&v.transpose());
        if i + 1 == spec.steps {
            break;
        }
        // One random acceleration per step, held constant across RK4 stages
        // so the step remains a deterministic function of (state, draw).
        let mut kick = DVector::zeros(m);
        if spec.noise_std > 0.0 {
            for k in 0..m {
                let z: f64 = rng.sample(StandardNormal);
                kick[k] = spec.noise_std * z;
            }
        }
        let accel = |x: &DVector<f64>, v: &DVector<f64>| -> DVector<f64> {
            -analytic_gradient(&spec.potential, x) - spec.gamma * v + &kick
        };
        let k1x = v.clone();
        let k1v = accel(&x, &v);
        let k2x = &v + &k1v * (dt / 2.0);
        let k2v = accel(&(&x + &k1x * (dt / 2.0)), &k2x);
        let k3x = &v + &k2v * (dt / 2.0);
        let k3v = accel(&(&x + &k2x * (dt / 2.0)), &k3x);
        let k4x = &v + &k3v * dt;
        let k4v = accel(&(&x + &k3x * dt), &k4x);
        x += (k1x + 2.0 * &k2x + 2.0 * &k3x + k4x) * (dt / 6.0);
        v += (k1v + 2.0 * &k2v + 2.0 * &k3v + k4v) * (dt / 6.0);
    }
    Ok((xs, vs))
}
