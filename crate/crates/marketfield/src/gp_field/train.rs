//! Hyperparameter training by maximizing the summed log marginal likelihood
//! of the M output columns under the shared kernel.
//!
//! The search is a bounded multi-start Nelder-Mead on the log-parameters
//! (log sigma_se, log lambda_1..M, log noise_var). Bounds scale with the
//! data: per-axis state ranges for the length-scales, the RMS of the
//! observations for the signal and noise levels. Every evaluation is folded
//! into a per-start running best, so the reported likelihood never falls
//! below the start's initial value; the winner across starts is the highest
//! likelihood, ties resolved to the lowest start index.

use super::{GpError, PotentialFieldModel, SEKernelParams};
use crate::market_data::GradientObservations;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct TrainOpts {
    /// Number of optimizer starts (start 0 is deterministic, the rest are
    /// seeded log-uniform draws within the bounds).
    pub starts: usize,
    pub seed: u64,
    /// Objective-evaluation budget per start.
    pub max_evals: usize,
    /// Half-width of the search box as a multiplier on the data scale;
    /// bounds are scale / factor .. scale * factor.
    pub bound_factor: f64,
}

impl Default for TrainOpts {
    fn default() -> Self {
        Self { starts: 8, seed: 0, max_evals: 200, bound_factor: 1e3 }
    }
}

/// Per-start optimization trace.
#[derive(Debug, Clone)]
pub struct StartReport {
    pub start: usize,
    /// Log marginal likelihood at the start's initial parameters.
    pub initial_lml: f64,
    /// Best log marginal likelihood the start reached.
    pub final_lml: f64,
}

/// Summed Gaussian log marginal likelihood of the output columns under one
/// kernel. None when the training matrix cannot be factorized or the value
/// is not finite.
pub fn log_marginal(params: &SEKernelParams, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Option<f64> {
    let n = x.nrows();
    let m = y.ncols();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = super::kernel_eval(
                params,
                x.row(i).transpose().as_slice(),
                x.row(j).transpose().as_slice(),
            );
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    for i in 0..n {
        c[(i, i)] += params.noise_var;
    }
    let chol = Cholesky::new(c)?;
    let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let alpha = chol.solve(y);
    let quad: f64 = (0..m).map(|c| y.column(c).dot(&alpha.column(c))).sum();
    let nm = (n * m) as f64;
    let lml = -0.5 * quad - 0.5 * (m as f64) * logdet - 0.5 * nm * std::f64::consts::TAU.ln();
    lml.is_finite().then_some(lml)
}

struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    fn clamp(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&t, (&lo, &hi))| t.clamp(lo, hi))
            .collect()
    }
}

fn data_scales(x: &DMatrix<f64>, y: &DMatrix<f64>) -> (Vec<f64>, f64) {
    let m = x.ncols();
    let mut rx = vec![1.0; m];
    for j in 0..m {
        let col = x.column(j);
        let mn = col.min();
        let mx = col.max();
        let r = mx - mn;
        if r.is_finite() && r > 0.0 {
            rx[j] = r;
        }
    }
    let ms = y.iter().map(|v| v * v).sum::<f64>() / (y.len() as f64).max(1.0);
    let sy = ms.sqrt();
    let sy = if sy.is_finite() && sy > 0.0 { sy } else { 1.0 };
    (rx, sy)
}

fn bounds_for(rx: &[f64], sy: f64, factor: f64) -> Bounds {
    let lf = factor.ln();
    let mut lo = Vec::with_capacity(rx.len() + 2);
    let mut hi = Vec::with_capacity(rx.len() + 2);
    lo.push(sy.ln() - lf);
    hi.push(sy.ln() + lf);
    for &r in rx {
        let c = (r * r).ln();
        lo.push(c - lf);
        hi.push(c + lf);
    }
    lo.push(2.0 * sy.ln() - lf);
    hi.push(2.0 * sy.ln() + lf);
    Bounds { lo, hi }
}

fn params_from_theta(theta: &[f64], m: usize) -> SEKernelParams {
    SEKernelParams {
        sigma_se: theta[0].exp(),
        lambdas: DVector::from_fn(m, |j, _| theta[1 + j].exp()),
        noise_var: theta[m + 1].exp(),
    }
}

struct Evaluator<'a> {
    bounds: &'a Bounds,
    x: &'a DMatrix<f64>,
    y: &'a DMatrix<f64>,
    evals: usize,
    best_f: f64,
    best_theta: Vec<f64>,
}

impl Evaluator<'_> {
    /// Negated log marginal likelihood at the clamped point; +inf when the
    /// likelihood is unavailable. Tracks the running best.
    fn eval(&mut self, theta: &[f64]) -> f64 {
        let th = self.bounds.clamp(theta);
        let params = params_from_theta(&th, self.x.ncols());
        let f = match log_marginal(&params, self.x, self.y) {
            Some(lml) => -lml,
            None => f64::INFINITY,
        };
        self.evals += 1;
        if f < self.best_f {
            self.best_f = f;
            self.best_theta = th;
        }
        f
    }
}

fn nelder_mead(ev: &mut Evaluator, theta0: &[f64], max_evals: usize) -> f64 {
    let d = theta0.len();
    let f0 = ev.eval(theta0);
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(d + 1);
    simplex.push((f0, theta0.to_vec()));
    for k in 0..d {
        let mut t = theta0.to_vec();
        t[k] += 0.4;
        let f = ev.eval(&t);
        simplex.push((f, t));
    }
    while ev.evals < max_evals {
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        let fb = simplex[0].0;
        let fw = simplex[d].0;
        if (fw - fb).abs() <= 1e-10 * (1.0 + fb.abs()) {
            break;
        }
        let mut centroid = vec![0.0; d];
        for v in &simplex[..d] {
            for k in 0..d {
                centroid[k] += v.1[k] / d as f64;
            }
        }
        let worst = simplex[d].1.clone();
        let refl: Vec<f64> = (0..d).map(|k| 2.0 * centroid[k] - worst[k]).collect();
        let fr = ev.eval(&refl);
        if fr < simplex[0].0 {
            let exp: Vec<f64> = (0..d).map(|k| 3.0 * centroid[k] - 2.0 * worst[k]).collect();
            let fe = ev.eval(&exp);
            simplex[d] = if fe < fr { (fe, exp) } else { (fr, refl) };
        } else if fr < simplex[d - 1].0 {
            simplex[d] = (fr, refl);
        } else {
            let (fc, con) = if fr < simplex[d].0 {
                let c: Vec<f64> =
                    (0..d).map(|k| centroid[k] + 0.5 * (refl[k] - centroid[k])).collect();
                (ev.eval(&c), c)
            } else {
                let c: Vec<f64> =
                    (0..d).map(|k| centroid[k] + 0.5 * (worst[k] - centroid[k])).collect();
                (ev.eval(&c), c)
            };
            if fc < simplex[d].0.min(fr) {
                simplex[d] = (fc, con);
            } else {
                let best = simplex[0].1.clone();
                for v in simplex.iter_mut().skip(1) {
                    for k in 0..d {
                        v.1[k] = best[k] + 0.5 * (v.1[k] - best[k]);
                    }
                    v.0 = ev.eval(&v.1.clone());
                }
            }
        }
    }
    f0
}

fn start_theta(
    start: usize,
    seed: u64,
    bounds: &Bounds,
    rx: &[f64],
    sy: f64,
    noise_hint: f64,
) -> Vec<f64> {
    let d = bounds.lo.len();
    let m = d - 2;
    if start == 0 {
        let mut t = Vec::with_capacity(d);
        t.push(sy.ln());
        for &r in rx {
            t.push((0.3 * r).powi(2).ln());
        }
        let nh = if noise_hint.is_finite() && noise_hint > 0.0 {
            noise_hint
        } else {
            1e-2 * sy * sy
        };
        t.push(nh.ln());
        let _ = m;
        return bounds.clamp(&t);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(
        seed.wrapping_add((start as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
    );
    (0..d)
        .map(|k| bounds.lo[k] + rng.random::<f64>() * (bounds.hi[k] - bounds.lo[k]))
        .collect()
}

/// Trains the field model on gradient observations. See `train_with_report`
/// for the per-start trace.
pub fn train(obs: &GradientObservations, opts: &TrainOpts) -> Result<PotentialFieldModel, GpError> {
    train_with_report(obs, opts).map(|(model, _)| model)
}

/// Trains the field model and reports each start's initial and best log
/// marginal likelihood.
pub fn train_with_report(
    obs: &GradientObservations,
    opts: &TrainOpts,
) -> Result<(PotentialFieldModel, Vec<StartReport>), GpError> {
    let x = &obs.x;
    let y = &obs.y;
    let n = x.nrows();
    if n < 2 {
        return Err(GpError::TooFewObservations { n, min: 2 });
    }
    if x.ncols() == 0 || x.ncols() != y.ncols() || y.nrows() != n {
        return Err(GpError::DimensionMismatch(format!(
            "states {}x{}, observations {}x{}",
            n,
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(GpError::NonFinite("training data".into()));
    }
    if opts.starts == 0 || opts.max_evals == 0 || !(opts.bound_factor > 1.0) {
        return Err(GpError::InvalidParams("optimizer settings".into()));
    }

    let (rx, sy) = data_scales(x, y);
    let bounds = bounds_for(&rx, sy, opts.bound_factor);

    struct StartOutcome {
        report: StartReport,
        best_f: f64,
        best_theta: Vec<f64>,
    }

    let outcomes: Vec<StartOutcome> = (0..opts.starts)
        .into_par_iter()
        .map(|s| {
            let theta0 = start_theta(s, opts.seed, &bounds, &rx, sy, obs.noise_hint);
            let mut ev = Evaluator {
                bounds: &bounds,
                x,
                y,
                evals: 0,
                best_f: f64::INFINITY,
                best_theta: theta0.clone(),
            };
            let f0 = nelder_mead(&mut ev, &theta0, opts.max_evals);
            StartOutcome {
                report: StartReport { start: s, initial_lml: -f0, final_lml: -ev.best_f },
                best_f: ev.best_f,
                best_theta: ev.best_theta,
            }
        })
        .collect();

    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.best_f < outcomes[best].best_f {
            best = i;
        }
    }
    if !outcomes[best].best_f.is_finite() {
        return Err(GpError::NonFinite("log marginal likelihood".into()));
    }
    let params = params_from_theta(&outcomes[best].best_theta, x.ncols());
    let model = PotentialFieldModel::with_params(params, x.clone(), y.clone())?;
    let reports = outcomes.into_iter().map(|o| o.report).collect();
    Ok((model, reports))
}
