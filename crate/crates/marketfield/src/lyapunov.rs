//! Largest-Lyapunov-exponent estimation from pairwise trajectory separations.
//!
//! Every pair of states closer than `epsilon` acts as a pair of nearby
//! starts; the log growth of their separation after k, 2k, ... steps is
//! averaged into one exponent per pair. A negative maximum over all pairs
//! means separations contract, i.e. the window is dynamically stable.

use crate::market_data::Trajectory;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LyapunovError {
    #[error("no state pairs within epsilon = {0}")]
    NoPairs(f64),
    #[error("trajectory has {n} samples, need more than k + 1 = {min}")]
    TooShort { n: usize, min: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy)]
pub struct LyapunovParams {
    pub epsilon: f64,
    pub k: usize,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct LyapunovResult {
    /// Per-pair averaged exponents, ascending.
    pub exponents: Vec<f64>,
    pub lambda_max: f64,
    /// Number of pairs that contributed an exponent.
    pub pair_count: usize,
    /// Pairs discarded for a zero initial or forward separation.
    pub skipped_zero: usize,
    pub params: LyapunovParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Stable => write!(f, "Stable"),
            Verdict::Unstable => write!(f, "Unstable"),
        }
    }
}

/// Stable iff the largest exponent is negative.
pub fn stability_verdict(result: &LyapunovResult) -> Verdict {
    if result.lambda_max < 0.0 {
        Verdict::Stable
    } else {
        Verdict::Unstable
    }
}

/// Estimates per-pair exponents over the trajectory.
///
/// For each pair (i, j), i < j, with ||x_i - x_j|| <= epsilon, the exponent
/// is the mean over p = 1..floor((N-j)/k) of
/// log(||x_{i+kp} - x_{j+kp}|| / ||x_i - x_j||) / (p k dt).
/// Pairs with a zero initial or forward separation, or with no forward
/// horizon at all, contribute nothing (the zero-separation ones are counted
/// in `skipped_zero`).
pub fn lyapunov_exponents(
    traj: &Trajectory,
    epsilon: f64,
    k: usize,
) -> Result<LyapunovResult, LyapunovError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(LyapunovError::InvalidArgument(format!("epsilon = {epsilon}")));
    }
    if k == 0 {
        return Err(LyapunovError::InvalidArgument("k must be at least 1".into()));
    }
    let n = traj.n();
    if n <= k + 1 {
        return Err(LyapunovError::TooShort { n, min: k + 1 });
    }
    let dt = traj.dt();
    let states = traj.states();
    let dist = |a: usize, b: usize| -> f64 {
        let mut s = 0.0;
        for c in 0..traj.m() {
            let d = states[(a, c)] - states[(b, c)];
            s += d * d;
        }
        s.sqrt()
    };

    // Outer index runs to N-k (1-based), per-i results are concatenated in
    // order so the output is independent of scheduling.
    let per_i: Vec<(Vec<f64>, usize)> = (0..n - k)
        .into_par_iter()
        .map(|i| {
            let mut exps = Vec::new();
            let mut skipped = 0usize;
            for j in i + 1..n {
                let d0 = dist(i, j);
                if d0 > epsilon {
                    continue;
                }
                if d0 == 0.0 {
                    skipped += 1;
                    continue;
                }
                let n_ij = (n - 1 - j) / k;
                if n_ij == 0 {
                    continue;
                }
                let mut sum = 0.0;
                let mut dead = false;
                for p in 1..=n_ij {
                    let dp = dist(i + k * p, j + k * p);
                    if dp == 0.0 {
                        dead = true;
                        break;
                    }
                    sum += (dp / d0).ln() / (p as f64 * k as f64 * dt);
                }
                if dead {
                    skipped += 1;
                    continue;
                }
                exps.push(sum / n_ij as f64);
            }
            (exps, skipped)
        })
        .collect();

    let mut exponents = Vec::new();
    let mut skipped_zero = 0;
    for (mut e, s) in per_i {
        exponents.append(&mut e);
        skipped_zero += s;
    }
    if exponents.is_empty() {
        return Err(LyapunovError::NoPairs(epsilon));
    }
    exponents.sort_by(f64::total_cmp);
    let lambda_max = *exponents.last().unwrap();
    Ok(LyapunovResult {
        pair_count: exponents.len(),
        lambda_max,
        exponents,
        skipped_zero,
        params: LyapunovParams { epsilon, k, dt },
    })
}

/// Percentile of the pairwise distance distribution, the default way to set
/// epsilon (percentile in [0, 100]). For very long trajectories a
/// deterministic subsample of pairs is used. Returns None when every
/// distance is zero.
pub fn default_epsilon(traj: &Trajectory, percentile: f64) -> Option<f64> {
    let n = traj.n();
    if n < 2 {
        return None;
    }
    let states = traj.states();
    let m = traj.m();
    let dist = |a: usize, b: usize| -> f64 {
        let mut s = 0.0;
        for c in 0..m {
            let d = states[(a, c)] - states[(b, c)];
            s += d * d;
        }
        s.sqrt()
    };
    // Cap the workload at ~2e6 pairs by striding the outer index.
    let total_pairs = n * (n - 1) / 2;
    let stride = (total_pairs / 2_000_000).max(1);
    let mut dists: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < n {
        for j in i + 1..n {
            dists.push(dist(i, j));
        }
        i += stride;
    }
    dists.sort_by(f64::total_cmp);
    let idx = ((percentile.clamp(0.0, 100.0) / 100.0) * (dists.len() - 1) as f64).round() as usize;
    let eps = dists[idx];
    if eps > 0.0 {
        Some(eps)
    } else {
        dists.last().copied().filter(|&d| d > 0.0)
    }
}

/// Default forward stride: about one hour of samples (k * dt ~ 3600 s),
/// never less than 1.
pub fn default_stride(dt: f64) -> usize {
    ((3600.0 / dt).round() as usize).max(1)
}
