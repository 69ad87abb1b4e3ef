//! Attractor extraction and trend analytics on top of the Laplacian
//! posterior.
//!
//! Each test point's Laplacian distribution is scored against the prior by a
//! KL-type divergence; the scores are split by Laplacian sign into attractor
//! and repeller weights, whose weighted moments give the mean attractor, its
//! covariance ellipse, trend lines toward it, correction probabilities,
//! principal axes, and convergence windows.

pub mod evolution;

use crate::gp_field::FieldPosterior;
use crate::market_data::Trajectory;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AttractorError {
    #[error("variance must be strictly positive")]
    NonPositiveVariance,
    #[error("no attractor mass: every test point carries repeller sign")]
    NoAttractorMass,
    #[error("top two eigenvalues coincide; orientation is meaningless")]
    DegenerateSpectrum,
    #[error("unknown asset {0:?}")]
    UnknownAsset(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Divergence scores of the Laplacian posterior split by sign.
pub struct KLField {
    /// Q x M test states.
    pub points: DMatrix<f64>,
    /// Divergence of each point's Laplacian posterior from the prior.
    pub kl: DVector<f64>,
    /// Sign of the posterior Laplacian mean; exactly zero counts as +1.
    pub sign: Vec<i8>,
    /// kl where sign = +1, else 0 (attractor weight).
    pub k_a: DVector<f64>,
    /// kl where sign = -1, else 0 (repeller weight).
    pub k_r: DVector<f64>,
}

/// Weighted first and second moments of the attractor (and repeller, when
/// present) over one analysis window.
pub struct AttractorSummary {
    pub mu_a: DVector<f64>,
    pub sigma_a_mat: DMatrix<f64>,
    /// None when the window holds no repeller-sign mass.
    pub mu_r: Option<DVector<f64>>,
    pub sigma_r_mat: Option<DMatrix<f64>>,
    /// det(sigma_a_mat)^(1/2M): the covariance volume folded back to a
    /// distance, used as the convergence radius. Meaningful on normalized
    /// coordinates.
    pub sigma_a_scalar: f64,
    /// Eigenvalues of sigma_a_mat, descending, clamped at 0.
    pub eigvals: DVector<f64>,
    /// Matching eigenvectors as columns, each with its largest-magnitude
    /// entry made positive.
    pub eigvecs: DMatrix<f64>,
    /// (start, end) of the analysis window as unix seconds.
    pub window: (f64, f64),
}

/// Trend from an initial state toward the mean attractor.
pub struct TrendReport {
    pub x0: DVector<f64>,
    /// mu_a - x0 per asset, in reporting units.
    pub magnitude: DVector<f64>,
    /// Angle of the trend segment in the first-two-asset plane, degrees in
    /// [0, 360). Computed on shared-scale axes; a 1-D state degenerates to
    /// 0 or 180.
    pub direction_deg: f64,
    /// Per-asset probability that the corrected price ends above x0.
    pub p_pos: DVector<f64>,
    pub p_neg: DVector<f64>,
}

/// Principal component of the attractor covariance.
pub struct PrincipalAxes {
    pub eigval: f64,
    pub eigvec: DVector<f64>,
    /// (axis j, axis j', angle in degrees folded into [0, 180)) for every
    /// pair j < j'.
    pub phases_deg: Vec<(usize, usize, f64)>,
}

/// Time span during which the trajectory stays inside the convergence
/// radius around the mean attractor. Indices are inclusive sample positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceInterval {
    pub start_idx: usize,
    pub end_idx: usize,
    pub start_time: f64,
    pub end_time: f64,
}

pub struct ConvergenceReport {
    pub intervals: Vec<ConvergenceInterval>,
    /// Index into `intervals` of the longest one (earliest on ties).
    pub longest: Option<usize>,
}

/// Divergence of a Gaussian posterior N(mu_po, var_po) from the zero-mean
/// prior N(0, var_pr), floored at zero.
pub fn kl_divergence(mu_po: f64, var_po: f64, var_pr: f64) -> Result<f64, AttractorError> {
    if !(var_po > 0.0) || !(var_pr > 0.0) || !var_po.is_finite() || !var_pr.is_finite() {
        return Err(AttractorError::NonPositiveVariance);
    }
    if !mu_po.is_finite() {
        return Err(AttractorError::InvalidArgument("non-finite posterior mean".into()));
    }
    let log_std_ratio = 0.5 * (var_po / var_pr).ln();
    let raw = 0.5 * (var_pr / var_po + mu_po * mu_po / var_po - 1.0 + log_std_ratio);
    Ok(raw.max(0.0))
}

/// Scores every test point of a field posterior against the prior Laplacian
/// distribution N(0, prior_var) and splits the scores by Laplacian sign.
pub fn build_kl_field(field: &FieldPosterior, prior_var: f64) -> Result<KLField, AttractorError> {
    if !(prior_var > 0.0) || !prior_var.is_finite() {
        return Err(AttractorError::NonPositiveVariance);
    }
    let q = field.points.nrows();
    let mut kl = DVector::zeros(q);
    let mut sign = Vec::with_capacity(q);
    let mut k_a = DVector::zeros(q);
    let mut k_r = DVector::zeros(q);
    for i in 0..q {
        // Relative guard: keeps the score finite when a posterior variance
        // collapses to zero without flattening fields whose natural scale
        // is far below one.
        let var_po = field.lap_var[i].max(prior_var * 1e-12);
        let v = kl_divergence(field.lap_mean[i], var_po, prior_var)?;
        kl[i] = v;
        let s: i8 = if field.lap_mean[i] >= 0.0 { 1 } else { -1 };
        sign.push(s);
        if s > 0 {
            k_a[i] = v;
        } else {
            k_r[i] = v;
        }
    }
    Ok(KLField { points: field.points.clone(), kl, sign, k_a, k_r })
}

fn weighted_moments(points: &DMatrix<f64>, w: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let m = points.ncols();
    let mut mu = DVector::zeros(m);
    for i in 0..points.nrows() {
        for j in 0..m {
            mu[j] += w[i] * points[(i, j)];
        }
    }
    mu /= total;
    let mut cov = DMatrix::zeros(m, m);
    for i in 0..points.nrows() {
        for r in 0..m {
            let dr = points[(i, r)] - mu[r];
            for c in 0..m {
                cov[(r, c)] += w[i] * dr * (points[(i, c)] - mu[c]);
            }
        }
    }
    cov /= total;
    Some((mu, cov))
}

fn orient_columns(mut vecs: DMatrix<f64>) -> DMatrix<f64> {
    for c in 0..vecs.ncols() {
        let mut best = 0;
        for r in 1..vecs.nrows() {
            if vecs[(r, c)].abs() > vecs[(best, c)].abs() {
                best = r;
            }
        }
        if vecs[(best, c)] < 0.0 {
            for r in 0..vecs.nrows() {
                vecs[(r, c)] = -vecs[(r, c)];
            }
        }
    }
    vecs
}

/// Attractor (and repeller) moments of a scored field over one window.
pub fn attractor_moments(
    klf: &KLField,
    window: (f64, f64),
) -> Result<AttractorSummary, AttractorError> {
    let (mu_a, sigma_a_mat) =
        weighted_moments(&klf.points, &klf.k_a).ok_or(AttractorError::NoAttractorMass)?;
    let repeller = weighted_moments(&klf.points, &klf.k_r);
    let (mu_r, sigma_r_mat) = match repeller {
        Some((mu, cov)) => (Some(mu), Some(cov)),
        None => (None, None),
    };

    let m = mu_a.len();
    let sym = (&sigma_a_mat + sigma_a_mat.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigvals = DVector::from_fn(m, |k, _| eig.eigenvalues[order[k]].max(0.0));
    let eigvecs =
        orient_columns(DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]));
    let det: f64 = eigvals.iter().product();
    let sigma_a_scalar = det.powf(1.0 / (2.0 * m as f64));

    Ok(AttractorSummary {
        mu_a,
        sigma_a_mat,
        mu_r,
        sigma_r_mat,
        sigma_a_scalar,
        eigvals,
        eigvecs,
        window,
    })
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Trend from `x0` to the window's mean attractor. `axis_norm`, when given,
/// holds per-axis (min, max) used to put the first two assets on a shared
/// scale before measuring the direction angle; magnitudes and probabilities
/// always stay in the units of `summary` and `x0`.
pub fn trend_report(
    summary: &AttractorSummary,
    x0: &DVector<f64>,
    axis_norm: Option<&[(f64, f64)]>,
) -> Result<TrendReport, AttractorError> {
    let m = summary.mu_a.len();
    if x0.len() != m {
        return Err(AttractorError::InvalidArgument(format!(
            "x0 has {} entries, attractor has {m}",
            x0.len()
        )));
    }
    if let Some(norm) = axis_norm {
        if norm.len() != m {
            return Err(AttractorError::InvalidArgument(format!(
                "axis scaling has {} entries, attractor has {m}",
                norm.len()
            )));
        }
    }
    let magnitude = &summary.mu_a - x0;

    let scaled = |j: usize, v: f64| -> f64 {
        match axis_norm {
            Some(norm) => {
                let (lo, hi) = norm[j];
                let r = hi - lo;
                if r > 0.0 {
                    (v - lo) / r
                } else {
                    0.0
                }
            }
            None => v,
        }
    };
    let direction_deg = if m >= 2 {
        let dx = scaled(0, summary.mu_a[0]) - scaled(0, x0[0]);
        let dy = scaled(1, summary.mu_a[1]) - scaled(1, x0[1]);
        let deg = dy.atan2(dx).to_degrees();
        ((deg % 360.0) + 360.0) % 360.0
    } else if magnitude[0] >= 0.0 {
        0.0
    } else {
        180.0
    };

    let mut p_pos = DVector::zeros(m);
    for j in 0..m {
        let sd = summary.sigma_a_mat[(j, j)].max(0.0).sqrt();
        p_pos[j] = if sd > 0.0 {
            normal_cdf((summary.mu_a[j] - x0[j]) / sd)
        } else if summary.mu_a[j] > x0[j] {
            1.0
        } else if summary.mu_a[j] < x0[j] {
            0.0
        } else {
            0.5
        };
    }
    let p_neg = p_pos.map(|p| 1.0 - p);
    Ok(TrendReport { x0: x0.clone(), magnitude, direction_deg, p_pos, p_neg })
}

fn fold_deg_180(deg: f64) -> f64 {
    ((deg % 180.0) + 180.0) % 180.0
}

/// Largest principal axis of the attractor covariance with pairwise phase
/// angles. A one-dimensional summary has no pairs and returns empty phases.
pub fn principal_axes(summary: &AttractorSummary) -> Result<PrincipalAxes, AttractorError> {
    let m = summary.eigvals.len();
    if m >= 2 {
        let top = summary.eigvals[0];
        let second = summary.eigvals[1];
        let scale = top.abs().max(1e-300);
        if (top - second).abs() <= 1e-9 * scale {
            return Err(AttractorError::DegenerateSpectrum);
        }
    }
    let eigvec = DVector::from_fn(m, |r, _| summary.eigvecs[(r, 0)]);
    let mut phases = Vec::new();
    for j in 0..m {
        for jp in (j + 1)..m {
            let deg = eigvec[jp].atan2(eigvec[j]).to_degrees();
            phases.push((j, jp, fold_deg_180(deg)));
        }
    }
    Ok(PrincipalAxes { eigval: summary.eigvals[0], eigvec, phases_deg: phases })
}

/// Intervals during which the trajectory stays within the convergence
/// radius of the mean attractor. The trajectory must be expressed in the
/// same coordinates as the summary. Excursions of at most `grace_gap`
/// samples between neighbouring intervals are merged.
pub fn convergence_windows(
    traj: &Trajectory,
    summary: &AttractorSummary,
    grace_gap: usize,
) -> ConvergenceReport {
    assert_eq!(
        traj.m(),
        summary.mu_a.len(),
        "trajectory and summary dimensions differ"
    );
    let n = traj.n();
    let inside: Vec<bool> = (0..n)
        .map(|i| {
            let mut d2 = 0.0;
            for j in 0..traj.m() {
                let d = traj.states()[(i, j)] - summary.mu_a[j];
                d2 += d * d;
            }
            d2.sqrt() <= summary.sigma_a_scalar
        })
        .collect();

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (i, &ins) in inside.iter().enumerate() {
        match (ins, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, n - 1));
    }

    let mut merged: Vec<(usize, usize)> = Vec::new();
    for run in runs {
        match merged.last_mut() {
            Some(prev) if run.0 - prev.1 - 1 <= grace_gap => prev.1 = run.1,
            _ => merged.push(run),
        }
    }

    let intervals: Vec<ConvergenceInterval> = merged
        .into_iter()
        .map(|(s, e)| ConvergenceInterval {
            start_idx: s,
            end_idx: e,
            start_time: traj.timestamp(s),
            end_time: traj.timestamp(e),
        })
        .collect();
    let mut longest = None;
    for (i, iv) in intervals.iter().enumerate() {
        let len = iv.end_idx - iv.start_idx;
        let better = match longest {
            None => true,
            Some(l) => {
                let cur: &ConvergenceInterval = &intervals[l];
                len > cur.end_idx - cur.start_idx
            }
        };
        if better {
            longest = Some(i);
        }
    }
    ConvergenceReport { intervals, longest }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn field_with_laplacian(lap_mean: &[f64], lap_var: &[f64], m: usize) -> FieldPosterior {
        let q = lap_mean.len();
        FieldPosterior {
            points: DMatrix::from_fn(q, m, |i, j| (i * m + j) as f64),
            grad_mean: DMatrix::zeros(q, m),
            grad_var: DMatrix::zeros(q, m),
            jac_mean: vec![DMatrix::zeros(m, m); q],
            lap_mean: DVector::from_column_slice(lap_mean),
            lap_var: DVector::from_column_slice(lap_var),
            preclamp_min_var: 0.0,
            jac_asym_max: 0.0,
        }
    }

    #[test]
    fn divergence_of_identical_distributions_is_zero() {
        assert_eq!(kl_divergence(0.0, 1.3, 1.3).unwrap(), 0.0);
    }

    #[test]
    fn divergence_of_pure_mean_shift() {
        let mu = 0.7;
        let var = 2.3;
        let got = kl_divergence(mu, var, var).unwrap();
        assert_relative_eq!(got, mu * mu / (2.0 * var), epsilon = 1e-15);
    }

    #[test]
    fn divergence_of_halved_variance() {
        let got = kl_divergence(0.0, 0.5, 1.0).unwrap();
        let want = 0.5 * (2.0 - 1.0 + 0.5 * (0.5f64).ln());
        assert_relative_eq!(got, want, epsilon = 1e-12);
        assert!((0.32671..0.32672).contains(&got));
    }

    #[test]
    fn divergence_floors_at_zero_for_inflated_variance() {
        // Doubled posterior variance at zero mean makes the raw expression
        // negative; the score clamps to zero.
        assert_eq!(kl_divergence(0.0, 2.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn divergence_rejects_bad_variances() {
        assert!(kl_divergence(0.0, 0.0, 1.0).is_err());
        assert!(kl_divergence(0.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn field_scores_split_by_sign() {
        let field = field_with_laplacian(&[1.0, -3.0], &[0.5, 0.5], 2);
        let klf = build_kl_field(&field, 1.0).unwrap();
        assert_eq!(klf.sign, vec![1, -1]);
        let kl0 = kl_divergence(1.0, 0.5, 1.0).unwrap();
        let kl1 = kl_divergence(-3.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(klf.k_a[0], kl0, epsilon = 1e-15);
        assert_eq!(klf.k_a[1], 0.0);
        assert_eq!(klf.k_r[0], 0.0);
        assert_relative_eq!(klf.k_r[1], kl1, epsilon = 1e-15);
        for i in 0..2 {
            assert_eq!(klf.k_a[i] * klf.k_r[i], 0.0);
            assert_relative_eq!(klf.k_a[i] + klf.k_r[i], klf.kl[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_laplacian_counts_as_attractor() {
        let field = field_with_laplacian(&[0.0, 0.0], &[0.5, 0.5], 1);
        let klf = build_kl_field(&field, 1.0).unwrap();
        assert_eq!(klf.sign, vec![1, 1]);
        assert_eq!(klf.k_r.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn tiny_laplacian_variance_is_floored() {
        let field = field_with_laplacian(&[1.0], &[0.0], 1);
        let klf = build_kl_field(&field, 1.0).unwrap();
        assert!(klf.kl[0].is_finite());
    }

    #[test]
    fn field_scores_are_scale_invariant() {
        // Rescaling the observed field by c multiplies means by c and
        // variances by c^2; the divergence scores must not move, even at
        // scales far below one.
        let mu = [2.5e-8, -1.0e-8, 4.0e-9];
        let var = [3.0e-16, 8.0e-17, 1.5e-15];
        let small = field_with_laplacian(&mu, &var, 1);
        let c = 1.0e9;
        let mu_big: Vec<f64> = mu.iter().map(|v| v * c).collect();
        let var_big: Vec<f64> = var.iter().map(|v| v * c * c).collect();
        let big = field_with_laplacian(&mu_big, &var_big, 1);
        let prior = 2.0e-19;
        let klf_small = build_kl_field(&small, prior).unwrap();
        let klf_big = build_kl_field(&big, prior * c * c).unwrap();
        for i in 0..3 {
            assert_relative_eq!(klf_small.kl[i], klf_big.kl[i], max_relative = 1e-12);
            assert!(klf_small.kl[i] > 1.0, "score should see the mean shift");
        }
    }

    fn klf_from_parts(points: DMatrix<f64>, sign: Vec<i8>, kl: Vec<f64>) -> KLField {
        let q = kl.len();
        let kl = DVector::from_column_slice(&kl);
        let mut k_a = DVector::zeros(q);
        let mut k_r = DVector::zeros(q);
        for i in 0..q {
            if sign[i] > 0 {
                k_a[i] = kl[i];
            } else {
                k_r[i] = kl[i];
            }
        }
        KLField { points, kl, sign, k_a, k_r }
    }

    #[test]
    fn single_atom_moments() {
        let klf = klf_from_parts(DMatrix::from_row_slice(1, 2, &[3.0, -1.0]), vec![1], vec![2.0]);
        let s = attractor_moments(&klf, (0.0, 1.0)).unwrap();
        assert_eq!(s.mu_a[0], 3.0);
        assert_eq!(s.mu_a[1], -1.0);
        assert_eq!(s.sigma_a_mat, DMatrix::zeros(2, 2));
        assert_eq!(s.sigma_a_scalar, 0.0);
        assert!(s.mu_r.is_none());
    }

    #[test]
    fn symmetric_two_atom_moments() {
        let klf =
            klf_from_parts(DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]), vec![1, 1], vec![0.5, 0.5]);
        let s = attractor_moments(&klf, (0.0, 1.0)).unwrap();
        assert_relative_eq!(s.mu_a[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(s.sigma_a_mat[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(s.sigma_a_scalar, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn moments_match_brute_force_on_random_fields() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for case in 0..30 {
            let m = 1 + case % 3;
            let q = 2 + (rng.random::<u32>() as usize) % 19;
            let points = DMatrix::from_fn(q, m, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let mut sign = Vec::with_capacity(q);
            let mut kl = Vec::with_capacity(q);
            for _ in 0..q {
                sign.push(if rng.random::<bool>() { 1i8 } else { -1i8 });
                kl.push(rng.random::<f64>() + 1e-3);
            }
            if !sign.contains(&1) {
                sign[0] = 1;
            }
            let klf = klf_from_parts(points.clone(), sign.clone(), kl.clone());
            let s = attractor_moments(&klf, (0.0, 1.0)).unwrap();

            let wa: Vec<f64> = (0..q)
                .map(|i| if sign[i] > 0 { kl[i] } else { 0.0 })
                .collect();
            let wsum: f64 = wa.iter().sum();
            for j in 0..m {
                let mu: f64 =
                    (0..q).map(|i| wa[i] * points[(i, j)]).sum::<f64>() / wsum;
                assert_relative_eq!(s.mu_a[j], mu, epsilon = 1e-12, max_relative = 1e-12);
            }
            for r in 0..m {
                for c in 0..m {
                    let cov: f64 = (0..q)
                        .map(|i| {
                            wa[i] * (points[(i, r)] - s.mu_a[r]) * (points[(i, c)] - s.mu_a[c])
                        })
                        .sum::<f64>()
                        / wsum;
                    assert_relative_eq!(
                        s.sigma_a_mat[(r, c)],
                        cov,
                        epsilon = 1e-12,
                        max_relative = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn purely_repulsive_field_has_no_attractor() {
        let klf =
            klf_from_parts(DMatrix::from_row_slice(2, 1, &[0.0, 1.0]), vec![-1, -1], vec![1.0, 2.0]);
        assert!(matches!(
            attractor_moments(&klf, (0.0, 1.0)),
            Err(AttractorError::NoAttractorMass)
        ));
    }

    #[test]
    fn translation_moves_mean_and_preserves_shape() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let q = 12;
        let points = DMatrix::from_fn(q, 2, |_, _| rng.random::<f64>());
        let sign: Vec<i8> = (0..q).map(|i| if i % 3 == 0 { -1 } else { 1 }).collect();
        let kl: Vec<f64> = (0..q).map(|_| rng.random::<f64>() + 0.1).collect();
        let shift = [10.0, -4.0];
        let shifted = DMatrix::from_fn(q, 2, |i, j| points[(i, j)] + shift[j]);

        let a = attractor_moments(&klf_from_parts(points, sign.clone(), kl.clone()), (0.0, 1.0))
            .unwrap();
        let b = attractor_moments(&klf_from_parts(shifted, sign, kl), (0.0, 1.0)).unwrap();
        for j in 0..2 {
            assert_relative_eq!(b.mu_a[j], a.mu_a[j] + shift[j], epsilon = 1e-10);
            assert_relative_eq!(b.eigvals[j], a.eigvals[j], epsilon = 1e-10);
        }
        let x0a = DVector::from_column_slice(&[0.3, 0.4]);
        let x0b = DVector::from_column_slice(&[10.3, -3.6]);
        let ta = trend_report(&a, &x0a, None).unwrap();
        let tb = trend_report(&b, &x0b, None).unwrap();
        for j in 0..2 {
            assert_relative_eq!(ta.p_pos[j], tb.p_pos[j], epsilon = 1e-10);
        }
    }

    fn summary_with(mu: &[f64], cov: &[f64]) -> AttractorSummary {
        let m = mu.len();
        let mat = DMatrix::from_row_slice(m, m, cov);
        let eig = SymmetricEigen::new(mat.clone());
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigvals = DVector::from_fn(m, |k, _| eig.eigenvalues[order[k]].max(0.0));
        let eigvecs =
            orient_columns(DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]));
        let det: f64 = eigvals.iter().product();
        AttractorSummary {
            mu_a: DVector::from_column_slice(mu),
            sigma_a_mat: mat,
            mu_r: None,
            sigma_r_mat: None,
            sigma_a_scalar: det.powf(1.0 / (2.0 * m as f64)),
            eigvals,
            eigvecs,
            window: (0.0, 1.0),
        }
    }

    #[test]
    fn trend_at_the_mean_is_even_odds() {
        let s = summary_with(&[1.0, 2.0], &[0.25, 0.0, 0.0, 0.25]);
        let t = trend_report(&s, &DVector::from_column_slice(&[1.0, 2.0]), None).unwrap();
        for j in 0..2 {
            assert_relative_eq!(t.p_pos[j], 0.5, epsilon = 1e-12);
            assert_relative_eq!(t.p_pos[j] + t.p_neg[j], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn one_sigma_gap_gives_standard_normal_quantile() {
        let s = summary_with(&[1.5], &[0.25]);
        let t = trend_report(&s, &DVector::from_column_slice(&[1.0]), None).unwrap();
        assert_relative_eq!(t.p_pos[0], 0.8413447460685429, epsilon = 1e-12);
    }

    #[test]
    fn direction_angle_quadrants() {
        let cov = &[0.1, 0.0, 0.0, 0.1];
        let t = trend_report(
            &summary_with(&[0.0, 1.0], cov),
            &DVector::from_column_slice(&[1.0, 0.0]),
            None,
        )
        .unwrap();
        assert_relative_eq!(t.direction_deg, 135.0, epsilon = 1e-10);
        let t = trend_report(
            &summary_with(&[1.0, 0.0], cov),
            &DVector::from_column_slice(&[0.0, 0.0]),
            None,
        )
        .unwrap();
        assert_relative_eq!(t.direction_deg, 0.0, epsilon = 1e-10);
        let t = trend_report(
            &summary_with(&[0.0, -1.0], cov),
            &DVector::from_column_slice(&[0.0, 0.0]),
            None,
        )
        .unwrap();
        assert_relative_eq!(t.direction_deg, 270.0, epsilon = 1e-10);
    }

    #[test]
    fn direction_uses_shared_axis_scale() {
        // Axis 0 spans 100 units, axis 1 spans 1: equal normalized moves
        // land on the diagonal even though the raw deltas differ wildly.
        let s = summary_with(&[50.0, 0.5], &[1.0, 0.0, 0.0, 0.01]);
        let x0 = DVector::from_column_slice(&[0.0, 0.0]);
        let norm = [(0.0, 100.0), (0.0, 1.0)];
        let t = trend_report(&s, &x0, Some(&norm)).unwrap();
        assert_relative_eq!(t.direction_deg, 45.0, epsilon = 1e-10);
    }

    #[test]
    fn zero_variance_assets_get_degenerate_probabilities() {
        let s = summary_with(&[2.0, 1.0], &[0.0, 0.0, 0.0, 0.0]);
        let t = trend_report(&s, &DVector::from_column_slice(&[1.0, 1.0]), None).unwrap();
        assert_eq!(t.p_pos[0], 1.0);
        assert_eq!(t.p_pos[1], 0.5);
    }

    #[test]
    fn principal_axis_of_diagonal_covariance() {
        let s = summary_with(&[0.0, 0.0], &[4.0, 0.0, 0.0, 1.0]);
        let p = principal_axes(&s).unwrap();
        assert_relative_eq!(p.eigval, 4.0, epsilon = 1e-12);
        assert_relative_eq!(p.eigvec[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.eigvec[1], 0.0, epsilon = 1e-12);
        assert_eq!(p.phases_deg.len(), 1);
        assert_relative_eq!(p.phases_deg[0].2, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn isotropic_covariance_is_degenerate() {
        let s = summary_with(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(principal_axes(&s), Err(AttractorError::DegenerateSpectrum)));
    }

    #[test]
    fn one_dimensional_summary_has_no_phases() {
        let s = summary_with(&[3.0], &[0.5]);
        let p = principal_axes(&s).unwrap();
        assert!(p.phases_deg.is_empty());
        assert_relative_eq!(p.eigval, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn phase_folding_and_sign_conventions() {
        // Mixed-sign eigenvectors: the largest-magnitude entry is flipped
        // positive first, then the plane angle folds into [0, 180).
        let cases: [([f64; 2], f64); 3] = [
            ([0.956, 0.293], 17.04),
            ([0.099, -0.995], 95.68),
            ([-0.691, -0.723], 46.30),
        ];
        for (v, want) in cases {
            let vecs = orient_columns(DMatrix::from_column_slice(2, 1, &v));
            let deg = fold_deg_180(vecs[(1, 0)].atan2(vecs[(0, 0)]).to_degrees());
            assert!((deg - want).abs() <= 0.02, "vector {v:?}: {deg} vs {want}");
        }
    }

    fn straight_line_traj(points: &[f64]) -> Trajectory {
        let n = points.len();
        let states = DMatrix::from_fn(n, 1, |i, _| points[i]);
        Trajectory::new(states, 1.0, 0.0, vec!["a".into()], None).unwrap()
    }

    #[test]
    fn constant_trajectory_converges_for_the_whole_window() {
        let traj = straight_line_traj(&[2.0, 2.0, 2.0, 2.0]);
        let s = summary_with(&[2.0], &[0.0]);
        let rep = convergence_windows(&traj, &s, 0);
        assert_eq!(rep.intervals.len(), 1);
        assert_eq!(rep.intervals[0].start_idx, 0);
        assert_eq!(rep.intervals[0].end_idx, 3);
        assert_eq!(rep.longest, Some(0));
    }

    #[test]
    fn distant_trajectory_never_converges() {
        let traj = straight_line_traj(&[10.0, 11.0, 12.0]);
        let s = summary_with(&[0.0], &[0.01]);
        let rep = convergence_windows(&traj, &s, 0);
        assert!(rep.intervals.is_empty());
        assert_eq!(rep.longest, None);
    }

    #[test]
    fn grace_gap_merges_brief_excursions() {
        let traj = straight_line_traj(&[0.0, 0.0, 5.0, 0.0, 0.0, 5.0, 5.0, 0.0]);
        let s = summary_with(&[0.0], &[1.0]);
        let strict = convergence_windows(&traj, &s, 0);
        assert_eq!(strict.intervals.len(), 3);
        let merged = convergence_windows(&traj, &s, 1);
        assert_eq!(merged.intervals.len(), 2);
        assert_eq!((merged.intervals[0].start_idx, merged.intervals[0].end_idx), (0, 4));
        let all = convergence_windows(&traj, &s, 2);
        assert_eq!(all.intervals.len(), 1);
        assert_eq!((all.intervals[0].start_idx, all.intervals[0].end_idx), (0, 7));
    }

    #[test]
    fn larger_radius_never_shrinks_intervals() {
        let traj = straight_line_traj(&[0.0, 0.9, 1.8, 0.3, 2.5, 0.1]);
        let small = summary_with(&[0.0], &[1.0]);
        let mut big = summary_with(&[0.0], &[1.0]);
        big.sigma_a_scalar = 2.0;
        let a = convergence_windows(&traj, &small, 0);
        let b = convergence_windows(&traj, &big, 0);
        for iv in &a.intervals {
            assert!(
                b.intervals
                    .iter()
                    .any(|w| w.start_idx <= iv.start_idx && w.end_idx >= iv.end_idx),
                "interval {iv:?} lost after enlarging the radius"
            );
        }
    }
}
