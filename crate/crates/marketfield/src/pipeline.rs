//! End-to-end analysis of one observation window: normalization, gradient
//! observations, model training, field posterior on a test grid, divergence
//! weighting, and every derived report.
//!
//! Analytics that depend on the coordinate scale (covariance eigenstructure,
//! phase angles, the convergence radius, trend direction) are computed on
//! the analysis coordinates - min-max normalized by default - while means,
//! magnitudes, and per-asset deviations are folded back to reporting units.

use crate::attractor::{
    attractor_moments, build_kl_field, convergence_windows, principal_axes, trend_report,
    AttractorError, AttractorSummary, ConvergenceReport, KLField, PrincipalAxes, TrendReport,
};
use crate::gp_field::{
    posterior_field, test_grid, train_with_report, FieldPosterior, GpError, GridSettings,
    PotentialFieldModel, StartReport, TrainOpts,
};
use crate::market_data::{
    estimate_gradient_observations, normalize_minmax, MarketDataError, Trajectory,
};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] MarketDataError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Attractor(#[from] AttractorError),
}

impl PipelineError {
    /// Whether the failure is numerical (a model that could not be fit or
    /// scored) rather than a data or configuration problem.
    pub fn is_numerical(&self) -> bool {
        match self {
            PipelineError::Data(_) => false,
            PipelineError::Gp(e) => !matches!(
                e,
                GpError::TooFewObservations { .. } | GpError::DimensionMismatch(_)
            ),
            PipelineError::Attractor(e) => !matches!(e, AttractorError::UnknownAsset(_)),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineSettings {
    /// Min-max normalize each asset before inference (reports are folded
    /// back to input units either way).
    pub normalize: Normalization,
    pub train: TrainOpts,
    pub grid: GridSettings,
    /// Convergence-interval merge tolerance, samples.
    pub grace_gap: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Normalization {
    #[default]
    MinMax,
    Raw,
}

/// Everything the pipeline derives for one window.
pub struct WindowAnalysis {
    /// Trajectory in analysis coordinates.
    pub traj: Trajectory,
    pub model: PotentialFieldModel,
    pub train_reports: Vec<StartReport>,
    pub field: FieldPosterior,
    pub klf: KLField,
    /// Moments in analysis coordinates; shape analytics live here.
    pub summary: AttractorSummary,
    /// Moments folded back to reporting units (equal to `summary` when the
    /// window was analyzed raw).
    pub summary_report: AttractorSummary,
    pub trend: TrendReport,
    /// None when the covariance spectrum is too degenerate to orient.
    pub axes: Option<PrincipalAxes>,
    pub convergence: ConvergenceReport,
}

fn denorm_points(points: &DMatrix<f64>, norm: &[(f64, f64)]) -> DMatrix<f64> {
    DMatrix::from_fn(points.nrows(), points.ncols(), |i, j| {
        let (lo, hi) = norm[j];
        lo + points[(i, j)] * (hi - lo)
    })
}

fn column_minmax(traj: &Trajectory) -> Vec<(f64, f64)> {
    (0..traj.m())
        .map(|j| {
            let col = traj.states().column(j);
            (col.min(), col.max())
        })
        .collect()
}

/// Runs the full single-window analysis. The input trajectory is expected
/// in reporting units (already-normalized input with stored scaling is also
/// accepted and used as-is).
pub fn analyze_window(
    traj: &Trajectory,
    settings: &PipelineSettings,
) -> Result<WindowAnalysis, PipelineError> {
    let analysis = match (settings.normalize, traj.norm()) {
        (Normalization::MinMax, None) => normalize_minmax(traj)?,
        _ => traj.clone(),
    };
    let window = (analysis.timestamp(0), analysis.timestamp(analysis.n() - 1));

    let obs = estimate_gradient_observations(&analysis)?;
    let (model, train_reports) = train_with_report(&obs, &settings.train)?;
    let grid = test_grid(model.x(), &settings.grid);
    let field = posterior_field(&model, &grid)?;
    let klf = build_kl_field(&field, model.params().noise_var)?;
    let summary = attractor_moments(&klf, window)?;

    let summary_report = match analysis.norm() {
        Some(norm) => {
            let usd = KLField {
                points: denorm_points(&klf.points, norm),
                kl: klf.kl.clone(),
                sign: klf.sign.clone(),
                k_a: klf.k_a.clone(),
                k_r: klf.k_r.clone(),
            };
            attractor_moments(&usd, window)?
        }
        None => attractor_moments(&klf, window)?,
    };

    // Trend: x0 and magnitudes in reporting units, direction on shared
    // min-max scale.
    let report_traj = crate::market_data::denormalize(&analysis);
    let x0 = DVector::from_fn(report_traj.m(), |j, _| report_traj.states()[(0, j)]);
    let axis_scale = match analysis.norm() {
        Some(norm) => norm.to_vec(),
        None => column_minmax(&analysis),
    };
    let trend = trend_report(&summary_report, &x0, Some(&axis_scale))?;

    let axes = match principal_axes(&summary) {
        Ok(a) => Some(a),
        Err(AttractorError::DegenerateSpectrum) => None,
        Err(e) => return Err(e.into()),
    };
    let convergence = convergence_windows(&analysis, &summary, settings.grace_gap);

    Ok(WindowAnalysis {
        traj: analysis,
        model,
        train_reports,
        field,
        klf,
        summary,
        summary_report,
        trend,
        axes,
        convergence,
    })
}
