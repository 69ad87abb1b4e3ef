//! Attractor evolution across non-overlapping subwindows and the feature
//! export consumed by downstream predictive models.

use super::{AttractorError, AttractorSummary};
use crate::market_data::{format_unix, Trajectory};
use crate::pipeline::{analyze_window, PipelineSettings};
use rayon::prelude::*;

/// One subwindow's outcome: either a summary in reporting units or the
/// failure that produced a gap.
pub struct EvolutionWindow {
    pub index: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub summary: Option<AttractorSummary>,
    pub error: Option<String>,
}

impl EvolutionWindow {
    pub fn succeeded(&self) -> bool {
        self.summary.is_some()
    }
}

/// Attractor series over consecutive subwindows of one trajectory.
pub struct TemporalEvolution {
    pub windows: Vec<EvolutionWindow>,
    pub assets: Vec<String>,
}

/// Splits the trajectory into non-overlapping subwindows of
/// `subwindow_secs` and runs the full analysis on each. A failed subwindow
/// becomes a gap entry; the series always covers every complete subwindow
/// in order.
pub fn temporal_evolution(
    traj: &Trajectory,
    subwindow_secs: f64,
    settings: &PipelineSettings,
) -> Result<TemporalEvolution, AttractorError> {
    if !(subwindow_secs > 0.0) || !subwindow_secs.is_finite() {
        return Err(AttractorError::InvalidArgument(
            "subwindow duration must be positive".into(),
        ));
    }
    let per = (subwindow_secs / traj.dt()).round() as usize;
    if per < 3 {
        return Err(AttractorError::InvalidArgument(format!(
            "subwindow of {subwindow_secs} s holds {per} samples at dt = {} s, need at least 3",
            traj.dt()
        )));
    }
    let count = traj.n() / per;
    if count == 0 {
        return Err(AttractorError::InvalidArgument(format!(
            "trajectory of {} samples is shorter than one {per}-sample subwindow",
            traj.n()
        )));
    }

    let windows: Vec<EvolutionWindow> = (0..count)
        .into_par_iter()
        .map(|w| {
            let sub = match traj.subwindow(w * per, per) {
                Ok(s) => s,
                Err(e) => {
                    return EvolutionWindow {
                        index: w,
                        start_time: traj.timestamp(w * per),
                        end_time: traj.timestamp(w * per + per - 1),
                        summary: None,
                        error: Some(e.to_string()),
                    }
                }
            };
            let (start_time, end_time) = (sub.timestamp(0), sub.timestamp(sub.n() - 1));
            match analyze_window(&sub, settings) {
                Ok(out) => EvolutionWindow {
                    index: w,
                    start_time,
                    end_time,
                    summary: Some(out.summary_report),
                    error: None,
                },
                Err(e) => EvolutionWindow {
                    index: w,
                    start_time,
                    end_time,
                    summary: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    Ok(TemporalEvolution { windows, assets: traj.assets().to_vec() })
}

/// Serializes one asset's attractor series as CSV with columns
/// date, attractor_mean, attractor_std. Failed subwindows keep their date
/// and leave the value fields empty.
pub fn export_features(
    evolution: &TemporalEvolution,
    asset: &str,
) -> Result<String, AttractorError> {
    let j = evolution
        .assets
        .iter()
        .position(|a| a == asset)
        .ok_or_else(|| AttractorError::UnknownAsset(asset.to_string()))?;
    let mut out = String::from("date,attractor_mean,attractor_std\n");
    for w in &evolution.windows {
        let date = format_unix(w.start_time);
        match &w.summary {
            Some(s) => {
                let std = s.sigma_a_mat[(j, j)].max(0.0).sqrt();
                out.push_str(&format!("{date},{},{}\n", s.mu_a[j], std));
            }
            None => out.push_str(&format!("{date},,\n")),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp_field::{GridSettings, TrainOpts};
    use crate::synth::{Potential, SynthSpec};
    use nalgebra::{DMatrix, DVector};

    fn fast_settings() -> PipelineSettings {
        PipelineSettings {
            train: TrainOpts { starts: 2, max_evals: 50, ..TrainOpts::default() },
            grid: GridSettings { per_axis_low_dim: 9, ..GridSettings::default() },
            ..PipelineSettings::default()
        }
    }

    fn noisy_well_traj(steps: usize) -> Trajectory {
        let spec = SynthSpec {
            potential: Potential::Quadratic {
                center: DVector::from_column_slice(&[0.5, -0.25]),
                curvature: DMatrix::from_row_slice(2, 2, &[2.0, 0.2, 0.2, 1.1]),
            },
            gamma: 1.0,
            noise_std: 0.05,
            x0: DVector::from_column_slice(&[1.3, 0.4]),
            v0: DVector::zeros(2),
            dt: 0.01,
            steps,
        };
        crate::synth::simulate(&spec, 99).unwrap()
    }

    #[test]
    fn window_count_follows_duration_arithmetic() {
        let traj = noisy_well_traj(400);
        // 400 samples at dt 0.01 = 4 s; 0.4 s subwindows of 40 samples.
        let evo = temporal_evolution(&traj, 0.4, &fast_settings()).unwrap();
        assert_eq!(evo.windows.len(), 10);
        for (i, w) in evo.windows.iter().enumerate() {
            assert_eq!(w.index, i);
        }
    }

    #[test]
    fn constant_trajectory_yields_gap_rows() {
        let states = DMatrix::from_element(30, 2, 7.5);
        let traj =
            Trajectory::new(states, 1.0, 0.0, vec!["a".into(), "b".into()], None).unwrap();
        let evo = temporal_evolution(&traj, 10.0, &fast_settings()).unwrap();
        assert_eq!(evo.windows.len(), 3);
        for w in &evo.windows {
            assert!(!w.succeeded());
            assert!(w.error.as_deref().unwrap_or("").contains("zero price range"));
        }
    }

    #[test]
    fn tiny_subwindow_is_rejected() {
        let traj = noisy_well_traj(100);
        assert!(matches!(
            temporal_evolution(&traj, 0.02, &fast_settings()),
            Err(AttractorError::InvalidArgument(_))
        ));
    }

    #[test]
    fn drifting_center_is_tracked_in_order() {
        // Concatenate two wells with different centers; the fitted means
        // must move in the drift direction between the halves.
        let a = noisy_well_traj(150);
        let spec_b = SynthSpec {
            potential: Potential::Quadratic {
                center: DVector::from_column_slice(&[2.5, 1.75]),
                curvature: DMatrix::from_row_slice(2, 2, &[2.0, 0.2, 0.2, 1.1]),
            },
            gamma: 1.0,
            noise_std: 0.05,
            x0: DVector::from_column_slice(&[3.0, 2.2]),
            v0: DVector::zeros(2),
            dt: 0.01,
            steps: 150,
        };
        let b = crate::synth::simulate(&spec_b, 100).unwrap();
        let mut states = DMatrix::zeros(300, 2);
        states.view_mut((0, 0), (150, 2)).copy_from(a.states());
        states.view_mut((150, 0), (150, 2)).copy_from(b.states());
        let traj =
            Trajectory::new(states, 0.01, 0.0, vec!["a".into(), "b".into()], None).unwrap();

        let evo = temporal_evolution(&traj, 1.5, &fast_settings()).unwrap();
        assert_eq!(evo.windows.len(), 2);
        let first = evo.windows[0].summary.as_ref().expect("first window fits");
        let second = evo.windows[1].summary.as_ref().expect("second window fits");
        assert!(
            second.mu_a[0] > first.mu_a[0] + 0.5,
            "means {} -> {} did not track the drift",
            first.mu_a[0],
            second.mu_a[0]
        );
    }

    #[test]
    fn feature_export_round_trips() {
        let traj = noisy_well_traj(120);
        let evo = temporal_evolution(&traj, 0.4, &fast_settings()).unwrap();
        let csv = export_features(&evo, "x1").unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("date,attractor_mean,attractor_std"));
        let mut parsed = Vec::new();
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 3);
            parsed.push((cols[1].parse::<f64>().unwrap(), cols[2].parse::<f64>().unwrap()));
        }
        assert_eq!(parsed.len(), evo.windows.len());
        for (row, w) in parsed.iter().zip(&evo.windows) {
            let s = w.summary.as_ref().unwrap();
            assert_eq!(row.0, s.mu_a[0]);
            assert_eq!(row.1, s.sigma_a_mat[(0, 0)].max(0.0).sqrt());
        }
    }

    #[test]
    fn unknown_asset_is_rejected() {
        let traj = noisy_well_traj(120);
        let evo = temporal_evolution(&traj, 0.4, &fast_settings()).unwrap();
        assert!(matches!(
            export_features(&evo, "doge"),
            Err(AttractorError::UnknownAsset(_))
        ));
    }
}
