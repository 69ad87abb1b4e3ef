//! Artifact rendering: JSON reports and CSV plot-data.
//!
//! Everything here turns pipeline results into strings; file placement is
//! the caller's job. All floats go through Rust's shortest-round-trip
//! formatting, so identical results give identical bytes.

use std::collections::BTreeMap;

use serde::Serialize;

use marketfield::attractor::evolution::TemporalEvolution;
use marketfield::attractor::AttractorSummary;
use marketfield::lyapunov::{LyapunovResult, Verdict};
use marketfield::market_data::format_unix;
use marketfield::pipeline::WindowAnalysis;
use marketfield::wavelet::CoherenceMap;

pub const SCHEMA_VERSION: &str = "1";

fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("report serialization cannot fail");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct ResolvedConfigDoc<'a> {
    schema_version: &'static str,
    command: &'a str,
    config: &'a BTreeMap<String, String>,
}

/// The resolved-config echo dropped into every artifact directory.
pub fn resolved_config_json(command: &str, config: &BTreeMap<String, String>) -> String {
    to_json(&ResolvedConfigDoc { schema_version: SCHEMA_VERSION, command, config })
}

#[derive(Serialize)]
struct VerdictDoc<'a> {
    schema_version: &'static str,
    verdict: &'a str,
    lambda_max: f64,
    pair_count: usize,
    skipped_zero: usize,
    epsilon: f64,
    k: usize,
    dt_secs: f64,
}

pub fn verdict_json(result: &LyapunovResult, verdict: Verdict) -> String {
    to_json(&VerdictDoc {
        schema_version: SCHEMA_VERSION,
        verdict: match verdict {
            Verdict::Stable => "Stable",
            Verdict::Unstable => "Unstable",
        },
        lambda_max: result.lambda_max,
        pair_count: result.pair_count,
        skipped_zero: result.skipped_zero,
        epsilon: result.params.epsilon,
        k: result.params.k,
        dt_secs: result.params.dt,
    })
}

/// Sorted per-pair exponents, one row each, for Fig.-3-style curves.
pub fn exponents_csv(result: &LyapunovResult) -> String {
    let mut s = String::from("index,lambda\n");
    for (i, l) in result.exponents.iter().enumerate() {
        s.push_str(&format!("{i},{l}\n"));
    }
    s
}

#[derive(Serialize)]
struct MomentsDoc {
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
    sigma_scalar: f64,
    eigvals: Vec<f64>,
    /// Unit eigenvectors, one inner list per eigenvalue, descending.
    eigvecs: Vec<Vec<f64>>,
}

impl MomentsDoc {
    fn from_summary(s: &AttractorSummary) -> Self {
        MomentsDoc {
            mu: s.mu_a.iter().copied().collect(),
            sigma: matrix_rows(&s.sigma_a_mat),
            sigma_scalar: s.sigma_a_scalar,
            eigvals: s.eigvals.iter().copied().collect(),
            eigvecs: (0..s.eigvecs.ncols())
                .map(|c| s.eigvecs.column(c).iter().copied().collect())
                .collect(),
        }
    }
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[derive(Serialize)]
struct RepellerDoc {
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct WindowDoc {
    start: String,
    end: String,
    samples: usize,
    dt_secs: f64,
}

#[derive(Serialize)]
struct TrendDoc {
    x0: Vec<f64>,
    magnitude: Vec<f64>,
    direction_deg: f64,
    p_pos: Vec<f64>,
    p_neg: Vec<f64>,
}

#[derive(Serialize)]
struct PhaseDoc {
    axis_a: String,
    axis_b: String,
    angle_deg: f64,
}

#[derive(Serialize)]
struct AxesDoc {
    eigval: f64,
    eigvec: Vec<f64>,
    phases: Vec<PhaseDoc>,
}

#[derive(Serialize)]
struct IntervalDoc {
    start: String,
    end: String,
    start_idx: usize,
    end_idx: usize,
    duration_secs: f64,
}

#[derive(Serialize)]
struct ConvergenceDoc {
    intervals: Vec<IntervalDoc>,
    longest: Option<usize>,
}

#[derive(Serialize)]
struct StartDoc {
    start: usize,
    initial_lml: f64,
    final_lml: f64,
}

#[derive(Serialize)]
struct ModelDoc {
    sigma_se: f64,
    length_scales: Vec<f64>,
    noise_var: f64,
    jitter: f64,
    starts: Vec<StartDoc>,
}

#[derive(Serialize)]
struct DiagnosticsDoc {
    observations: usize,
    grid_points: usize,
    attractor_point_fraction: f64,
    jac_asym_max: f64,
    preclamp_min_var: f64,
}

#[derive(Serialize)]
struct SummaryDoc {
    schema_version: &'static str,
    assets: Vec<String>,
    window: WindowDoc,
    normalized_analysis: bool,
    /// Attractor moments in input (reporting) units.
    attractor: MomentsDoc,
    repeller: Option<RepellerDoc>,
    /// Moments in the coordinates the field was actually fit in.
    analysis_space: MomentsDoc,
    trend: TrendDoc,
    principal_axes: Option<AxesDoc>,
    convergence: ConvergenceDoc,
    model: ModelDoc,
    diagnostics: DiagnosticsDoc,
}

pub fn summary_json(out: &WindowAnalysis) -> String {
    let assets = out.traj.assets().to_vec();
    let name = |j: usize| {
        assets
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("axis{j}"))
    };
    let attractor_points = out.klf.sign.iter().filter(|&&s| s > 0).count();
    let doc = SummaryDoc {
        schema_version: SCHEMA_VERSION,
        assets: assets.clone(),
        window: WindowDoc {
            start: format_unix(out.summary.window.0),
            end: format_unix(out.summary.window.1),
            samples: out.traj.n(),
            dt_secs: out.traj.dt(),
        },
        normalized_analysis: out.traj.norm().is_some(),
        attractor: MomentsDoc::from_summary(&out.summary_report),
        repeller: match (&out.summary_report.mu_r, &out.summary_report.sigma_r_mat) {
            (Some(mu), Some(sigma)) => Some(RepellerDoc {
                mu: mu.iter().copied().collect(),
                sigma: matrix_rows(sigma),
            }),
            _ => None,
        },
        analysis_space: MomentsDoc::from_summary(&out.summary),
        trend: TrendDoc {
            x0: out.trend.x0.iter().copied().collect(),
            magnitude: out.trend.magnitude.iter().copied().collect(),
            direction_deg: out.trend.direction_deg,
            p_pos: out.trend.p_pos.iter().copied().collect(),
            p_neg: out.trend.p_neg.iter().copied().collect(),
        },
        principal_axes: out.axes.as_ref().map(|a| AxesDoc {
            eigval: a.eigval,
            eigvec: a.eigvec.iter().copied().collect(),
            phases: a
                .phases_deg
                .iter()
                .map(|&(i, j, deg)| PhaseDoc { axis_a: name(i), axis_b: name(j), angle_deg: deg })
                .collect(),
        }),
        convergence: ConvergenceDoc {
            intervals: out
                .convergence
                .intervals
                .iter()
                .map(|iv| IntervalDoc {
                    start: format_unix(iv.start_time),
                    end: format_unix(iv.end_time),
                    start_idx: iv.start_idx,
                    end_idx: iv.end_idx,
                    duration_secs: iv.end_time - iv.start_time,
                })
                .collect(),
            longest: out.convergence.longest,
        },
        model: ModelDoc {
            sigma_se: out.model.params().sigma_se,
            length_scales: out.model.params().lambdas.iter().copied().collect(),
            noise_var: out.model.params().noise_var,
            jitter: out.model.jitter(),
            starts: out
                .train_reports
                .iter()
                .map(|r| StartDoc {
                    start: r.start,
                    initial_lml: r.initial_lml,
                    final_lml: r.final_lml,
                })
                .collect(),
        },
        diagnostics: DiagnosticsDoc {
            observations: out.model.n_obs(),
            grid_points: out.klf.points.nrows(),
            attractor_point_fraction: attractor_points as f64
                / out.klf.points.nrows().max(1) as f64,
            jac_asym_max: out.field.jac_asym_max,
            preclamp_min_var: out.field.preclamp_min_var,
        },
    };
    to_json(&doc)
}

/// Per-test-point divergence weights and basin signs, analysis coordinates.
pub fn kl_field_csv(out: &WindowAnalysis) -> String {
    let assets = out.traj.assets();
    let mut s = String::new();
    for a in assets {
        s.push_str(a);
        s.push(',');
    }
    s.push_str("kl,sign\n");
    let q = out.klf.points.nrows();
    for i in 0..q {
        for j in 0..assets.len() {
            s.push_str(&format!("{},", out.klf.points[(i, j)]));
        }
        s.push_str(&format!("{},{}\n", out.klf.kl[i], out.klf.sign[i]));
    }
    s
}

/// Force field and Laplacian over the test grid, analysis coordinates.
/// One row per point: coordinates, grad_mean components, grad_var
/// components, lap_mean, lap_var.
pub fn field_csv(out: &WindowAnalysis) -> String {
    let assets = out.traj.assets();
    let mut s = String::new();
    for a in assets {
        s.push_str(a);
        s.push(',');
    }
    for a in assets {
        s.push_str(&format!("grad_mean_{a},"));
    }
    for a in assets {
        s.push_str(&format!("grad_var_{a},"));
    }
    s.push_str("lap_mean,lap_var\n");
    let f = &out.field;
    for i in 0..f.points.nrows() {
        for j in 0..assets.len() {
            s.push_str(&format!("{},", f.points[(i, j)]));
        }
        for j in 0..assets.len() {
            s.push_str(&format!("{},", f.grad_mean[(i, j)]));
        }
        for j in 0..assets.len() {
            s.push_str(&format!("{},", f.grad_var[(i, j)]));
        }
        s.push_str(&format!("{},{}\n", f.lap_mean[i], f.lap_var[i]));
    }
    s
}

/// 1, 2 and 3 sigma uncertainty-ellipse polylines around the attractor
/// mean, reporting units, drawn in the plane of the top two covariance
/// eigenvectors. None for single-asset runs.
pub fn ellipses_csv(out: &WindowAnalysis) -> Option<String> {
    let s = &out.summary_report;
    let m = s.mu_a.len();
    if m < 2 {
        return None;
    }
    let assets = out.traj.assets();
    let v1 = s.eigvecs.column(0);
    let v2 = s.eigvecs.column(1);
    let r1 = s.eigvals[0].max(0.0).sqrt();
    let r2 = s.eigvals[1].max(0.0).sqrt();
    let mut csv = String::from("level,vertex");
    for a in assets {
        csv.push_str(&format!(",{a}"));
    }
    csv.push('\n');
    let vertices = 64usize;
    for level in 1..=3usize {
        let k = level as f64;
        for t in 0..=vertices {
            let theta = 2.0 * std::f64::consts::PI * t as f64 / vertices as f64;
            csv.push_str(&format!("{level},{t}"));
            for j in 0..m {
                let x = s.mu_a[j]
                    + k * (r1 * theta.cos() * v1[j] + r2 * theta.sin() * v2[j]);
                csv.push_str(&format!(",{x}"));
            }
            csv.push('\n');
        }
    }
    Some(csv)
}

/// One row per subwindow: date, then per-asset attractor mean and std.
/// Failed subwindows keep their row with the value fields empty.
pub fn evolution_csv(evo: &TemporalEvolution) -> String {
    let mut s = String::from("date");
    for a in &evo.assets {
        s.push_str(&format!(",mu_{a},std_{a}"));
    }
    s.push('\n');
    for w in &evo.windows {
        s.push_str(&format_unix(w.start_time));
        match &w.summary {
            Some(sum) => {
                for j in 0..evo.assets.len() {
                    let std = sum.sigma_a_mat[(j, j)].max(0.0).sqrt();
                    s.push_str(&format!(",{},{}", sum.mu_a[j], std));
                }
            }
            None => {
                for _ in &evo.assets {
                    s.push_str(",,");
                }
            }
        }
        s.push('\n');
    }
    s
}

/// Flattened coherence map: one row per (scale, time) cell.
pub fn coherence_csv(map: &CoherenceMap, t0: f64) -> String {
    let mut s = String::from("time,scale_secs,r2,phase_rad,in_coi\n");
    for si in 0..map.scales.len() {
        for ti in 0..map.times.len() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                format_unix(t0 + map.times[ti]),
                map.scales[si],
                map.r2[(si, ti)],
                map.phase[(si, ti)],
                u8::from(map.in_coi(si, ti))
            ));
        }
    }
    s
}
