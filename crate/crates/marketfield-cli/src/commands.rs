//! Subcommand implementations: load inputs per the config, run the
//! library pipeline, write artifacts.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use marketfield::attractor::evolution::{export_features, temporal_evolution};
use marketfield::lyapunov::{
    default_epsilon, default_stride, lyapunov_exponents, stability_verdict,
};
use marketfield::market_data::{build_trajectory, normalize_minmax, parse_csv, Trajectory};
use marketfield::pipeline::Normalization;
use marketfield::pipeline::analyze_window;
use marketfield::synth::{simulate_full, Potential, SynthSpec};
use marketfield::wavelet::coherence;

use crate::config::{RunConfig, SynthConfig};
use crate::{io_err, reports, AppError, Cli, Command};

pub fn dispatch(command: Command, cli: &Cli) -> Result<(), AppError> {
    let config = cli.config.as_deref();
    let out = cli.out.as_deref();
    match command {
        Command::Synth => cmd_synth(&SynthConfig::load(config, out, cli.seed)?),
        _ => {
            let cfg = RunConfig::load(config, out, cli.seed)?;
            match command {
                Command::Lyapunov => cmd_lyapunov(&cfg),
                Command::Analyze => cmd_analyze(&cfg),
                Command::Evolve => cmd_evolve(&cfg),
                Command::Coherence => cmd_coherence(&cfg),
                Command::Synth => unreachable!(),
            }
        }
    }
}

fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| io_err(&path, e))
}

fn echo_config(dir: &Path, command: Command, cfg: &RunConfig) -> Result<(), AppError> {
    write_artifact(
        dir,
        "resolved_config.json",
        &reports::resolved_config_json(command.name(), cfg.resolved()),
    )
}

/// Builds the analysis trajectory: either a pre-built trajectory CSV or
/// per-asset OHLCV files resampled onto a common clock, then the optional
/// time window.
fn load_trajectory(cfg: &RunConfig) -> Result<Trajectory, AppError> {
    let traj = match cfg.trajectory_path() {
        Some(path) => Trajectory::read_csv(&path)?,
        None => {
            let assets = cfg.assets();
            if assets.is_empty() {
                return Err(AppError::Usage(
                    "no inputs: set `assets` plus input.<ASSET> files, or input.trajectory".into(),
                ));
            }
            let schema = cfg.csv_schema();
            let field = cfg.price_field()?;
            let mut series = Vec::with_capacity(assets.len());
            for asset in assets {
                let path = cfg.input_path(&asset)?;
                let records = parse_csv(&path, &schema)?;
                series.push((asset, records));
            }
            build_trajectory(&series, field, cfg.resample_secs()?)?
        }
    };
    match cfg.window()? {
        (None, None) => Ok(traj),
        (start, end) => {
            let s = start.unwrap_or_else(|| traj.timestamp(0));
            let e = end.unwrap_or_else(|| traj.timestamp(traj.n() - 1));
            Ok(traj.window_by_time(s, e)?)
        }
    }
}

pub fn cmd_lyapunov(cfg: &RunConfig) -> Result<(), AppError> {
    let traj = load_trajectory(cfg)?;
    // Closeness in raw dollars is dominated by whichever asset trades at
    // the biggest figure, so the pair radius obeys the same normalization
    // switch as the rest of the pipeline.
    let traj = match cfg.normalization()? {
        Normalization::MinMax if traj.norm().is_none() => normalize_minmax(&traj)?,
        _ => traj,
    };
    let epsilon = match cfg.lyapunov_epsilon()? {
        Some(e) => e,
        None => default_epsilon(&traj, cfg.lyapunov_percentile()?).ok_or_else(|| {
            AppError::Data("trajectory too short to derive a pair radius".into())
        })?,
    };
    let k = cfg.lyapunov_k()?.unwrap_or_else(|| default_stride(traj.dt()));
    let result = lyapunov_exponents(&traj, epsilon, k)?;
    let verdict = stability_verdict(&result);

    let dir = cfg.out_dir();
    write_artifact(&dir, "exponents.csv", &reports::exponents_csv(&result))?;
    write_artifact(&dir, "verdict.json", &reports::verdict_json(&result, verdict))?;
    echo_config(&dir, Command::Lyapunov, cfg)?;
    println!(
        "lambda_max = {} over {} pairs -> {verdict}",
        result.lambda_max, result.pair_count
    );
    Ok(())
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<(), AppError> {
    let traj = load_trajectory(cfg)?;
    let settings = cfg.pipeline_settings()?;
    let analysis = analyze_window(&traj, &settings)?;

    let dir = cfg.out_dir();
    write_artifact(&dir, "summary.json", &reports::summary_json(&analysis))?;
    write_artifact(&dir, "kl_field.csv", &reports::kl_field_csv(&analysis))?;
    write_artifact(&dir, "field.csv", &reports::field_csv(&analysis))?;
    if let Some(ellipses) = reports::ellipses_csv(&analysis) {
        write_artifact(&dir, "ellipses.csv", &ellipses)?;
    }
    echo_config(&dir, Command::Analyze, cfg)?;
    let mu: Vec<f64> = analysis.summary_report.mu_a.iter().copied().collect();
    println!(
        "attractor mean {mu:?}, trend {:.1} deg, artifacts in {}",
        analysis.trend.direction_deg,
        dir.display()
    );
    Ok(())
}

pub fn cmd_evolve(cfg: &RunConfig) -> Result<(), AppError> {
    let traj = load_trajectory(cfg)?;
    let settings = cfg.pipeline_settings()?;
    let evo = temporal_evolution(&traj, cfg.subwindow_secs()?, &settings)?;

    let dir = cfg.out_dir();
    write_artifact(&dir, "evolution.csv", &reports::evolution_csv(&evo))?;
    for asset in &evo.assets {
        let features = export_features(&evo, asset)?;
        write_artifact(&dir, &format!("features_{asset}.csv"), &features)?;
    }
    echo_config(&dir, Command::Evolve, cfg)?;

    let succeeded = evo.windows.iter().filter(|w| w.succeeded()).count();
    let total = evo.windows.len();
    for w in &evo.windows {
        if let Some(err) = &w.error {
            eprintln!("subwindow {}: {err}", w.index);
        }
    }
    println!("{succeeded}/{total} subwindows analyzed, artifacts in {}", dir.display());
    if succeeded * 2 < total {
        return Err(AppError::Numerical(format!(
            "only {succeeded} of {total} subwindows analyzed"
        )));
    }
    Ok(())
}

pub fn cmd_coherence(cfg: &RunConfig) -> Result<(), AppError> {
    let traj = load_trajectory(cfg)?;
    if traj.m() != 2 {
        return Err(AppError::Usage(format!(
            "coherence needs exactly two assets, got {}",
            traj.m()
        )));
    }
    let x = traj.column(0);
    let y = traj.column(1);
    let map = coherence(&x, &y, traj.dt(), &cfg.wavelet_settings()?)?;

    let dir = cfg.out_dir();
    write_artifact(&dir, "coherence.csv", &reports::coherence_csv(&map, traj.t0()))?;
    echo_config(&dir, Command::Coherence, cfg)?;
    println!(
        "{} scales x {} samples, artifacts in {}",
        map.scales.len(),
        map.times.len(),
        dir.display()
    );
    Ok(())
}

fn spec_from_config(cfg: &SynthConfig) -> Result<(SynthSpec, u64, f64, Option<Vec<String>>), AppError> {
    let potential = match cfg.get("potential").unwrap_or("quadratic") {
        "quadratic" => {
            let center = DVector::from_vec(
                cfg.vector("center")?.unwrap_or_else(|| vec![0.0]),
            );
            let rows = cfg
                .matrix("curvature")?
                .unwrap_or_else(|| vec![vec![1.0]]);
            let m = center.len();
            if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                return Err(AppError::Usage(format!(
                    "synth spec: curvature must be {m}x{m} to match center"
                )));
            }
            let curvature = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
            Potential::Quadratic { center, curvature }
        }
        "double_well" => Potential::DoubleWell {
            height: cfg.parse_or("height", 1.0)?,
            half_width: cfg.parse_or("half_width", 1.0)?,
        },
        other => {
            return Err(AppError::Usage(format!(
                "synth spec key `potential`: `{other}` is not quadratic or double_well"
            )))
        }
    };
    let m = potential.dim();
    let x0 = cfg
        .vector("x0")?
        .ok_or_else(|| AppError::Usage("synth spec: x0 is required".into()))?;
    let v0 = cfg.vector("v0")?.unwrap_or_else(|| vec![0.0; m]);
    let spec = SynthSpec {
        potential,
        gamma: cfg.parse_or("gamma", 0.5)?,
        noise_std: cfg.parse_or("noise_std", 0.0)?,
        x0: DVector::from_vec(x0),
        v0: DVector::from_vec(v0),
        dt: cfg.parse_or("dt", 0.01)?,
        steps: cfg.parse_or("steps", 500)?,
    };
    let seed = cfg.parse_or("seed", 0u64)?;
    let t0 = cfg.parse_or("t0", 0.0)?;
    let labels = cfg.get("labels").map(|s| {
        s.split(',')
            .map(|a| a.trim().to_string())
            .filter(|a| !a.is_empty())
            .collect::<Vec<_>>()
    });
    Ok((spec, seed, t0, labels))
}

pub fn cmd_synth(cfg: &SynthConfig) -> Result<(), AppError> {
    let (spec, seed, t0, labels) = spec_from_config(cfg)?;
    let m = spec.potential.dim();
    let labels = match labels {
        Some(l) => {
            if l.len() != m {
                return Err(AppError::Usage(format!(
                    "synth spec: {} labels for a {m}-dimensional potential",
                    l.len()
                )));
            }
            l
        }
        None => (1..=m).map(|i| format!("x{i}")).collect(),
    };
    let (states, _velocities) = simulate_full(&spec, seed)?;
    let traj = Trajectory::new(states, spec.dt, t0, labels, None)?;

    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let path = dir.join("trajectory.csv");
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, &buf).map_err(|e| io_err(&path, e))?;
    write_artifact(
        &dir,
        "resolved_config.json",
        &reports::resolved_config_json(Command::Synth.name(), cfg.resolved()),
    )?;
    println!("{} samples x {} columns -> {}", traj.n(), traj.m(), path.display());
    Ok(())
}
