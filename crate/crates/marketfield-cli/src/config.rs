//! Flat `key = value` run configuration.
//!
//! One file drives a whole run: blank lines and `#` comment lines are
//! skipped, everything else must be `key = value`. Unknown keys are
//! rejected so typos fail loudly instead of silently using a default.
//! Command-line flags (`--out`, `--seed`) override file values, and the
//! fully resolved map is echoed into every artifact directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use marketfield::gp_field::{GridSettings, TrainOpts};
use marketfield::market_data::{parse_timestamp_f64, CsvSchema, PriceField};
use marketfield::pipeline::{Normalization, PipelineSettings};
use marketfield::wavelet::WaveletSettings;

use crate::AppError;

/// Documented keys for the analysis subcommands: name, default ("" means
/// unset), description. This table is the single source for parsing,
/// validation, `--print-defaults` and the resolved-config echo.
const RUN_KEYS: &[(&str, &str, &str)] = &[
    ("assets", "", "comma-separated asset labels; input.<ASSET> gives each file"),
    ("input.trajectory", "", "pre-built trajectory CSV; replaces per-asset inputs"),
    ("csv.timestamp", "timestamp", "timestamp column name in OHLCV inputs"),
    ("csv.open", "open", "open column name"),
    ("csv.high", "high", "high column name"),
    ("csv.low", "low", "low column name"),
    ("csv.close", "close", "close column name"),
    ("csv.volume", "volume", "volume column name"),
    ("price_field", "close", "which price enters the state: close, open or mean"),
    ("resample", "3600", "resampling interval, seconds"),
    ("window.start", "", "analysis window start (RFC 3339 or unix seconds); default = data start"),
    ("window.end", "", "analysis window end; default = data end"),
    ("normalize", "true", "min-max normalize each asset before inference and stability checks"),
    ("gp.starts", "8", "optimizer restarts for hyperparameter training"),
    ("gp.seed", "0", "seed for the randomized restarts"),
    ("gp.max_evals", "200", "objective-evaluation budget per restart"),
    ("gp.bound_factor", "1000", "hyperparameter search half-width, x data scale"),
    ("grid.padding", "0.1", "test-grid bounding-box padding per side, fraction"),
    ("grid.per_axis", "25", "test-grid resolution per axis, 1-2 assets"),
    ("grid.per_axis_3d", "12", "test-grid resolution per axis, 3 assets"),
    ("grid.halton", "4096", "quasi-random test points above 3 assets"),
    ("lyapunov.epsilon", "", "absolute pair-closeness radius; default from percentile"),
    ("lyapunov.epsilon_percentile", "10", "pair-distance percentile used when epsilon is unset"),
    ("lyapunov.k", "", "forward stride, samples; default = one hour of samples"),
    ("subwindow", "86400", "evolve: subwindow duration, seconds"),
    ("grace_gap", "0", "convergence intervals: max gap, samples, merged over"),
    ("wavelet.omega0", "6", "Morlet central frequency"),
    ("wavelet.voices", "12", "wavelet scales per octave"),
    ("out", "runs/out", "artifact directory"),
];

/// Documented keys for `synth` spec files.
const SYNTH_KEYS: &[(&str, &str, &str)] = &[
    ("potential", "quadratic", "potential shape: quadratic or double_well"),
    ("center", "0", "quadratic: well center, comma-separated"),
    ("curvature", "1", "quadratic: SPD matrix A, rows split by ';', entries by ','"),
    ("height", "1", "double_well: barrier height"),
    ("half_width", "1", "double_well: minima at +-half_width"),
    ("gamma", "0.5", "viscous damping coefficient"),
    ("noise_std", "0", "std of the per-step random acceleration"),
    ("x0", "", "initial position, comma-separated; required"),
    ("v0", "", "initial velocity; default zeros"),
    ("dt", "0.01", "integration step, seconds"),
    ("steps", "500", "number of steps to record"),
    ("seed", "0", "noise seed"),
    ("t0", "0", "timestamp of the first sample, unix seconds"),
    ("labels", "", "column labels for the output CSV; default x1..xM"),
    ("out", "runs/synth", "artifact directory"),
];

/// `--print-defaults` payload: every key of both tables with its default.
pub fn render_defaults() -> String {
    let mut s = String::new();
    s.push_str("# analysis subcommands (lyapunov, analyze, evolve, coherence)\n");
    for (k, d, doc) in RUN_KEYS {
        s.push_str(&format!("{k} = {d}  # {doc}\n"));
    }
    s.push_str("# input.<ASSET> = path  # OHLCV CSV for each entry in `assets`\n");
    s.push_str("\n# synth spec files\n");
    for (k, d, doc) in SYNTH_KEYS {
        s.push_str(&format!("{k} = {d}  # {doc}\n"));
    }
    s
}

/// Splits a config file into (key, value) pairs.
fn parse_kv(text: &str, path: &Path) -> Result<Vec<(String, String)>, AppError> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(AppError::Usage(format!(
                "{}:{}: expected `key = value`, got `{line}`",
                path.display(),
                lineno + 1
            )));
        };
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// A resolved configuration: defaults overlaid with file values and flag
/// overrides. Typed accessors parse on demand and report the offending key.
#[derive(Debug, Clone)]
pub struct RunConfig {
    vals: BTreeMap<String, String>,
}

fn load_map(
    table: &[(&str, &str, &str)],
    path: Option<&Path>,
    allow_input_keys: bool,
) -> Result<BTreeMap<String, String>, AppError> {
    let mut vals: BTreeMap<String, String> = table
        .iter()
        .filter(|(_, d, _)| !d.is_empty())
        .map(|(k, d, _)| (k.to_string(), d.to_string()))
        .collect();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| crate::io_err(p, e))?;
        for (k, v) in parse_kv(&text, p)? {
            let known = table.iter().any(|(name, _, _)| *name == k)
                || (allow_input_keys && k.starts_with("input.") && k.len() > "input.".len());
            if !known {
                return Err(AppError::Usage(format!(
                    "{}: unknown config key `{k}`",
                    p.display()
                )));
            }
            if v.is_empty() {
                vals.remove(&k);
            } else {
                vals.insert(k, v);
            }
        }
    }
    Ok(vals)
}

impl RunConfig {
    pub fn load(path: Option<&Path>, out: Option<&Path>, seed: Option<u64>) -> Result<Self, AppError> {
        let mut vals = load_map(RUN_KEYS, path, true)?;
        if let Some(o) = out {
            vals.insert("out".into(), o.display().to_string());
        }
        if let Some(s) = seed {
            vals.insert("gp.seed".into(), s.to_string());
        }
        Ok(Self { vals })
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.vals
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.vals.get(key).map(|s| s.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, AppError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                AppError::Usage(format!("config key `{key}`: cannot parse `{raw}`"))
            }),
        }
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, fallback: T) -> Result<T, AppError> {
        Ok(self.parse(key)?.unwrap_or(fallback))
    }

    pub fn assets(&self) -> Vec<String> {
        self.get("assets")
            .map(|s| {
                s.split(',')
                    .map(|a| a.trim().to_string())
                    .filter(|a| !a.is_empty())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn input_path(&self, asset: &str) -> Result<PathBuf, AppError> {
        self.get(&format!("input.{asset}"))
            .map(PathBuf::from)
            .ok_or_else(|| AppError::Usage(format!("no input file configured for asset `{asset}` (set input.{asset})")))
    }

    pub fn trajectory_path(&self) -> Option<PathBuf> {
        self.get("input.trajectory").map(PathBuf::from)
    }

    pub fn csv_schema(&self) -> CsvSchema {
        let d = CsvSchema::default();
        let pick = |k: &str, fallback: String| self.get(k).map(str::to_string).unwrap_or(fallback);
        CsvSchema {
            timestamp: pick("csv.timestamp", d.timestamp),
            open: pick("csv.open", d.open),
            high: pick("csv.high", d.high),
            low: pick("csv.low", d.low),
            close: pick("csv.close", d.close),
            volume: pick("csv.volume", d.volume),
        }
    }

    pub fn price_field(&self) -> Result<PriceField, AppError> {
        match self.get("price_field").unwrap_or("close") {
            "close" => Ok(PriceField::Close),
            "open" => Ok(PriceField::Open),
            "mean" => Ok(PriceField::Mean),
            other => Err(AppError::Usage(format!(
                "config key `price_field`: `{other}` is not close, open or mean"
            ))),
        }
    }

    pub fn resample_secs(&self) -> Result<u64, AppError> {
        self.parse_or("resample", 3600)
    }

    fn timestamp_key(&self, key: &str) -> Result<Option<f64>, AppError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => parse_timestamp_f64(raw).map(Some).ok_or_else(|| {
                AppError::Usage(format!(
                    "config key `{key}`: `{raw}` is neither RFC 3339 nor unix seconds"
                ))
            }),
        }
    }

    /// Optional (start, end) window; each side defaults to the data edge.
    pub fn window(&self) -> Result<(Option<f64>, Option<f64>), AppError> {
        let start = self.timestamp_key("window.start")?;
        let end = self.timestamp_key("window.end")?;
        if let (Some(s), Some(e)) = (start, end) {
            if s >= e {
                return Err(AppError::Usage(format!(
                    "window.start ({s}) must be before window.end ({e})"
                )));
            }
        }
        Ok((start, end))
    }

    pub fn normalization(&self) -> Result<Normalization, AppError> {
        match self.get("normalize").unwrap_or("true") {
            "true" => Ok(Normalization::MinMax),
            "false" => Ok(Normalization::Raw),
            other => Err(AppError::Usage(format!(
                "config key `normalize`: `{other}` is not true or false"
            ))),
        }
    }

    pub fn train_opts(&self) -> Result<TrainOpts, AppError> {
        Ok(TrainOpts {
            starts: self.parse_or("gp.starts", 8)?,
            seed: self.parse_or("gp.seed", 0)?,
            max_evals: self.parse_or("gp.max_evals", 200)?,
            bound_factor: self.parse_or("gp.bound_factor", 1e3)?,
        })
    }

    pub fn grid_settings(&self) -> Result<GridSettings, AppError> {
        Ok(GridSettings {
            padding: self.parse_or("grid.padding", 0.1)?,
            per_axis_low_dim: self.parse_or("grid.per_axis", 25)?,
            per_axis_3d: self.parse_or("grid.per_axis_3d", 12)?,
            halton_points: self.parse_or("grid.halton", 4096)?,
        })
    }

    pub fn pipeline_settings(&self) -> Result<PipelineSettings, AppError> {
        Ok(PipelineSettings {
            normalize: self.normalization()?,
            train: self.train_opts()?,
            grid: self.grid_settings()?,
            grace_gap: self.parse_or("grace_gap", 0)?,
        })
    }

    pub fn lyapunov_epsilon(&self) -> Result<Option<f64>, AppError> {
        self.parse("lyapunov.epsilon")
    }

    pub fn lyapunov_percentile(&self) -> Result<f64, AppError> {
        self.parse_or("lyapunov.epsilon_percentile", 10.0)
    }

    pub fn lyapunov_k(&self) -> Result<Option<usize>, AppError> {
        self.parse("lyapunov.k")
    }

    pub fn subwindow_secs(&self) -> Result<f64, AppError> {
        self.parse_or("subwindow", 86400.0)
    }

    pub fn wavelet_settings(&self) -> Result<WaveletSettings, AppError> {
        Ok(WaveletSettings {
            omega0: self.parse_or("wavelet.omega0", 6.0)?,
            voices: self.parse_or("wavelet.voices", 12)?,
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out").unwrap_or("runs/out"))
    }
}

/// A resolved `synth` spec file. Same format and override rules as
/// [`RunConfig`], different key table.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    vals: BTreeMap<String, String>,
}

impl SynthConfig {
    pub fn load(path: Option<&Path>, out: Option<&Path>, seed: Option<u64>) -> Result<Self, AppError> {
        let mut vals = load_map(SYNTH_KEYS, path, false)?;
        if let Some(o) = out {
            vals.insert("out".into(), o.display().to_string());
        }
        if let Some(s) = seed {
            vals.insert("seed".into(), s.to_string());
        }
        Ok(Self { vals })
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.vals
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.vals.get(key).map(|s| s.as_str())
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, AppError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                AppError::Usage(format!("synth spec key `{key}`: cannot parse `{raw}`"))
            }),
        }
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, fallback: T) -> Result<T, AppError> {
        Ok(self.parse(key)?.unwrap_or(fallback))
    }

    /// Comma-separated float list.
    pub fn vector(&self, key: &str) -> Result<Option<Vec<f64>>, AppError> {
        let Some(raw) = self.get(key) else {
            return Ok(None);
        };
        let mut v = Vec::new();
        for part in raw.split(',') {
            let x: f64 = part.trim().parse().map_err(|_| {
                AppError::Usage(format!("synth spec key `{key}`: cannot parse `{part}`"))
            })?;
            v.push(x);
        }
        Ok(Some(v))
    }

    /// Semicolon-separated rows of comma-separated floats.
    pub fn matrix(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>, AppError> {
        let Some(raw) = self.get(key) else {
            return Ok(None);
        };
        let mut rows = Vec::new();
        for row in raw.split(';') {
            let mut entries = Vec::new();
            for part in row.split(',') {
                let x: f64 = part.trim().parse().map_err(|_| {
                    AppError::Usage(format!("synth spec key `{key}`: cannot parse `{part}`"))
                })?;
                entries.push(x);
            }
            rows.push(entries);
        }
        Ok(Some(rows))
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out").unwrap_or("runs/synth"))
    }
}
