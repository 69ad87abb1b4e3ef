//! CSV ingestion, trajectory alignment and force-observation estimation.
//!
//! Per-asset OHLCV series are resampled onto a shared uniform grid to form a
//! `Trajectory` (one row per instant, one column per asset). Force
//! observations are the negated central second differences of the states,
//! which is what the field-inference stage consumes.

use chrono::{DateTime, SecondsFormat, Utc};
use nalgebra::DMatrix;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),
    #[error("line {0}: unparsable row ({1})")]
    UnparsableRow(usize, String),
    #[error("line {0}: timestamps not strictly increasing")]
    NonMonotoneTimestamps(usize),
    #[error("asset series overlap on fewer than {0} resampled steps")]
    InsufficientOverlap(usize),
    #[error("asset `{0}` has zero price range over the window")]
    DegenerateRange(String),
    #[error("trajectory has {n} samples, need at least {min}")]
    TooShort { n: usize, min: usize },
    #[error("trajectory timestamps are not uniformly spaced")]
    NonUniformSampling,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One OHLCV bar. Timestamps are UTC unix seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceRecord {
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl PriceRecord {
    /// Builds a record, enforcing `low <= open,close <= high`, positive
    /// prices and non-negative volume.
    pub fn new(
        timestamp: i64,
        open: f64,
        high: f64,
        low: f64,
        close: f64,
        volume: f64,
    ) -> Result<Self, String> {
        for (name, v) in [("open", open), ("high", high), ("low", low), ("close", close)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(format!("{name} price {v} is not a positive finite number"));
            }
        }
        if !volume.is_finite() || volume < 0.0 {
            return Err(format!("volume {volume} is negative or not finite"));
        }
        if low > open || open > high || low > close || close > high {
            return Err(format!(
                "OHLC ordering violated (o={open} h={high} l={low} c={close})"
            ));
        }
        Ok(Self { timestamp, open, high, low, close, volume })
    }
}

/// Which price enters the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceField {
    Close,
    Open,
    /// Bar mean, (open + high + low + close) / 4.
    Mean,
}

impl PriceField {
    fn of(self, r: &PriceRecord) -> f64 {
        match self {
            PriceField::Close => r.close,
            PriceField::Open => r.open,
            PriceField::Mean => 0.25 * (r.open + r.high + r.low + r.close),
        }
    }
}

/// Column-name mapping for OHLCV CSV files.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub timestamp: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub volume: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
            volume: "volume".into(),
        }
    }
}

/// Uniformly sampled multi-asset state sequence.
///
/// Row `n` is the state at `t0 + n*dt` (unix seconds). When `norm` is
/// present the states are min-max normalized and `norm[j]` holds the raw
/// `(min, max)` of asset `j` over the window.
#[derive(Debug, Clone)]
pub struct Trajectory {
    states: DMatrix<f64>,
    dt: f64,
    t0: f64,
    assets: Vec<String>,
    norm: Option<Vec<(f64, f64)>>,
}

impl Trajectory {
    pub fn new(
        states: DMatrix<f64>,
        dt: f64,
        t0: f64,
        assets: Vec<String>,
        norm: Option<Vec<(f64, f64)>>,
    ) -> Result<Self, MarketDataError> {
        if states.nrows() < 3 {
            return Err(MarketDataError::TooShort { n: states.nrows(), min: 3 });
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(MarketDataError::InvalidArgument(format!("dt = {dt}")));
        }
        if assets.len() != states.ncols() {
            return Err(MarketDataError::InvalidArgument(format!(
                "{} asset labels for {} columns",
                assets.len(),
                states.ncols()
            )));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(MarketDataError::InvalidArgument("non-finite state entry".into()));
        }
        if let Some(n) = &norm {
            if n.len() != states.ncols() {
                return Err(MarketDataError::InvalidArgument(
                    "normalization metadata length mismatch".into(),
                ));
            }
            if states.iter().any(|v| *v < -1e-9 || *v > 1.0 + 1e-9) {
                return Err(MarketDataError::InvalidArgument(
                    "normalized entries outside [0, 1]".into(),
                ));
            }
        }
        Ok(Self { states, dt, t0, assets, norm })
    }

    pub fn n(&self) -> usize {
        self.states.nrows()
    }

    pub fn m(&self) -> usize {
        self.states.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn norm(&self) -> Option<&[(f64, f64)]> {
        self.norm.as_deref()
    }

    pub fn timestamp(&self, row: usize) -> f64 {
        self.t0 + row as f64 * self.dt
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.states.column(j).iter().copied().collect()
    }

    /// Contiguous row slice as a new trajectory (same clock, shifted origin).
    pub fn subwindow(&self, start_row: usize, len: usize) -> Result<Self, MarketDataError> {
        if start_row + len > self.n() {
            return Err(MarketDataError::InvalidArgument(format!(
                "subwindow {start_row}+{len} exceeds {} rows",
                self.n()
            )));
        }
        Trajectory::new(
            self.states.rows(start_row, len).into_owned(),
            self.dt,
            self.timestamp(start_row),
            self.assets.clone(),
            self.norm.clone(),
        )
    }

    /// Rows with `start <= t <= end` (unix seconds).
    pub fn window_by_time(&self, start: f64, end: f64) -> Result<Self, MarketDataError> {
        let first = (0..self.n()).find(|&i| self.timestamp(i) >= start);
        let last = (0..self.n()).rev().find(|&i| self.timestamp(i) <= end);
        match (first, last) {
            (Some(a), Some(b)) if b >= a => self.subwindow(a, b - a + 1),
            _ => Err(MarketDataError::TooShort { n: 0, min: 3 }),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), std::io::Error> {
        write!(w, "timestamp")?;
        for a in &self.assets {
            write!(w, ",{a}")?;
        }
        writeln!(w)?;
        for i in 0..self.n() {
            write!(w, "{}", format_unix(self.timestamp(i)))?;
            for j in 0..self.m() {
                write!(w, ",{}", self.states[(i, j)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads a trajectory CSV (header `timestamp,<asset>...`). The sampling
    /// must be uniform; normalization metadata is not persisted.
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self, MarketDataError> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| MarketDataError::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e),
        })?;
        let headers = rdr
            .headers()
            .map_err(|_| MarketDataError::MissingColumn("timestamp".into()))?
            .clone();
        if headers.get(0) != Some("timestamp") {
            return Err(MarketDataError::MissingColumn("timestamp".into()));
        }
        let assets: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let line = idx + 2;
            let rec = rec.map_err(|e| MarketDataError::UnparsableRow(line, e.to_string()))?;
            let t = parse_timestamp_f64(rec.get(0).unwrap_or(""))
                .ok_or_else(|| MarketDataError::UnparsableRow(line, "bad timestamp".into()))?;
            if let Some(&prev) = times.last() {
                if t <= prev {
                    return Err(MarketDataError::NonMonotoneTimestamps(line));
                }
            }
            times.push(t);
            if rec.len() != assets.len() + 1 {
                return Err(MarketDataError::UnparsableRow(line, "wrong field count".into()));
            }
            for f in rec.iter().skip(1) {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| MarketDataError::UnparsableRow(line, format!("bad value `{f}`")))?;
                vals.push(v);
            }
        }
        let n = times.len();
        if n < 3 {
            return Err(MarketDataError::TooShort { n, min: 3 });
        }
        let dt = times[1] - times[0];
        let tol = 1e-6 * dt.abs().max(1e-9);
        if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > tol) {
            return Err(MarketDataError::NonUniformSampling);
        }
        Trajectory::new(
            DMatrix::from_row_slice(n, assets.len(), &vals),
            dt,
            times[0],
            assets,
            None,
        )
    }
}

/// Force observations for field inference: `x` holds the interior states and
/// `y` the negated central second differences, one row per interior instant.
#[derive(Debug, Clone)]
pub struct GradientObservations {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    /// Rough initializer for the observation-noise variance.
    pub noise_hint: f64,
}

/// Parses one asset's OHLCV CSV. Timestamps may be integer unix seconds or
/// ISO-8601 UTC; rows must be strictly increasing in time.
pub fn parse_csv<P: AsRef<Path>>(
    path: P,
    schema: &CsvSchema,
) -> Result<Vec<PriceRecord>, MarketDataError> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| MarketDataError::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e),
        })?;
    let headers = rdr
        .headers()
        .map_err(|_| MarketDataError::MissingColumn(schema.timestamp.clone()))?
        .clone();
    let col = |name: &str| -> Result<usize, MarketDataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MarketDataError::MissingColumn(name.to_string()))
    };
    let (it, io, ih, il, ic, iv) = (
        col(&schema.timestamp)?,
        col(&schema.open)?,
        col(&schema.high)?,
        col(&schema.low)?,
        col(&schema.close)?,
        col(&schema.volume)?,
    );
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let rec = rec.map_err(|e| MarketDataError::UnparsableRow(line, e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let ts = parse_timestamp(field(it))
            .ok_or_else(|| MarketDataError::UnparsableRow(line, format!("bad timestamp `{}`", field(it))))?;
        let num = |i: usize| -> Result<f64, MarketDataError> {
            field(i)
                .parse()
                .map_err(|_| MarketDataError::UnparsableRow(line, format!("bad number `{}`", field(i))))
        };
        let rec = PriceRecord::new(ts, num(io)?, num(ih)?, num(il)?, num(ic)?, num(iv)?)
            .map_err(|why| MarketDataError::UnparsableRow(line, why))?;
        if let Some(prev) = out.last() {
            let prev: &PriceRecord = prev;
            if rec.timestamp <= prev.timestamp {
                return Err(MarketDataError::NonMonotoneTimestamps(line));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// Aligns per-asset series onto a shared uniform grid.
///
/// The grid is the multiples of `resample_secs` covered by every asset's
/// observed range; each grid value is the most recent bar at or before the
/// grid instant (forward fill), so sparse interior gaps are tolerated.
pub fn build_trajectory(
    series: &[(String, Vec<PriceRecord>)],
    field: PriceField,
    resample_secs: u64,
) -> Result<Trajectory, MarketDataError> {
    if resample_secs == 0 {
        return Err(MarketDataError::InvalidArgument("resample interval must be positive".into()));
    }
    if series.is_empty() {
        return Err(MarketDataError::InsufficientOverlap(3));
    }
    let step = resample_secs as i64;
    let mut lo = i64::MIN;
    let mut hi = i64::MAX;
    for (_, recs) in series {
        let (first, last) = match (recs.first(), recs.last()) {
            (Some(f), Some(l)) => (f.timestamp, l.timestamp),
            _ => return Err(MarketDataError::InsufficientOverlap(3)),
        };
        lo = lo.max(first.div_euclid(step) * step + if first.rem_euclid(step) == 0 { 0 } else { step });
        hi = hi.min(last.div_euclid(step) * step);
    }
    if hi < lo {
        return Err(MarketDataError::InsufficientOverlap(3));
    }
    let n = ((hi - lo) / step + 1) as usize;
    if n < 3 {
        return Err(MarketDataError::InsufficientOverlap(3));
    }
    let m = series.len();
    let mut states = DMatrix::zeros(n, m);
    for (j, (_, recs)) in series.iter().enumerate() {
        let mut cursor = 0usize;
        for i in 0..n {
            let t = lo + i as i64 * step;
            while cursor + 1 < recs.len() && recs[cursor + 1].timestamp <= t {
                cursor += 1;
            }
            // Forward fill: cursor points at the last bar with timestamp <= t
            // (guaranteed to exist because lo >= first timestamp).
            states[(i, j)] = field.of(&recs[cursor]);
        }
    }
    let assets = series.iter().map(|(a, _)| a.clone()).collect();
    Trajectory::new(states, resample_secs as f64, lo as f64, assets, None)
}

/// Min-max normalizes each asset onto [0, 1], recording the raw ranges.
pub fn normalize_minmax(traj: &Trajectory) -> Result<Trajectory, MarketDataError> {
    let mut norm = Vec::with_capacity(traj.m());
    let mut states = traj.states.clone();
    for j in 0..traj.m() {
        let col = traj.states.column(j);
        let min = col.min();
        let max = col.max();
        if !(max > min) {
            return Err(MarketDataError::DegenerateRange(traj.assets[j].clone()));
        }
        let span = max - min;
        for i in 0..traj.n() {
            states[(i, j)] = (states[(i, j)] - min) / span;
        }
        norm.push((min, max));
    }
    Trajectory::new(states, traj.dt, traj.t0, traj.assets.clone(), Some(norm))
}

/// Inverse of [`normalize_minmax`]; identity when no normalization is stored.
pub fn denormalize(traj: &Trajectory) -> Trajectory {
    let Some(norm) = &traj.norm else {
        return traj.clone();
    };
    let mut states = traj.states.clone();
    for j in 0..traj.m() {
        let (min, max) = norm[j];
        for i in 0..traj.n() {
            states[(i, j)] = min + states[(i, j)] * (max - min);
        }
    }
    Trajectory {
        states,
        dt: traj.dt,
        t0: traj.t0,
        assets: traj.assets.clone(),
        norm: None,
    }
}

/// Potential-gradient observations from negated central second differences.
///
/// For interior rows, y_i = -(x_{i+1} - 2 x_i + x_{i-1}) / dt^2, paired with
/// the interior state x_i. Both endpoints are dropped.
pub fn estimate_gradient_observations(
    traj: &Trajectory,
) -> Result<GradientObservations, MarketDataError> {
    let n = traj.n();
    if n < 3 {
        return Err(MarketDataError::TooShort { n, min: 3 });
    }
    let m = traj.m();
    let np = n - 2;
    let inv_dt2 = 1.0 / (traj.dt * traj.dt);
    let mut x = DMatrix::zeros(np, m);
    let mut y = DMatrix::zeros(np, m);
    for i in 0..np {
        for j in 0..m {
            let s = &traj.states;
            x[(i, j)] = s[(i + 1, j)];
            y[(i, j)] = -(s[(i + 2, j)] - 2.0 * s[(i + 1, j)] + s[(i, j)]) * inv_dt2;
        }
    }
    // Half the variance of successive differences estimates the white-noise
    // variance of y; it only seeds the trainer, which is free to leave it.
    let mut hint = 0.0;
    if np >= 2 {
        for j in 0..m {
            let mut mean = 0.0;
            for i in 0..np - 1 {
                mean += y[(i + 1, j)] - y[(i, j)];
            }
            mean /= (np - 1) as f64;
            let mut var = 0.0;
            for i in 0..np - 1 {
                let d = y[(i + 1, j)] - y[(i, j)] - mean;
                var += d * d;
            }
            hint += var / (np - 1) as f64 / 2.0;
        }
        hint /= m as f64;
    }
    Ok(GradientObservations { x, y, noise_hint: hint.max(1e-12) })
}

/// Unix seconds (possibly fractional) to ISO-8601 UTC.
pub fn format_unix(t: f64) -> String {
    let micros = (t * 1e6).round() as i64;
    let dt = DateTime::<Utc>::from_timestamp_micros(micros)
        .unwrap_or_else(|| DateTime::<Utc>::from_timestamp_micros(0).unwrap());
    if micros % 1_000_000 == 0 {
        dt.to_rfc3339_opts(SecondsFormat::Secs, true)
    } else {
        dt.to_rfc3339_opts(SecondsFormat::Micros, true)
    }
}

/// Integer unix seconds from an integer literal or ISO-8601 string.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    parse_timestamp_f64(s).map(|t| t.round() as i64)
}

/// Unix seconds from integer, float, ISO-8601 ("Z" or offset), a space
/// separated "date time" or a bare date (midnight UTC).
pub fn parse_timestamp_f64(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v as f64);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_micros() as f64 / 1e6);
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(naive) = chrono::NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc().timestamp() as f64);
        }
    }
    if let Ok(d) = chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp() as f64);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn rec(ts: i64, px: f64) -> PriceRecord {
        PriceRecord::new(ts, px, px, px, px, 1.0).unwrap()
    }

    #[test]
    fn parses_well_formed_rows() {
        let f = write_temp(
            "timestamp,open,high,low,close,volume\n\
             2021-04-13T00:00:00Z,100,101,99,100.5,10\n\
             1618272300,100.5,102,100,101,11\n",
        );
        let recs = parse_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].timestamp, 1618272000);
        assert_eq!(recs[1].timestamp, 1618272300);
        assert_eq!(recs[1].close, 101.0);
    }

    #[test]
    fn missing_column_and_empty_file() {
        let f = write_temp("timestamp,open,high,low,close\n1,1,2,0.5,1\n");
        match parse_csv(f.path(), &CsvSchema::default()) {
            Err(MarketDataError::MissingColumn(c)) => assert_eq!(c, "volume"),
            other => panic!("expected MissingColumn, got {other:?}"),
        }
        let f = write_temp("");
        assert!(matches!(
            parse_csv(f.path(), &CsvSchema::default()),
            Err(MarketDataError::MissingColumn(_))
        ));
    }

    #[test]
    fn rejects_garbage_and_bad_ohlc() {
        let f = write_temp(
            "timestamp,open,high,low,close,volume\n\
             10,1,2,0.5,1,1\n\
             20,abc,2,0.5,1,1\n",
        );
        assert!(matches!(
            parse_csv(f.path(), &CsvSchema::default()),
            Err(MarketDataError::UnparsableRow(3, _))
        ));
        // high < low violates the bar invariant
        let f = write_temp("timestamp,open,high,low,close,volume\n10,1,0.4,0.5,1,1\n");
        assert!(matches!(
            parse_csv(f.path(), &CsvSchema::default()),
            Err(MarketDataError::UnparsableRow(2, _))
        ));
    }

    #[test]
    fn rejects_duplicate_timestamps() {
        let f = write_temp(
            "timestamp,open,high,low,close,volume\n\
             10,1,2,0.5,1,1\n\
             10,1,2,0.5,1,1\n",
        );
        assert!(matches!(
            parse_csv(f.path(), &CsvSchema::default()),
            Err(MarketDataError::NonMonotoneTimestamps(3))
        ));
    }

    #[test]
    fn single_asset_passthrough() {
        let series = vec![("A".to_string(), vec![rec(0, 1.0), rec(1, 2.0), rec(2, 3.0)])];
        let t = build_trajectory(&series, PriceField::Close, 1).unwrap();
        assert_eq!(t.n(), 3);
        assert_eq!(t.m(), 1);
        assert_eq!(t.column(0), vec![1.0, 2.0, 3.0]);
        assert_eq!(t.dt(), 1.0);
    }

    #[test]
    fn alignment_is_range_intersection_with_forward_fill() {
        // Asset A covers t=0..600 at 60s, asset B covers t=120..720 with a gap.
        let a: Vec<PriceRecord> = (0..=10).map(|i| rec(i * 60, 100.0 + i as f64)).collect();
        let b = vec![rec(120, 50.0), rec(180, 51.0), rec(360, 54.0), rec(720, 60.0)];
        let t = build_trajectory(&[("A".into(), a), ("B".into(), b)], PriceField::Close, 60).unwrap();
        // Overlap grid: 120, 180, ..., 600.
        assert_eq!(t.t0(), 120.0);
        assert_eq!(t.n(), 9);
        // B forward-fills through its gap.
        assert_eq!(t.states()[(2, 1)], 51.0); // t=240
        assert_eq!(t.states()[(4, 1)], 54.0); // t=360
        assert_eq!(t.states()[(8, 1)], 54.0); // t=600
        assert_eq!(t.states()[(8, 0)], 110.0);
    }

    #[test]
    fn disjoint_ranges_fail() {
        let a = vec![rec(0, 1.0), rec(60, 1.0), rec(120, 1.0)];
        let b = vec![rec(600, 1.0), rec(660, 1.0), rec(720, 1.0)];
        assert!(matches!(
            build_trajectory(&[("A".into(), a), ("B".into(), b)], PriceField::Close, 60),
            Err(MarketDataError::InsufficientOverlap(3))
        ));
    }

    #[test]
    fn normalize_roundtrip_and_degenerate() {
        let series = vec![
            ("A".to_string(), vec![rec(0, 10.0), rec(1, 30.0), rec(2, 20.0)]),
            ("B".to_string(), vec![rec(0, 1.0), rec(1, 3.0), rec(2, 5.0)]),
        ];
        let t = build_trajectory(&series, PriceField::Close, 1).unwrap();
        let n = normalize_minmax(&t).unwrap();
        for v in n.states().iter() {
            assert!((0.0..=1.0).contains(v));
        }
        assert_eq!(n.states()[(0, 0)], 0.0);
        assert_eq!(n.states()[(1, 0)], 1.0);
        let back = denormalize(&n);
        for (u, v) in back.states().iter().zip(t.states().iter()) {
            assert_relative_eq!(u, v, max_relative = 1e-12);
        }

        let flat = vec![("F".to_string(), vec![rec(0, 2.0), rec(1, 2.0), rec(2, 2.0)])];
        let t = build_trajectory(&flat, PriceField::Close, 1).unwrap();
        assert!(matches!(
            normalize_minmax(&t),
            Err(MarketDataError::DegenerateRange(a)) if a == "F"
        ));
    }

    #[test]
    fn second_differences_of_parabola() {
        // x(t) = t^2 sampled at dt=1: every interior y is exactly -2.
        let states = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 4.0, 9.0]);
        let t = Trajectory::new(states, 1.0, 0.0, vec!["X".into()], None).unwrap();
        let obs = estimate_gradient_observations(&t).unwrap();
        assert_eq!(obs.x.nrows(), 2);
        assert_eq!(obs.x[(0, 0)], 1.0);
        assert_eq!(obs.x[(1, 0)], 4.0);
        assert_eq!(obs.y[(0, 0)], -2.0);
        assert_eq!(obs.y[(1, 0)], -2.0);
    }

    #[test]
    fn too_short_for_differences() {
        let states = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 4.0]);
        let t = Trajectory::new(states, 1.0, 0.0, vec!["X".into()], None).unwrap();
        assert!(estimate_gradient_observations(&t).is_ok());
        assert!(matches!(
            Trajectory::new(DMatrix::from_row_slice(2, 1, &[0.0, 1.0]), 1.0, 0.0, vec!["X".into()], None),
            Err(MarketDataError::TooShort { n: 2, min: 3 })
        ));
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let states = DMatrix::from_row_slice(3, 2, &[1.0, 4.0, 2.0, 5.0, 3.0, 6.5]);
        let t = Trajectory::new(states, 300.0, 1618272000.0, vec!["BTC".into(), "ETH".into()], None)
            .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(&buf).unwrap();
        let back = Trajectory::read_csv(f.path()).unwrap();
        assert_eq!(back.n(), 3);
        assert_eq!(back.assets(), t.assets());
        assert_eq!(back.dt(), 300.0);
        assert_eq!(back.t0(), 1618272000.0);
        for (u, v) in back.states().iter().zip(t.states().iter()) {
            assert_eq!(u, v);
        }
    }

    #[test]
    fn window_by_time_slices_inclusively() {
        let states = DMatrix::from_row_slice(6, 1, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let t = Trajectory::new(states, 10.0, 100.0, vec!["X".into()], None).unwrap();
        let w = t.window_by_time(110.0, 140.0).unwrap();
        assert_eq!(w.n(), 4);
        assert_eq!(w.t0(), 110.0);
        assert_eq!(w.column(0), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn timestamp_formats() {
        assert_eq!(parse_timestamp("1618272000"), Some(1618272000));
        assert_eq!(parse_timestamp("2021-04-13T00:00:00Z"), Some(1618272000));
        assert_eq!(parse_timestamp_f64("2021-04-13"), Some(1618272000.0));
        assert_eq!(parse_timestamp_f64("2021-04-13 00:00:05"), Some(1618272005.0));
        assert_eq!(format_unix(1618272000.0), "2021-04-13T00:00:00Z");
        assert_eq!(format_unix(1618272000.25), "2021-04-13T00:00:00.250000Z");
        assert_eq!(parse_timestamp("not a time"), None);
    }
}
