//! Regenerates the bundled sample data under `data/`.
//!
//! The files are synthetic: smooth anchor splines (April, the run-up and
//! correction around the 2021 all-time highs) and decaying oscillations
//! (September, the ringdown after a crash), both dressed with seeded AR(1)
//! noise so they look like real OHLCV exports. Fixed seeds make every run
//! byte-identical; pass an output directory to write somewhere else.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

const HOUR: i64 = 3600;
const DAY: f64 = 86400.0;

/// Piecewise cubic Hermite through (x, y) anchors with central-difference
/// tangents, clamped to the end anchors outside the range.
fn spline(anchors: &[(f64, f64)], x: f64) -> f64 {
    let n = anchors.len();
    if x <= anchors[0].0 {
        return anchors[0].1;
    }
    if x >= anchors[n - 1].0 {
        return anchors[n - 1].1;
    }
    let mut i = 0;
    while anchors[i + 1].0 < x {
        i += 1;
    }
    let (x0, y0) = anchors[i];
    let (x1, y1) = anchors[i + 1];
    let h = x1 - x0;
    let slope = |a: usize, b: usize| (anchors[b].1 - anchors[a].1) / (anchors[b].0 - anchors[a].0);
    let m0 = if i == 0 { slope(0, 1) } else { slope(i - 1, i + 1) };
    let m1 = if i + 2 == n { slope(i, i + 1) } else { slope(i, i + 2) };
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m0 * h * (t3 - 2.0 * t2 + t)
        + y1 * (-2.0 * t3 + 3.0 * t2)
        + m1 * h * (t3 - t2)
}

/// Stationary AR(1) stream with unit marginal variance.
struct Ar1 {
    rho: f64,
    state: f64,
    rng: ChaCha12Rng,
}

impl Ar1 {
    fn new(rho: f64, seed: u64) -> Self {
        Self { rho, state: 0.0, rng: ChaCha12Rng::seed_from_u64(seed) }
    }

    fn next(&mut self) -> f64 {
        let eps: f64 = self.rng.sample(StandardNormal);
        self.state = self.rho * self.state + (1.0 - self.rho * self.rho).sqrt() * eps;
        self.state
    }
}

struct Bar {
    timestamp: i64,
    open: f64,
    high: f64,
    low: f64,
    close: f64,
    volume: f64,
}

/// Wraps a close-price path into OHLCV bars: each bar opens at the prior
/// close and gets a seeded wick on both sides.
fn bars_from_closes(t0: i64, step: i64, closes: &[f64], wick_frac: f64, base_volume: f64, seed: u64) -> Vec<Bar> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut bars = Vec::with_capacity(closes.len());
    for (k, &close) in closes.iter().enumerate() {
        let open = if k == 0 { close } else { closes[k - 1] };
        let up: f64 = rng.sample::<f64, _>(StandardNormal).abs() * wick_frac;
        let down: f64 = rng.sample::<f64, _>(StandardNormal).abs() * wick_frac;
        let vol_noise: f64 = rng.sample(StandardNormal);
        let high = open.max(close) * (1.0 + up);
        let low = open.min(close) * (1.0 - down);
        bars.push(Bar {
            timestamp: t0 + k as i64 * step,
            open,
            high,
            low,
            close,
            volume: base_volume * (0.35 + 0.65 * (0.4 * vol_noise).exp()),
        });
    }
    bars
}

/// Smoothstep ramp: 0 before `lo` days, 1 after `hi` days.
fn ramp(day: f64, lo: f64, hi: f64) -> f64 {
    let u = ((day - lo) / (hi - lo)).clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Intraday swing that switches on partway through the window: `amp` is the
/// fractional amplitude once the ramp between `on.0` and `on.1` completes.
/// The amplitude breathes slowly (`breath` = fraction, period in days,
/// phase) so consecutive cycles trace neighboring loops instead of one
/// fixed curve.
struct Swing {
    amp: f64,
    period_days: f64,
    phase: f64,
    on: (f64, f64),
    breath: (f64, f64, f64),
}

impl Swing {
    fn at(&self, day: f64) -> f64 {
        let tau = 2.0 * std::f64::consts::PI;
        let envelope = 1.0 + self.breath.0 * (tau * day / self.breath.1 + self.breath.2).cos();
        self.amp
            * envelope
            * ramp(day, self.on.0, self.on.1)
            * (tau * day / self.period_days + self.phase).cos()
    }
}

/// Anchor-spline close path with a gated intraday swing and multiplicative
/// AR(1) noise. Anchors are (day offset, price); the noise fraction is the
/// per-bar stationary std. High AR persistence keeps the noise slow next to
/// the bar spacing, so hour-scale curvature comes from the swing, not the
/// noise.
fn trending_closes(
    step: i64,
    n: usize,
    anchors: &[(f64, f64)],
    swing: &Swing,
    noise_frac: f64,
    seed: u64,
) -> Vec<f64> {
    let mut ar = Ar1::new(0.93, seed);
    (0..n)
        .map(|k| {
            let day = (k as i64 * step) as f64 / DAY;
            spline(anchors, day) * (1.0 + swing.at(day) + noise_frac * ar.next())
        })
        .collect()
}

/// Decaying oscillation around a flat base: the post-crash ringdown. The
/// noise envelope decays with the oscillation so late-window separations
/// keep contracting.
fn ringdown_closes(
    step: i64,
    n: usize,
    base: f64,
    amp: f64,
    period_days: f64,
    decay_days: f64,
    phase: f64,
    noise_frac: f64,
    seed: u64,
) -> Vec<f64> {
    let mut ar = Ar1::new(0.5, seed);
    (0..n)
        .map(|k| {
            let t = (k as i64 * step) as f64 / DAY;
            let envelope = (-t / decay_days).exp();
            let swing = amp * envelope * (2.0 * std::f64::consts::PI * t / period_days + phase).cos();
            base * (1.0 + swing + noise_frac * envelope * ar.next())
        })
        .collect()
}

fn write_csv(path: &Path, bars: &[Bar]) {
    let mut f = std::fs::File::create(path).unwrap_or_else(|e| panic!("create {}: {e}", path.display()));
    writeln!(f, "timestamp,open,high,low,close,volume").unwrap();
    for b in bars {
        writeln!(
            f,
            "{},{:.2},{:.2},{:.2},{:.2},{:.3}",
            b.timestamp, b.open, b.high, b.low, b.close, b.volume
        )
        .unwrap();
    }
    println!("wrote {} ({} bars)", path.display(), bars.len());
}

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data".to_string());
    let dir = Path::new(&dir);
    std::fs::create_dir_all(dir).unwrap_or_else(|e| panic!("create {}: {e}", dir.display()));

    // April 2021 hourly window: 2021-04-13T00:00:00Z plus 26 days inclusive.
    let apr_t0: i64 = 1_618_272_000;
    let apr_n = 26 * 24 + 1;

    // Shape: ten days of top-and-crash, then the rest of the window churns
    // around a settled level. Once the churn is on, the two assets swing
    // with one shared period a quarter cycle apart, so the joint close path
    // orbits its center instead of retracing one diagonal; the period sits
    // off any whole number of bars so successive cycles land on fresh
    // phases.
    let btc_apr = [
        (0.0, 63_500.0),
        (1.0, 64_300.0),
        (2.0, 63_800.0),
        (3.5, 59_500.0),
        (5.0, 54_800.0),
        (6.5, 50_800.0),
        (7.5, 48_300.0),
        (8.3, 49_800.0),
        (9.5, 52_600.0),
        (10.5, 54_300.0),
        (12.0, 54_900.0),
        (14.0, 54_500.0),
        (16.0, 55_000.0),
        (18.0, 54_400.0),
        (20.0, 54_900.0),
        (22.0, 54_500.0),
        (24.0, 54_800.0),
        (26.0, 54_600.0),
    ];
    let btc_swing = Swing {
        amp: 0.05,
        period_days: 0.45,
        phase: 0.0,
        on: (10.0, 12.0),
        breath: (0.3, 5.3, 0.7),
    };
    let closes = trending_closes(HOUR, apr_n, &btc_apr, &btc_swing, 0.001, 11);
    write_csv(
        &dir.join("btc_apr2021_1h.csv"),
        &bars_from_closes(apr_t0, HOUR, &closes, 0.0025, 2_400.0, 12),
    );

    let eth_apr = [
        (0.0, 2_295.0),
        (1.0, 2_440.0),
        (2.5, 2_620.0),
        (4.0, 2_750.0),
        (5.5, 2_900.0),
        (7.0, 3_050.0),
        (8.5, 3_220.0),
        (10.0, 3_380.0),
        (12.0, 3_470.0),
        (14.0, 3_430.0),
        (16.0, 3_490.0),
        (18.0, 3_450.0),
        (20.0, 3_500.0),
        (22.0, 3_460.0),
        (24.0, 3_510.0),
        (26.0, 3_480.0),
    ];
    let eth_swing = Swing {
        amp: 0.05,
        period_days: 0.45,
        phase: -std::f64::consts::FRAC_PI_2,
        on: (10.0, 12.0),
        breath: (0.3, 5.3, 0.7),
    };
    let closes = trending_closes(HOUR, apr_n, &eth_apr, &eth_swing, 0.001, 21);
    write_csv(
        &dir.join("eth_apr2021_1h.csv"),
        &bars_from_closes(apr_t0, HOUR, &closes, 0.003, 41_000.0, 22),
    );

    // September 2021 5-minute window: 2021-09-08T00:00:00Z plus 3 days
    // inclusive, the settling phase after the Sep-7 crash.
    let sep_t0: i64 = 1_631_059_200;
    let sep_step: i64 = 300;
    let sep_n = 3 * 288 + 1;

    // Both series ring with one shared period and decay rate, ETH lagging
    // BTC by a quarter cycle. In the joint price plane that traces a
    // logarithmic spiral, which never revisits itself: every close state
    // pair sits at the same oscillation phase, so pairwise separations
    // contract at the envelope rate and the window is measurably stable.
    let closes = ringdown_closes(sep_step, sep_n, 46_200.0, 0.05, 2.0 / 24.0, 1.1, 0.0, 0.000004, 31);
    write_csv(
        &dir.join("btc_sep2021_5m.csv"),
        &bars_from_closes(sep_t0, sep_step, &closes, 0.0006, 190.0, 32),
    );

    let closes = ringdown_closes(
        sep_step,
        sep_n,
        3_330.0,
        0.055,
        2.0 / 24.0,
        1.1,
        -std::f64::consts::FRAC_PI_2,
        0.000004,
        51,
    );
    write_csv(
        &dir.join("eth_sep2021_5m.csv"),
        &bars_from_closes(sep_t0, sep_step, &closes, 0.0008, 2_600.0, 52),
    );
}
