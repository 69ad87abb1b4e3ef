//! Morlet continuous wavelet transform, cross-wavelet spectrum, and
//! smoothed squared coherence with phase.
//!
//! The transform is carried out as an FFT convolution against the scaled,
//! 1/a-normalized wavelet kernel; coherence smoothing follows the usual
//! scheme of a Gaussian running average in time (width proportional to
//! scale) followed by a boxcar across scales spanning 0.6 octave.

use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WaveletError {
    #[error("series has {n} samples, need at least {min}")]
    TooShort { n: usize, min: usize },
    #[error("sampling step must be positive and finite")]
    NonUniformSampling,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone)]
pub struct WaveletSettings {
    /// Central frequency of the Morlet wavelet.
    pub omega0: f64,
    /// Scale resolution: voices per octave.
    pub voices: usize,
}

impl Default for WaveletSettings {
    fn default() -> Self {
        Self { omega0: 6.0, voices: 12 }
    }
}

/// Squared coherence and phase over the time-scale plane.
pub struct CoherenceMap {
    /// Time offsets from the start of the series, seconds.
    pub times: Vec<f64>,
    /// Analysis scales, seconds, strictly increasing.
    pub scales: Vec<f64>,
    /// S x T squared coherence in [0, 1].
    pub r2: DMatrix<f64>,
    /// S x T phase of the smoothed cross spectrum, radians in (-pi, pi].
    pub phase: DMatrix<f64>,
    /// Largest scale free of edge effects at each time.
    pub coi: Vec<f64>,
    /// Largest raw r2 before clamping, for diagnostics.
    pub r2_preclamp_max: f64,
}

impl CoherenceMap {
    /// Whether (scale index, time index) lies inside the cone of influence.
    pub fn in_coi(&self, scale_idx: usize, time_idx: usize) -> bool {
        self.scales[scale_idx] <= self.coi[time_idx]
    }
}

/// Morlet mother wavelet pi^(-1/4) e^(i omega0 t) e^(-t^2/2).
pub fn morlet(t: f64, omega0: f64) -> Complex<f64> {
    let envelope = std::f64::consts::PI.powf(-0.25) * (-0.5 * t * t).exp();
    Complex::new((omega0 * t).cos(), (omega0 * t).sin()) * envelope
}

/// Dyadic scale grid with `voices` scales per octave, from 2 dt up to a
/// quarter of the series duration.
pub fn default_scales(n: usize, dt: f64, voices: usize) -> Vec<f64> {
    let smallest = 2.0 * dt;
    let largest = n as f64 * dt / 4.0;
    let mut scales = Vec::new();
    let mut j = 0u32;
    loop {
        let s = smallest * 2f64.powf(j as f64 / voices as f64);
        if s > largest * (1.0 + 1e-12) {
            break;
        }
        scales.push(s);
        j += 1;
    }
    scales
}

fn next_pow2(n: usize) -> usize {
    let mut p = 1;
    while p < n {
        p <<= 1;
    }
    p
}

/// Continuous wavelet transform of a uniformly sampled series: one row per
/// scale, W(a, b) = (1/a) sum_t x(t) conj(psi)((t - b)/a) dt.
pub fn cwt(
    x: &[f64],
    dt: f64,
    scales: &[f64],
    omega0: f64,
) -> Result<DMatrix<Complex<f64>>, WaveletError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(WaveletError::NonUniformSampling);
    }
    let n = x.len();
    if n < 8 {
        return Err(WaveletError::TooShort { n, min: 8 });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(WaveletError::InvalidArgument("non-finite sample".into()));
    }
    if scales.is_empty() || scales.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(WaveletError::InvalidArgument("scales must be positive".into()));
    }

    // The Gaussian envelope is below 1.3e-14 beyond eight scale widths, so
    // the kernel is truncated there.
    let half_support = |a: f64| (8.0 * a / dt).ceil() as usize;
    let u_max = scales.iter().fold(1usize, |acc, &a| acc.max(half_support(a)));
    let len = next_pow2(n + 2 * u_max + 1);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(len);
    let ifft = planner.plan_fft_inverse(len);

    let mut xf = vec![Complex::new(0.0, 0.0); len];
    for (i, &v) in x.iter().enumerate() {
        xf[i] = Complex::new(v, 0.0);
    }
    fft.process(&mut xf);

    let rows: Vec<Vec<Complex<f64>>> = scales
        .par_iter()
        .map(|&a| {
            // Correlation with conj(psi)((t-b)/a) is a convolution against
            // h(k) = (dt/a) psi(k dt/a), thanks to conj(psi(-t)) = psi(t).
            let u = half_support(a) as isize;
            let mut h = vec![Complex::new(0.0, 0.0); len];
            for k in -u..=u {
                let idx = ((k + len as isize) as usize) % len;
                h[idx] = morlet(k as f64 * dt / a, omega0) * (dt / a);
            }
            fft.process(&mut h);
            for (hv, xv) in h.iter_mut().zip(&xf) {
                *hv *= xv;
            }
            ifft.process(&mut h);
            let norm = 1.0 / len as f64;
            h[..n].iter().map(|v| v * norm).collect()
        })
        .collect();

    let mut out = DMatrix::from_element(scales.len(), n, Complex::new(0.0, 0.0));
    for (s, row) in rows.into_iter().enumerate() {
        for (b, v) in row.into_iter().enumerate() {
            out[(s, b)] = v;
        }
    }
    Ok(out)
}

/// Gaussian running average along one scale row, standard deviation
/// `sigma` samples, truncated at four standard deviations with the weights
/// renormalized near the edges.
fn smooth_time(row: &[Complex<f64>], sigma: f64) -> Vec<Complex<f64>> {
    let n = row.len();
    let hw = (4.0 * sigma).ceil().max(1.0) as isize;
    let weights: Vec<f64> =
        (-hw..=hw).map(|u| (-0.5 * (u as f64 / sigma).powi(2)).exp()).collect();
    (0..n as isize)
        .map(|b| {
            let mut acc = Complex::new(0.0, 0.0);
            let mut wsum = 0.0;
            for (wi, u) in (-hw..=hw).enumerate() {
                let t = b + u;
                if t >= 0 && t < n as isize {
                    let w = weights[wi];
                    acc += row[t as usize] * w;
                    wsum += w;
                }
            }
            acc / wsum
        })
        .collect()
}

/// Boxcar average across scale rows with the given half-width, renormalized
/// at the spectrum's ends.
fn smooth_scale(mat: &DMatrix<Complex<f64>>, hw: usize) -> DMatrix<Complex<f64>> {
    let s = mat.nrows();
    let t = mat.ncols();
    DMatrix::from_fn(s, t, |si, ti| {
        let lo = si.saturating_sub(hw);
        let hi = (si + hw).min(s - 1);
        let mut acc = Complex::new(0.0, 0.0);
        for row in lo..=hi {
            acc += mat[(row, ti)];
        }
        acc / (hi - lo + 1) as f64
    })
}

/// Smoothed squared wavelet coherence and phase of two equal-length series.
pub fn coherence(
    x: &[f64],
    y: &[f64],
    dt: f64,
    settings: &WaveletSettings,
) -> Result<CoherenceMap, WaveletError> {
    if x.len() != y.len() {
        return Err(WaveletError::InvalidArgument(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let scales = default_scales(x.len(), dt, settings.voices);
    let wx = cwt(x, dt, &scales, settings.omega0)?;
    let wy = cwt(y, dt, &scales, settings.omega0)?;
    let s = scales.len();
    let t = x.len();

    // Scale-weighted spectra: cross, and the two auto powers (kept complex
    // with zero imaginary part so one smoothing path serves all three).
    let mut cross = DMatrix::from_element(s, t, Complex::new(0.0, 0.0));
    let mut px = cross.clone();
    let mut py = cross.clone();
    for si in 0..s {
        let inv_a = 1.0 / scales[si];
        for ti in 0..t {
            let a = wx[(si, ti)];
            let b = wy[(si, ti)];
            cross[(si, ti)] = a * b.conj() * inv_a;
            px[(si, ti)] = Complex::new(a.norm_sqr() * inv_a, 0.0);
            py[(si, ti)] = Complex::new(b.norm_sqr() * inv_a, 0.0);
        }
    }

    let smooth = |mat: DMatrix<Complex<f64>>| -> DMatrix<Complex<f64>> {
        let rows: Vec<Vec<Complex<f64>>> = (0..s)
            .into_par_iter()
            .map(|si| {
                let row: Vec<Complex<f64>> = mat.row(si).iter().copied().collect();
                smooth_time(&row, scales[si] / dt)
            })
            .collect();
        let mut out = DMatrix::from_element(s, t, Complex::new(0.0, 0.0));
        for (si, row) in rows.into_iter().enumerate() {
            for (ti, v) in row.into_iter().enumerate() {
                out[(si, ti)] = v;
            }
        }
        smooth_scale(&out, (0.3 * settings.voices as f64).floor().max(1.0) as usize)
    };
    let cross_sm = smooth(cross);
    let px_sm = smooth(px);
    let py_sm = smooth(py);

    let mut r2 = DMatrix::zeros(s, t);
    let mut phase = DMatrix::zeros(s, t);
    let mut preclamp_max = 0.0f64;
    for si in 0..s {
        for ti in 0..t {
            let num = cross_sm[(si, ti)].norm_sqr();
            let den = px_sm[(si, ti)].re * py_sm[(si, ti)].re;
            let raw = if den > 0.0 { num / den } else { 0.0 };
            preclamp_max = preclamp_max.max(raw);
            r2[(si, ti)] = raw.clamp(0.0, 1.0);
            phase[(si, ti)] = cross_sm[(si, ti)].im.atan2(cross_sm[(si, ti)].re);
        }
    }

    let coi: Vec<f64> = (0..t)
        .map(|b| b.min(t - 1 - b) as f64 * dt / std::f64::consts::SQRT_2)
        .collect();
    Ok(CoherenceMap {
        times: (0..t).map(|b| b as f64 * dt).collect(),
        scales,
        r2,
        phase,
        coi,
        r2_preclamp_max: preclamp_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn mother_wavelet_at_zero() {
        let v = morlet(0.0, 6.0);
        assert_relative_eq!(v.re, std::f64::consts::PI.powf(-0.25), epsilon = 1e-12);
        assert_eq!(v.im, 0.0);
        assert!((v.re - 0.751126).abs() < 1e-6);
    }

    #[test]
    fn envelope_is_even() {
        for &t in &[0.3, 1.7, 2.9, 5.0] {
            assert_relative_eq!(morlet(t, 6.0).norm(), morlet(-t, 6.0).norm(), epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_energy_by_quadrature() {
        // Simpson's rule on |psi|^2 over [-8, 8]; the tail mass beyond is
        // far below the tolerance.
        let steps = 2048;
        let h = 16.0 / steps as f64;
        let f = |t: f64| morlet(t, 6.0).norm_sqr();
        let mut sum = f(-8.0) + f(8.0);
        for k in 1..steps {
            let t = -8.0 + k as f64 * h;
            sum += f(t) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let integral = sum * h / 3.0;
        assert!((integral - 1.0).abs() <= 1e-6, "energy {integral}");
    }

    #[test]
    fn zero_series_transforms_to_zero() {
        let x = vec![0.0; 64];
        let scales = default_scales(64, 1.0, 12);
        let w = cwt(&x, 1.0, &scales, 6.0).unwrap();
        assert!(w.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn transform_is_linear() {
        let n = 128;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin() + 0.2 * (i as f64 * 0.07).cos()).collect();
        let x3: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let scales = default_scales(n, 1.0, 12);
        let w = cwt(&x, 1.0, &scales, 6.0).unwrap();
        let w3 = cwt(&x3, 1.0, &scales, 6.0).unwrap();
        for (a, b) in w.iter().zip(w3.iter()) {
            assert!((a * 3.0 - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn sinusoid_peaks_at_matching_scale() {
        let n = 512;
        let period = 32.0;
        let x: Vec<f64> =
            (0..n).map(|i| (std::f64::consts::TAU * i as f64 / period).cos()).collect();
        let scales = default_scales(n, 1.0, 12);
        let w = cwt(&x, 1.0, &scales, 6.0).unwrap();
        let b = n / 2;
        let mut best = 0;
        for s in 1..scales.len() {
            if w[(s, b)].norm() > w[(best, b)].norm() {
                best = s;
            }
        }
        // The magnitude response of a pure tone peaks where a*omega equals
        // the central frequency: a = omega0 P / (2 pi).
        let expect = 6.0 * period / std::f64::consts::TAU;
        let voice = 2f64.powf(1.0 / 12.0).ln();
        let off = (scales[best] / expect).ln().abs() / voice;
        assert!(off <= 1.3, "peak at scale {} vs expected {expect}", scales[best]);
    }

    #[test]
    fn scale_grid_is_dyadic_and_bounded() {
        let scales = default_scales(1024, 2.0, 12);
        assert_relative_eq!(scales[0], 4.0, epsilon = 1e-12);
        assert!(*scales.last().unwrap() <= 1024.0 * 2.0 / 4.0 * (1.0 + 1e-9));
        for pair in scales.windows(2) {
            assert_relative_eq!(pair[1] / pair[0], 2f64.powf(1.0 / 12.0), epsilon = 1e-12);
        }
    }

    fn toy_series(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                (t * 0.2).sin() + 0.5 * (t * 0.045).cos() + 0.1 * (t * 0.91).sin()
            })
            .collect()
    }

    #[test]
    fn self_coherence_is_one_with_zero_phase() {
        let x = toy_series(256);
        let map = coherence(&x, &x, 1.0, &WaveletSettings::default()).unwrap();
        for s in 0..map.scales.len() {
            for t in 0..map.times.len() {
                if map.in_coi(s, t) {
                    assert!(map.r2[(s, t)] >= 1.0 - 1e-6, "r2 {}", map.r2[(s, t)]);
                    assert!(map.phase[(s, t)].abs() <= 1e-3);
                }
            }
        }
    }

    #[test]
    fn negated_series_is_coherent_in_antiphase() {
        let x = toy_series(256);
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let map = coherence(&x, &y, 1.0, &WaveletSettings::default()).unwrap();
        for s in 0..map.scales.len() {
            for t in 0..map.times.len() {
                if map.in_coi(s, t) {
                    assert!(map.r2[(s, t)] >= 1.0 - 1e-6);
                    assert!(
                        (std::f64::consts::PI - map.phase[(s, t)].abs()).abs() <= 1e-3,
                        "phase {}",
                        map.phase[(s, t)]
                    );
                }
            }
        }
    }

    #[test]
    fn independent_noise_is_weakly_coherent() {
        let mut pooled = Vec::new();
        for pair in 0..3u64 {
            let mut ra = ChaCha12Rng::seed_from_u64(1000 + pair);
            let mut rb = ChaCha12Rng::seed_from_u64(2000 + pair);
            let x: Vec<f64> = (0..512).map(|_| StandardNormal.sample(&mut ra)).collect();
            let y: Vec<f64> = (0..512).map(|_| StandardNormal.sample(&mut rb)).collect();
            let map = coherence(&x, &y, 1.0, &WaveletSettings::default()).unwrap();
            for s in 0..map.scales.len() {
                for t in 0..map.times.len() {
                    if map.in_coi(s, t) {
                        pooled.push(map.r2[(s, t)]);
                    }
                }
            }
        }
        pooled.sort_by(f64::total_cmp);
        let median = pooled[pooled.len() / 2];
        assert!(median < 0.5, "median in-cone coherence {median}");
    }

    #[test]
    fn coherence_ignores_series_scaling() {
        let x = toy_series(200);
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + (i as f64 * 0.11).sin()).collect();
        let xs: Vec<f64> = x.iter().map(|v| 37.5 * v).collect();
        let a = coherence(&x, &y, 1.0, &WaveletSettings::default()).unwrap();
        let b = coherence(&xs, &y, 1.0, &WaveletSettings::default()).unwrap();
        for i in 0..a.r2.len() {
            assert!((a.r2[i] - b.r2[i]).abs() <= 1e-10);
            assert!((a.phase[i] - b.phase[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn swapping_series_negates_phase() {
        let x = toy_series(200);
        let y: Vec<f64> = (0..200).map(|i| (i as f64 * 0.2 + 0.7).sin()).collect();
        let ab = coherence(&x, &y, 1.0, &WaveletSettings::default()).unwrap();
        let ba = coherence(&y, &x, 1.0, &WaveletSettings::default()).unwrap();
        for i in 0..ab.phase.len() {
            let wrapped = (ab.phase[i] + ba.phase[i]).sin();
            assert!(wrapped.abs() <= 1e-10, "phases {} and {}", ab.phase[i], ba.phase[i]);
        }
    }

    #[test]
    fn coherence_stays_in_bounds() {
        let x = toy_series(300);
        let y: Vec<f64> = (0..300).map(|i| (i as f64 * 0.13).cos() * 2.0).collect();
        let map = coherence(&x, &y, 1.0, &WaveletSettings::default()).unwrap();
        for v in map.r2.iter() {
            assert!((0.0..=1.0).contains(v));
        }
        assert!(map.r2_preclamp_max <= 1.0 + 1e-6);
    }

    #[test]
    fn short_series_is_rejected() {
        let x = vec![1.0; 5];
        assert!(matches!(
            cwt(&x, 1.0, &[2.0], 6.0),
            Err(WaveletError::TooShort { n: 5, min: 8 })
        ));
    }
}
