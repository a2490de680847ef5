//! Radix-2 FFT, Hann-windowed periodogram and breathing-rate estimation by
//! spectral peak picking.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Channel, TrialRecord};

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("FFT length {0} is not a power of two")]
    NonPowerOfTwoLength(usize),
    #[error("signal has {0} samples, need at least {MIN_SAMPLES}")]
    TooShort(usize),
    #[error("signal contains a non-finite sample at index {0}")]
    NonFiniteInput(usize),
    #[error("no spectral bins inside band ({0}, {1}) Hz")]
    EmptyBand(f64, f64),
    #[error("band ({lo}, {hi}) Hz is not inside (0, {nyquist}) Hz")]
    InvalidBand { lo: f64, hi: f64, nyquist: f64 },
}

pub const MIN_SAMPLES: usize = 16;

/// Default search band, roughly 3 to 180 breaths per minute.
pub const DEFAULT_BAND: (f64, f64) = (0.05, 3.0);

/// In-place iterative Cooley–Tukey transform. The inverse is scaled by 1/N.
pub fn fft_in_place(data: &mut [Complex64], inverse: bool) -> Result<(), SpectralError> {
    let n = data.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(SpectralError::NonPowerOfTwoLength(n));
    }
    if n == 1 {
        return Ok(());
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }

    // twiddles e^{∓2πik/N}, evaluated directly rather than by recurrence
    let sign = if inverse { 1.0 } else { -1.0 };
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| {
            let (s, c) = (sign * 2.0 * PI * k as f64 / n as f64).sin_cos();
            Complex64::new(c, s)
        })
        .collect();

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * step];
                let a = data[start + k];
                let b = data[start + k + half] * w;
                data[start + k] = a + b;
                data[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }

    if inverse {
        let scale = 1.0 / n as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(())
}

pub fn fft_radix2(signal: &[Complex64], inverse: bool) -> Result<Vec<Complex64>, SpectralError> {
    let mut out = signal.to_vec();
    fft_in_place(&mut out, inverse)?;
    Ok(out)
}

/// One-sided power spectral density on a uniform grid `0..=fs/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub n_fft: usize,
    pub fs: f64,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        self.fs / self.n_fft as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "freq_hz,power")?;
        for (f, p) in self.freqs.iter().zip(&self.power) {
            writeln!(w, "{f},{p}")?;
        }
        Ok(())
    }
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    // symmetric form
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

fn check_signal(signal: &[f64]) -> Result<(), SpectralError> {
    if signal.len() < MIN_SAMPLES {
        return Err(SpectralError::TooShort(signal.len()));
    }
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(SpectralError::NonFiniteInput(i));
    }
    Ok(())
}

/// Mean-detrended, Hann-windowed periodogram zero-padded to the smallest
/// power of two `>= 4n`. Power is `|X_k|² / (fs · Σw²)`, doubled on the
/// interior bins to fold in the negative frequencies.
pub fn periodogram(signal: &[f64], fs: f64) -> Result<Spectrum, SpectralError> {
    check_signal(signal)?;
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let window = hann(n);
    let energy: f64 = window.iter().map(|w| w * w).sum();

    let n_fft = (4 * n).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for ((slot, &x), &w) in buf.iter_mut().zip(signal).zip(&window) {
        slot.re = (x - mean) * w;
    }
    fft_in_place(&mut buf, false)?;

    let bins = n_fft / 2 + 1;
    let scale = 1.0 / (fs * energy);
    let power = (0..bins)
        .map(|k| {
            let p = buf[k].norm_sqr() * scale;
            if k == 0 || k == n_fft / 2 {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    let freqs = (0..bins).map(|k| k as f64 * fs / n_fft as f64).collect();
    Ok(Spectrum {
        freqs,
        power,
        n_fft,
        fs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrEstimate {
    pub bpm: f64,
    pub peak_freq_hz: f64,
    pub peak_power: f64,
    pub band: (f64, f64),
}

fn check_band(band: (f64, f64), fs: f64) -> Result<(), SpectralError> {
    let nyquist = fs / 2.0;
    let (lo, hi) = band;
    if !(lo > 0.0 && hi < nyquist && lo < hi) {
        return Err(SpectralError::InvalidBand { lo, hi, nyquist });
    }
    Ok(())
}

/// Picks the strongest periodogram bin inside `band` and refines it with a
/// three-point parabola through the log-power of the peak and its neighbours.
pub fn peak_in_band(spectrum: &Spectrum, band: (f64, f64)) -> Result<BrEstimate, SpectralError> {
    check_band(band, spectrum.fs)?;
    let (lo, hi) = band;
    let mut best: Option<usize> = None;
    for (k, &f) in spectrum.freqs.iter().enumerate() {
        if f < lo || f > hi {
            continue;
        }
        if best.is_none_or(|b| spectrum.power[k] > spectrum.power[b]) {
            best = Some(k);
        }
    }
    let k = best.ok_or(SpectralError::EmptyBand(lo, hi))?;

    let mut offset = 0.0;
    if k > 0 && k + 1 < spectrum.power.len() {
        let (a, b, c) = (
            spectrum.power[k - 1],
            spectrum.power[k],
            spectrum.power[k + 1],
        );
        if a > 0.0 && b > 0.0 && c > 0.0 {
            let (a, b, c) = (a.ln(), b.ln(), c.ln());
            let denom = a - 2.0 * b + c;
            if denom < 0.0 {
                offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
            }
        }
    }
    let peak_freq_hz = ((k as f64 + offset) * spectrum.bin_width()).clamp(lo, hi);
    Ok(BrEstimate {
        bpm: 60.0 * peak_freq_hz,
        peak_freq_hz,
        peak_power: spectrum.power[k],
        band,
    })
}

pub fn estimate_breathing_rate(
    signal: &[f64],
    fs: f64,
    band: (f64, f64),
) -> Result<BrEstimate, SpectralError> {
    check_signal(signal)?;
    check_band(band, fs)?;
    let spectrum = periodogram(signal, fs)?;
    peak_in_band(&spectrum, band)
}

/// Per-channel breathing-rate estimates for one trial with their median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrConsensus {
    pub pressure: BrEstimate,
    pub flow: BrEstimate,
    pub tidal_volume: BrEstimate,
    pub consensus_bpm: f64,
    pub max_pairwise_diff_bpm: f64,
}

pub const CONSENSUS_CHANNELS: [Channel; 3] =
    [Channel::Pressure, Channel::Flow, Channel::TidalVolume];

pub fn br_consensus(record: &TrialRecord, band: (f64, f64)) -> Result<BrConsensus, SpectralError> {
    let fs = record.meta.nominal_fs;
    let pressure = estimate_breathing_rate(&record.pressure, fs, band)?;
    let flow = estimate_breathing_rate(&record.flow, fs, band)?;
    let tidal_volume = estimate_breathing_rate(&record.tidal_volume, fs, band)?;
    let mut bpm = [pressure.bpm, flow.bpm, tidal_volume.bpm];
    bpm.sort_by(f64::total_cmp);
    Ok(BrConsensus {
        pressure,
        flow,
        tidal_volume,
        consensus_bpm: bpm[1],
        max_pairwise_diff_bpm: bpm[2] - bpm[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// O(N²) DFT, the reference for the fast transform.
    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let ang = -2.0 * PI * (k * j) as f64 / n as f64;
                        v * Complex64::new(ang.cos(), ang.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn random_complex(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn sine(f: f64, fs: f64, secs: f64) -> Vec<f64> {
        let n = (fs * secs).round() as usize;
        (0..n)
            .map(|i| (2.0 * PI * f * i as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn impulse_and_constant() {
        let x = fft_radix2(&[c(1.0), c(0.0), c(0.0), c(0.0)], false).unwrap();
        assert!(x.iter().all(|v| (*v - c(1.0)).norm() < 1e-15));
        let x = fft_radix2(&[c(1.0); 4], false).unwrap();
        assert!((x[0] - c(4.0)).norm() < 1e-15);
        assert!(x[1..].iter().all(|v| v.norm() < 1e-15));
        assert_eq!(fft_radix2(&[c(2.0)], false).unwrap(), vec![c(2.0)]);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert_eq!(
            fft_radix2(&[c(0.0); 6], false),
            Err(SpectralError::NonPowerOfTwoLength(6))
        );
        assert_eq!(
            fft_radix2(&[], false),
            Err(SpectralError::NonPowerOfTwoLength(0))
        );
    }

    #[test]
    fn matches_naive_dft_and_round_trips() {
        for n in [2, 8, 64, 256] {
            let x = random_complex(n, n as u64);
            let fast = fft_radix2(&x, false).unwrap();
            for (a, b) in fast.iter().zip(naive_dft(&x)) {
                assert!((a - b).norm() < 1e-9 * n as f64);
            }
            let back = fft_radix2(&fast, true).unwrap();
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn linearity() {
        let x = random_complex(128, 1);
        let y = random_complex(128, 2);
        let (a, b) = (Complex64::new(0.7, -1.3), Complex64::new(-2.1, 0.4));
        let mix: Vec<_> = x.iter().zip(&y).map(|(&u, &v)| a * u + b * v).collect();
        let fx = fft_radix2(&x, false).unwrap();
        let fy = fft_radix2(&y, false).unwrap();
        let fm = fft_radix2(&mix, false).unwrap();
        for k in 0..128 {
            assert!((fm[k] - (a * fx[k] + b * fy[k])).norm() < 1e-10);
        }
    }

    #[test]
    fn periodogram_peak_and_grid() {
        let s = periodogram(&sine(0.25, 100.0, 60.0), 100.0).unwrap();
        assert_eq!(s.n_fft, 32768);
        assert_eq!(s.freqs.len(), s.n_fft / 2 + 1);
        assert_eq!(s.freqs[0], 0.0);
        assert!(s.freqs.windows(2).all(|w| w[1] > w[0]));
        assert!(s.power.iter().all(|&p| p >= 0.0));
        let k = (0..s.power.len())
            .max_by(|&a, &b| s.power[a].total_cmp(&s.power[b]))
            .unwrap();
        assert!((s.freqs[k] - 0.25).abs() <= s.bin_width());
    }

    #[test]
    fn constant_signal_has_no_power() {
        let s = periodogram(&[3.5; 100], 100.0).unwrap();
        assert!(s.power.iter().all(|&p| p <= 1e-20));
    }

    #[test]
    fn periodogram_deterministic_and_parseval() {
        let mut rng = rng_from_seed(5);
        let x: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = periodogram(&x, 50.0).unwrap();
        assert_eq!(a, periodogram(&x, 50.0).unwrap());

        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let w = hann(x.len());
        let windowed_var = x
            .iter()
            .zip(&w)
            .map(|(v, w)| ((v - mean) * w).powi(2))
            .sum::<f64>()
            / w.iter().map(|w| w * w).sum::<f64>();
        let total: f64 = a.power.iter().sum::<f64>() * a.bin_width();
        assert!((total - windowed_var).abs() <= 0.05 * windowed_var);
    }

    #[test]
    fn periodogram_input_checks() {
        assert_eq!(periodogram(&[1.0; 8], 100.0), Err(SpectralError::TooShort(8)));
        let mut x = vec![0.0; 32];
        x[3] = f64::NAN;
        assert_eq!(periodogram(&x, 100.0), Err(SpectralError::NonFiniteInput(3)));
    }

    #[test]
    fn breathing_rate_of_pure_tones() {
        let e = estimate_breathing_rate(&sine(0.25, 100.0, 60.0), 100.0, DEFAULT_BAND).unwrap();
        assert!((e.bpm - 15.0).abs() <= 0.2, "{}", e.bpm);
        assert!((e.bpm - 60.0 * e.peak_freq_hz).abs() < 1e-12);
        let e = estimate_breathing_rate(&sine(1.5, 100.0, 60.0), 100.0, DEFAULT_BAND).unwrap();
        assert!((e.bpm - 90.0).abs() <= 0.2, "{}", e.bpm);
        assert!(e.band.0 <= e.peak_freq_hz && e.peak_freq_hz <= e.band.1);
    }

    #[test]
    fn band_errors() {
        let x = sine(0.25, 100.0, 10.0);
        assert!(matches!(
            estimate_breathing_rate(&x, 100.0, (0.1, 60.0)),
            Err(SpectralError::InvalidBand { .. })
        ));
        // narrower than one bin and between grid points
        let s = periodogram(&x, 100.0).unwrap();
        let w = s.bin_width();
        assert!(matches!(
            peak_in_band(&s, (10.1 * w, 10.2 * w)),
            Err(SpectralError::EmptyBand(..))
        ));
        assert_eq!(
            estimate_breathing_rate(&x[..10], 100.0, DEFAULT_BAND),
            Err(SpectralError::TooShort(10))
        );
    }

    #[test]
    fn spectrum_csv_has_header_and_one_row_per_bin() {
        let s = periodogram(&sine(1.0, 20.0, 2.0), 20.0).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("freq_hz,power"));
        assert_eq!(text.lines().count(), s.freqs.len() + 1);
    }
}
