use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::geometry::{ArrayGeometry, Point3};
use crate::direction::Direction;
use crate::error::{Error, Result};

/// Maximum distance of the wearer's mouth below the array.
pub const SELF_MAX_DISTANCE_M: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    PureTone { freq_hz: f64 },
    BandNoise { lo_hz: f64, hi_hz: f64 },
    Chirp { lo_hz: f64, hi_hz: f64 },
}

impl SignalKind {
    pub(crate) fn validate(&self, sample_rate: f64) -> Result<()> {
        let nyquist = sample_rate / 2.0;
        match *self {
            SignalKind::PureTone { freq_hz } => {
                if !(freq_hz > 0.0 && freq_hz < nyquist) {
                    return Err(Error::invalid(format!(
                        "tone frequency {freq_hz} Hz must lie in (0, {nyquist}) Hz"
                    )));
                }
            }
            SignalKind::BandNoise { lo_hz, hi_hz } | SignalKind::Chirp { lo_hz, hi_hz } => {
                if !(lo_hz >= 0.0 && lo_hz < hi_hz && hi_hz <= nyquist) {
                    return Err(Error::invalid(format!(
                        "band [{lo_hz}, {hi_hz}] Hz must satisfy 0 <= lo < hi <= {nyquist}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Caps band and chirp upper edges at `max_hz`. Tones are left alone so
    /// that an out-of-range tone is still reported by validation.
    pub fn band_limited(self, max_hz: f64) -> SignalKind {
        match self {
            SignalKind::BandNoise { lo_hz, hi_hz } if hi_hz > max_hz => SignalKind::BandNoise {
                lo_hz: lo_hz.min(max_hz / 2.0),
                hi_hz: max_hz,
            },
            SignalKind::Chirp { lo_hz, hi_hz } if hi_hz > max_hz => SignalKind::Chirp {
                lo_hz: lo_hz.min(max_hz / 2.0),
                hi_hz: max_hz,
            },
            other => other,
        }
    }

    /// Scales every frequency by `factor`.
    pub fn scaled(self, factor: f64) -> SignalKind {
        match self {
            SignalKind::PureTone { freq_hz } => SignalKind::PureTone {
                freq_hz: freq_hz * factor,
            },
            SignalKind::BandNoise { lo_hz, hi_hz } => SignalKind::BandNoise {
                lo_hz: lo_hz * factor,
                hi_hz: hi_hz * factor,
            },
            SignalKind::Chirp { lo_hz, hi_hz } => SignalKind::Chirp {
                lo_hz: lo_hz * factor,
                hi_hz: hi_hz * factor,
            },
        }
    }
}

/// One sound source placed around (or on) the wearer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub direction: Direction,
    /// Degrees clockwise from front; ignored for `self`.
    pub azimuth_deg: f64,
    pub distance_m: f64,
    pub signal: SignalKind,
    /// Sensor-noise SNR in dB; `None` means noiseless.
    pub snr_db: Option<f64>,
    /// Received RMS level at 1 m, full-scale units.
    #[serde(default = "default_level")]
    pub level_rms: f64,
    /// Sound-class name (e.g. "siren"); informational for the simulator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sound_class: Option<String>,
}

fn default_level() -> f64 {
    0.08
}

impl SourceSpec {
    pub fn far_field(direction: Direction, azimuth_deg: f64, distance_m: f64, signal: SignalKind) -> Self {
        Self {
            direction,
            azimuth_deg,
            distance_m,
            signal,
            snr_db: None,
            level_rms: default_level(),
            sound_class: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance_m.is_finite() && self.distance_m > 0.0) {
            return Err(Error::invalid(format!(
                "distance must be positive, got {}",
                self.distance_m
            )));
        }
        if !(self.level_rms.is_finite() && self.level_rms > 0.0) {
            return Err(Error::invalid("level_rms must be positive"));
        }
        if self.snr_db.is_some_and(|s| !s.is_finite()) {
            return Err(Error::invalid("snr_db must be finite when present"));
        }
        if self.direction == Direction::SelfVoice {
            if self.distance_m > SELF_MAX_DISTANCE_M {
                return Err(Error::invalid(format!(
                    "self source must be within {SELF_MAX_DISTANCE_M} m, got {}",
                    self.distance_m
                )));
            }
        } else if !self.direction.contains_azimuth(self.azimuth_deg) {
            return Err(Error::invalid(format!(
                "azimuth {}° is outside the {} sector",
                self.azimuth_deg, self.direction
            )));
        }
        Ok(())
    }

    /// Source position in the device frame. External sources sit in the array
    /// plane; the wearer's mouth sits directly below the centroid.
    pub fn position(&self, geometry: &ArrayGeometry) -> Point3 {
        let c = geometry.centroid();
        if self.direction == Direction::SelfVoice {
            return [c[0], c[1], c[2] - self.distance_m];
        }
        let az = self.azimuth_deg.to_radians();
        [
            c[0] + self.distance_m * az.sin(),
            c[1] + self.distance_m * az.cos(),
            c[2],
        ]
    }
}

/// Renders the unit-RMS source waveform as seen after each of `delays` seconds.
///
/// Tones and chirps are evaluated in closed form at `t - delay`, which is the
/// ideal continuous delay. Band noise is synthesized in the frequency domain
/// as a periodic signal and delayed by an exact per-bin phase shift.
pub(crate) fn render_delayed<R: Rng>(
    signal: &SignalKind,
    len: usize,
    sample_rate: f64,
    delays: &[f64],
    rng: &mut R,
) -> Vec<Vec<f64>> {
    match *signal {
        SignalKind::PureTone { freq_hz } => delays
            .iter()
            .map(|&tau| {
                (0..len)
                    .map(|n| SQRT_2 * (2.0 * PI * freq_hz * (n as f64 / sample_rate - tau)).sin())
                    .collect()
            })
            .collect(),
        SignalKind::Chirp { lo_hz, hi_hz } => {
            let duration = len as f64 / sample_rate;
            let sweep = (hi_hz - lo_hz) / duration;
            delays
                .iter()
                .map(|&tau| {
                    (0..len)
                        .map(|n| {
                            let t = n as f64 / sample_rate - tau;
                            SQRT_2 * (2.0 * PI * (lo_hz * t + 0.5 * sweep * t * t)).sin()
                        })
                        .collect()
                })
                .collect()
        }
        SignalKind::BandNoise { lo_hz, hi_hz } => {
            let spectrum = band_noise_spectrum(len, sample_rate, lo_hz, hi_hz, rng);
            let base = inverse_real(&spectrum);
            let rms = rms(&base);
            let scale = if rms > 0.0 { 1.0 / rms } else { 0.0 };
            delays
                .iter()
                .map(|&tau| {
                    let shifted = phase_shift(&spectrum, sample_rate, tau);
                    inverse_real(&shifted).into_iter().map(|v| v * scale).collect()
                })
                .collect()
        }
    }
}

/// Delays `signal` by `tau_s` seconds, circularly, by multiplying its spectrum
/// by e^{-j2πfτ}.
pub fn fractional_delay(signal: &[f64], tau_s: f64, sample_rate: f64) -> Vec<f64> {
    if signal.is_empty() {
        return Vec::new();
    }
    let mut spectrum: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_forward(spectrum.len())
        .process(&mut spectrum);
    let shifted = phase_shift(&spectrum, sample_rate, tau_s);
    inverse_real(&shifted)
}

/// Hermitian-symmetric spectrum with unit magnitude and random phase inside
/// [lo, hi] Hz.
fn band_noise_spectrum<R: Rng>(len: usize, sample_rate: f64, lo_hz: f64, hi_hz: f64, rng: &mut R) -> Vec<Complex<f64>> {
    let mut spectrum = vec![Complex::new(0.0, 0.0); len];
    let bin_hz = sample_rate / len as f64;
    for k in 1..=(len - 1) / 2 {
        let f = k as f64 * bin_hz;
        if f >= lo_hz && f <= hi_hz {
            let phi = rng.random_range(-PI..PI);
            let v = Complex::from_polar(1.0, phi);
            spectrum[k] = v;
            spectrum[len - k] = v.conj();
        }
    }
    spectrum
}

/// Multiplies each bin by e^{-j2πfτ}, using the signed frequency of the bin so
/// the result stays Hermitian. The Nyquist bin of an even-length transform is
/// kept real.
fn phase_shift(spectrum: &[Complex<f64>], sample_rate: f64, tau: f64) -> Vec<Complex<f64>> {
    let len = spectrum.len();
    let bin_hz = sample_rate / len as f64;
    spectrum
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            if len.is_multiple_of(2) && k == len / 2 {
                return v * (2.0 * PI * k as f64 * bin_hz * tau).cos();
            }
            let signed = if k <= len / 2 { k as f64 } else { k as f64 - len as f64 };
            v * Complex::from_polar(1.0, -2.0 * PI * signed * bin_hz * tau)
        })
        .collect()
}

fn inverse_real(spectrum: &[Complex<f64>]) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    buf.into_iter().map(|c| c.re * scale).collect()
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}
