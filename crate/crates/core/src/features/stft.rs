use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowFn {
    Hann,
    Hamming,
    Rect,
}

impl WindowFn {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let x = 2.0 * PI * i as f64 / n as f64;
                match self {
                    WindowFn::Hann => 0.5 - 0.5 * x.cos(),
                    WindowFn::Hamming => 0.54 - 0.46 * x.cos(),
                    WindowFn::Rect => 1.0,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    /// Frame length N in samples (even).
    pub window_len: usize,
    /// Hop H in samples, 0 < H <= N.
    pub hop: usize,
    pub window: WindowFn,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 512,
            hop: 256,
            window: WindowFn::Hann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 || !self.window_len.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "window length must be positive and even, got {}",
                self.window_len
            )));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(Error::invalid(format!(
                "hop must satisfy 0 < hop <= window length, got {}",
                self.hop
            )));
        }
        Ok(())
    }

    /// One-sided bin count N/2 + 1.
    pub fn num_bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// Full frames in a signal of `len` samples, floor((len − N)/H) + 1; zero if
    /// the signal is shorter than one frame.
    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }
}

/// One-sided complex STFT, bins × frames, stored frequency-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    bins: Vec<Complex<f64>>,
    num_bins: usize,
    num_frames: usize,
    /// Hz per bin.
    pub freq_resolution: f64,
    /// Frames per second.
    pub frame_rate: f64,
    pub config: StftConfig,
}

impl Spectrogram {
    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn get(&self, f: usize, t: usize) -> Complex<f64> {
        self.bins[f * self.num_frames + t]
    }

    /// All frames of bin `f`.
    pub fn bin(&self, f: usize) -> &[Complex<f64>] {
        &self.bins[f * self.num_frames..(f + 1) * self.num_frames]
    }

    pub fn values(&self) -> &[Complex<f64>] {
        &self.bins
    }

    pub fn same_shape(&self, other: &Spectrogram) -> bool {
        self.num_bins == other.num_bins && self.num_frames == other.num_frames && self.config == other.config
    }
}

/// X(f, τ) = Σ_n x(τH + n)·w(n)·e^{−j2πnf/N} over full frames only.
pub fn stft(signal: &[f64], sample_rate: f64, cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    let n = cfg.window_len;
    if signal.len() < n {
        return Err(Error::SignalTooShort {
            needed: n,
            actual: signal.len(),
        });
    }
    let window = cfg.window.coefficients(n);
    let num_frames = cfg.num_frames(signal.len());
    let num_bins = cfg.num_bins();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut bins = vec![Complex::new(0.0, 0.0); num_bins * num_frames];
    let mut frame = vec![Complex::new(0.0, 0.0); n];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for t in 0..num_frames {
        let start = t * cfg.hop;
        for (slot, (x, w)) in frame.iter_mut().zip(signal[start..start + n].iter().zip(&window)) {
            *slot = Complex::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut frame, &mut scratch);
        for f in 0..num_bins {
            bins[f * num_frames + t] = frame[f];
        }
    }
    if bins.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite("spectrogram".into()));
    }
    Ok(Spectrogram {
        bins,
        num_bins,
        num_frames,
        freq_resolution: sample_rate / n as f64,
        frame_rate: sample_rate / cfg.hop as f64,
        config: *cfg,
    })
}
