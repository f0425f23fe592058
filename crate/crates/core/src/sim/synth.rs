use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::geometry::ArrayGeometry;
use super::source::{render_delayed, rms, SignalKind, SourceSpec};
use crate::direction::Direction;
use crate::error::{Error, Result};
use crate::seed::{derive_indexed, derive_seed, rng};

pub const NUM_MICS: usize = 4;
pub const MIN_SAMPLE_RATE: u32 = 8000;

/// Synchronized four-channel recording.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelClip {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
    pub label: Option<Direction>,
}

impl MultiChannelClip {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32, label: Option<Direction>) -> Result<Self> {
        if channels.len() != NUM_MICS {
            return Err(Error::ShapeMismatch {
                expected: format!("{NUM_MICS} channels"),
                actual: format!("{} channels", channels.len()),
            });
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::invalid("channels have unequal lengths"));
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("clip sample".into()));
        }
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        Ok(Self {
            channels,
            sample_rate,
            label,
        })
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.channels.iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// Average of the four channels.
    pub fn mono(&self) -> Vec<f64> {
        (0..self.len())
            .map(|n| self.channels.iter().map(|c| c[n]).sum::<f64>() / NUM_MICS as f64)
            .collect()
    }

    /// Multiplies every sample by `gain` (no clipping protection).
    pub fn scaled(&self, gain: f64) -> MultiChannelClip {
        MultiChannelClip {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|v| v * gain).collect())
                .collect(),
            sample_rate: self.sample_rate,
            label: self.label,
        }
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// Scales the clip down so its peak is at most 1; louder clips keep their
    /// inter-channel ratios.
    fn normalize_peak(&mut self) {
        let peak = self.peak();
        if peak > 1.0 {
            for v in self.channels.iter_mut().flatten() {
                *v /= peak;
            }
        }
    }
}

/// Synthesizes the four microphone signals for one source.
///
/// Each channel is the unit-RMS source waveform delayed by the propagation time
/// to that microphone and attenuated by 1/distance, plus white noise at the
/// source's SNR. Deterministic given `seed`.
pub fn synth_clip(
    geometry: &ArrayGeometry,
    source: &SourceSpec,
    duration_s: f64,
    sample_rate: u32,
    seed: u64,
) -> Result<MultiChannelClip> {
    geometry.validate()?;
    source.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid(format!("duration must be positive, got {duration_s}")));
    }
    if sample_rate < MIN_SAMPLE_RATE {
        return Err(Error::invalid(format!(
            "sample rate must be at least {MIN_SAMPLE_RATE} Hz, got {sample_rate}"
        )));
    }
    let sr = sample_rate as f64;
    source.signal.validate(sr)?;
    let len = (duration_s * sr).round() as usize;
    if len == 0 {
        return Err(Error::invalid("clip would have zero samples"));
    }

    let position = source.position(geometry);
    let delays = geometry.delays(&position);
    let mut signal_rng = rng(derive_seed(seed, "signal"));
    let mut noise_rng = rng(derive_seed(seed, "noise"));

    let waveforms = render_delayed(&source.signal, len, sr, &delays, &mut signal_rng);
    let channels = waveforms
        .into_iter()
        .zip(delays)
        .map(|(wave, tau)| {
            let dist = tau * geometry.speed_of_sound;
            let gain = source.level_rms / dist;
            let mut ch: Vec<f64> = wave.into_iter().map(|v| v * gain).collect();
            if let Some(snr) = source.snr_db {
                let sigma = rms(&ch) / 10f64.powf(snr / 20.0);
                if sigma > 0.0 {
                    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
                    for v in ch.iter_mut() {
                        *v += normal.sample(&mut noise_rng);
                    }
                }
            }
            ch
        })
        .collect();

    let mut clip = MultiChannelClip::new(channels, sample_rate, Some(source.direction))?;
    clip.normalize_peak();
    Ok(clip)
}

/// Scales each channel's deviation from the four-channel mean by `gain`, then
/// brings the peak back to at most 1.
pub fn amplify_differences(clip: &MultiChannelClip, gain: f64) -> Result<MultiChannelClip> {
    if !(gain.is_finite() && gain >= 1.0) {
        return Err(Error::invalid(format!("gain must be >= 1, got {gain}")));
    }
    let mean = clip.mono();
    let channels = clip
        .channels
        .iter()
        .map(|c| c.iter().zip(&mean).map(|(v, m)| m + gain * (v - m)).collect())
        .collect();
    let mut out = MultiChannelClip::new(channels, clip.sample_rate, clip.label)?;
    out.normalize_peak();
    Ok(out)
}

/// A named sound class and the synthetic signal standing in for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoundPreset {
    pub name: String,
    pub signal: SignalKind,
}

/// Ranges the dataset generator draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Source distance range in meters for external sources.
    pub distance_m: (f64, f64),
    /// SNR range in dB; `None` produces noiseless clips.
    pub snr_db: Option<(f64, f64)>,
    /// Azimuths are kept this many degrees away from sector edges.
    pub azimuth_margin_deg: f64,
    /// Received RMS at 1 m for external sources.
    pub level_rms: f64,
    /// Extra level of the wearer's own voice, dB.
    pub self_gain_db: f64,
    /// Depth of the wearer's mouth below the array centroid, meters.
    pub self_depth_m: f64,
    /// Relative jitter applied to preset frequencies.
    pub freq_jitter: f64,
    /// Inter-channel difference gain; 1 leaves clips untouched.
    pub amplify_gain: f64,
    pub sounds: Vec<SoundPreset>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            distance_m: (1.0, 3.0),
            snr_db: Some((15.0, 30.0)),
            azimuth_margin_deg: 2.5,
            level_rms: 0.08,
            self_gain_db: 20.0,
            self_depth_m: 0.10,
            freq_jitter: 0.05,
            amplify_gain: 1.0,
            sounds: default_sounds(),
        }
    }
}

/// Class name used for the wearer's own voice.
pub const SELF_SOUND: &str = "person talking";

/// Stand-ins for the eight priority classes. Real alarms, horns and voices are
/// harmonic-rich, so most are modeled as band noise; every preset keeps some
/// energy below the diagonal-pair aliasing limit of the default array (about
/// 930 Hz) so that the classical estimator has usable bins on all pairs.
pub fn default_sounds() -> Vec<SoundPreset> {
    let preset = |name: &str, signal| SoundPreset {
        name: name.to_string(),
        signal,
    };
    vec![
        preset(
            "siren",
            SignalKind::Chirp {
                lo_hz: 600.0,
                hi_hz: 1600.0,
            },
        ),
        preset(
            "car honking",
            SignalKind::BandNoise {
                lo_hz: 350.0,
                hi_hz: 2500.0,
            },
        ),
        preset(
            "bike bell",
            SignalKind::BandNoise {
                lo_hz: 700.0,
                hi_hz: 5000.0,
            },
        ),
        preset(
            SELF_SOUND,
            SignalKind::BandNoise {
                lo_hz: 150.0,
                hi_hz: 4000.0,
            },
        ),
        preset(
            "doorbell",
            SignalKind::BandNoise {
                lo_hz: 500.0,
                hi_hz: 1500.0,
            },
        ),
        preset(
            "phone ringing",
            SignalKind::BandNoise {
                lo_hz: 800.0,
                hi_hz: 3000.0,
            },
        ),
        preset(
            "dog barking",
            SignalKind::BandNoise {
                lo_hz: 400.0,
                hi_hz: 2500.0,
            },
        ),
        preset(
            "instruments",
            SignalKind::BandNoise {
                lo_hz: 200.0,
                hi_hz: 3000.0,
            },
        ),
    ]
}

impl SimConfig {
    pub fn noiseless(mut self) -> Self {
        self.snr_db = None;
        self
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.distance_m;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::invalid("distance range must satisfy 0 < lo <= hi"));
        }
        if let Some((lo, hi)) = self.snr_db {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid("snr range must be finite with lo <= hi"));
            }
        }
        if !(0.0..22.5).contains(&self.azimuth_margin_deg) {
            return Err(Error::invalid("azimuth margin must lie in [0, 22.5)"));
        }
        if self.sounds.is_empty() {
            return Err(Error::Empty("sound preset list".into()));
        }
        if !(0.0..1.0).contains(&self.freq_jitter) {
            return Err(Error::invalid("frequency jitter must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Draws a random source of the given class.
    pub fn draw_source<R: Rng>(&self, direction: Direction, rng: &mut R) -> SourceSpec {
        let snr_db = self
            .snr_db
            .map(|(lo, hi)| if lo < hi { rng.random_range(lo..=hi) } else { lo });
        let jitter = if self.freq_jitter > 0.0 {
            rng.random_range(1.0 - self.freq_jitter..=1.0 + self.freq_jitter)
        } else {
            1.0
        };
        if direction == Direction::SelfVoice {
            let preset = self
                .sounds
                .iter()
                .find(|p| p.name == SELF_SOUND)
                .unwrap_or(&self.sounds[0]);
            return SourceSpec {
                direction,
                azimuth_deg: 0.0,
                distance_m: self.self_depth_m,
                signal: preset.signal.scaled(jitter),
                snr_db,
                level_rms: self.level_rms * 10f64.powf(self.self_gain_db / 20.0),
                sound_class: Some(preset.name.clone()),
            };
        }
        let center = direction.center_deg().expect("compass direction");
        let half = 22.5 - self.azimuth_margin_deg;
        let azimuth_deg = center + rng.random_range(-half..half);
        let (dlo, dhi) = self.distance_m;
        let distance_m = if dlo < dhi { rng.random_range(dlo..=dhi) } else { dlo };
        let preset = &self.sounds[rng.random_range(0..self.sounds.len())];
        SourceSpec {
            direction,
            azimuth_deg,
            distance_m,
            signal: preset.signal.scaled(jitter),
            snr_db,
            level_rms: self.level_rms,
            sound_class: Some(preset.name.clone()),
        }
    }
}

/// A generated clip with the parameters that produced it.
#[derive(Debug, Clone)]
pub struct SimulatedClip {
    pub clip: MultiChannelClip,
    pub source: SourceSpec,
    pub seed: u64,
}

/// Generates `per_class` clips for each of the nine classes with the default
/// ranges.
pub fn make_dataset(
    geometry: &ArrayGeometry,
    per_class: usize,
    duration_s: f64,
    sample_rate: u32,
    seed: u64,
) -> Result<Vec<SimulatedClip>> {
    make_dataset_with(
        geometry,
        &SimConfig::default(),
        per_class,
        duration_s,
        sample_rate,
        seed,
    )
}

/// Generates `per_class` clips for each class, interleaved by class. Each clip
/// draws from its own seed derived from `seed` and its index. Band and chirp
/// upper edges are capped at 0.45 × `sample_rate`.
pub fn make_dataset_with(
    geometry: &ArrayGeometry,
    config: &SimConfig,
    per_class: usize,
    duration_s: f64,
    sample_rate: u32,
    seed: u64,
) -> Result<Vec<SimulatedClip>> {
    if per_class == 0 {
        return Err(Error::invalid("per_class must be at least 1"));
    }
    config.validate()?;
    geometry.validate()?;
    let mut out = Vec::with_capacity(per_class * Direction::ALL.len());
    for round in 0..per_class {
        for direction in Direction::ALL {
            let index = (round * Direction::ALL.len() + direction.index()) as u64;
            let clip_seed = derive_indexed(seed, "clip", index);
            let mut draw = rng(derive_seed(clip_seed, "draw"));
            let mut source = config.draw_source(direction, &mut draw);
            // Presets are written for 16 kHz; keep them under Nyquist at lower rates.
            source.signal = source.signal.band_limited(0.45 * f64::from(sample_rate));
            let mut clip = synth_clip(geometry, &source, duration_s, sample_rate, clip_seed)?;
            if config.amplify_gain > 1.0 {
                clip = amplify_differences(&clip, config.amplify_gain)?;
            }
            out.push(SimulatedClip {
                clip,
                source,
                seed: clip_seed,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn tone(freq_hz: f64) -> SignalKind {
        SignalKind::PureTone { freq_hz }
    }

    #[test]
    fn channel_lengths_follow_duration() {
        let g = ArrayGeometry::default();
        let s = SourceSpec::far_field(Direction::Front, 0.0, 2.0, tone(500.0));
        let clip = synth_clip(&g, &s, 0.5, 16_000, 1).unwrap();
        assert_eq!(clip.len(), 8000);
        assert_eq!(clip.label, Some(Direction::Front));
        let clip = synth_clip(&g, &s, 0.123_45, 8000, 1).unwrap();
        assert_eq!(clip.len(), 988);
    }

    #[test]
    fn broadside_source_gives_identical_front_pair() {
        let g = ArrayGeometry::default();
        let s = SourceSpec::far_field(
            Direction::Front,
            0.0,
            2.0,
            SignalKind::BandNoise {
                lo_hz: 100.0,
                hi_hz: 3000.0,
            },
        );
        let clip = synth_clip(&g, &s, 0.25, 16_000, 5).unwrap();
        for (a, b) in clip.channel(0).iter().zip(clip.channel(1)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_tone_matches_closed_form() {
        let g = ArrayGeometry::default();
        let f = 700.0;
        let s = SourceSpec::far_field(Direction::BackLeft, 222.0, 2.5, tone(f));
        let clip = synth_clip(&g, &s, 0.1, 16_000, 9).unwrap();
        let delays = g.delays(&s.position(&g));
        for (i, &tau) in delays.iter().enumerate() {
            let amp = s.level_rms / (tau * g.speed_of_sound) * 2f64.sqrt();
            for (n, v) in clip.channel(i).iter().enumerate() {
                let t = n as f64 / 16_000.0;
                let expected = amp * (2.0 * PI * f * t - 2.0 * PI * f * tau).sin();
                assert!((v - expected).abs() < 1e-12, "mic {i} sample {n}");
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = ArrayGeometry::default();
        let s = SourceSpec::far_field(Direction::Front, 0.0, 2.0, tone(8000.0));
        assert!(synth_clip(&g, &s, 1.0, 16_000, 0).is_err());
        let s = SourceSpec::far_field(Direction::Front, 0.0, 2.0, tone(440.0));
        assert!(synth_clip(&g, &s, 0.0, 16_000, 0).is_err());
        assert!(synth_clip(&g, &s, 1.0, 4000, 0).is_err());
        let mut bad = g.clone();
        bad.mic_positions[0] = [1.0, 1.0, 0.0];
        assert!(matches!(
            synth_clip(&bad, &s, 1.0, 16_000, 0),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn loud_clips_are_peak_normalized() {
        let g = ArrayGeometry::default();
        let mut s = SourceSpec::far_field(Direction::Front, 0.0, 1.0, tone(440.0));
        s.level_rms = 5.0;
        let clip = synth_clip(&g, &s, 0.1, 16_000, 0).unwrap();
        assert!((clip.peak() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn self_voice_reaches_all_mics_together() {
        let g = ArrayGeometry::default();
        let cfg = SimConfig::default().noiseless();
        let s = cfg.draw_source(Direction::SelfVoice, &mut rng(1));
        let clip = synth_clip(&g, &s, 0.2, 16_000, 4).unwrap();
        for i in 1..4 {
            for (a, b) in clip.channel(0).iter().zip(clip.channel(i)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert_eq!(s.sound_class.as_deref(), Some(SELF_SOUND));
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let g = ArrayGeometry::default();
        let a = make_dataset(&g, 1, 0.1, 8000, 11).unwrap();
        assert_eq!(a.len(), 9);
        for d in Direction::ALL {
            assert_eq!(a.iter().filter(|c| c.clip.label == Some(d)).count(), 1);
        }
        let b = make_dataset(&g, 1, 0.1, 8000, 11).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.clip, y.clip);
            assert_eq!(x.source, y.source);
        }
        assert!(make_dataset(&g, 0, 0.1, 8000, 11).is_err());
    }

    #[test]
    fn drawn_azimuths_respect_sector_margin() {
        let cfg = SimConfig::default();
        let mut r = rng(0);
        for _ in 0..200 {
            for d in Direction::COMPASS {
                let s = cfg.draw_source(d, &mut r);
                s.validate().unwrap();
                let off = s.azimuth_deg - d.center_deg().unwrap();
                assert!(off.abs() <= 20.0);
            }
        }
    }

    #[test]
    fn amplify_identity_and_zero_deviation() {
        let g = ArrayGeometry::default();
        let s = SourceSpec::far_field(Direction::Left, 270.0, 2.0, tone(300.0));
        let clip = synth_clip(&g, &s, 0.05, 16_000, 2).unwrap();
        let same = amplify_differences(&clip, 1.0).unwrap();
        for (a, b) in clip.channels().iter().flatten().zip(same.channels().iter().flatten()) {
            assert!((a - b).abs() < 1e-15);
        }

        let base: Vec<f64> = (0..32).map(|n| (n as f64 * 0.3).sin() * 0.5).collect();
        let flat = MultiChannelClip::new(vec![base.clone(); 4], 16_000, None).unwrap();
        let amp = amplify_differences(&flat, 7.5).unwrap();
        for ch in amp.channels() {
            for (a, b) in ch.iter().zip(&base) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert!(amplify_differences(&flat, 0.5).is_err());
    }

    #[test]
    fn amplify_doubles_pairwise_difference() {
        // Hand arithmetic on 16 samples: mean m = c + δ/2 for channels {c, c+δ, c, c+δ},
        // so the deviations ±δ/2 become ±δ and the pairwise gap becomes 2δ.
        let c: Vec<f64> = (0..16).map(|n| 0.01 * n as f64 - 0.05).collect();
        let delta: Vec<f64> = (0..16).map(|n| 0.002 * ((n % 5) as f64 - 2.0)).collect();
        let cd: Vec<f64> = c.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let clip = MultiChannelClip::new(vec![c.clone(), cd.clone(), c, cd], 16_000, None).unwrap();
        let out = amplify_differences(&clip, 2.0).unwrap();
        for n in 0..16 {
            let gap = out.channel(1)[n] - out.channel(0)[n];
            assert!((gap - 2.0 * delta[n]).abs() < 1e-12, "n={n}");
        }
    }
}
