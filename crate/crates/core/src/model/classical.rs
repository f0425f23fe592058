//! Closed-form direction estimate from cross-spectrum phase slopes.
//!
//! For each pair (mic 1, mic j) the frame-summed cross-spectrum
//! C(f) = Σ_τ X_1(f,τ)·conj(X_j(f,τ)) has phase 2πf·(τ_j − τ_1). A weighted
//! line fit through the origin over bins below the pair's aliasing limit gives
//! the TDOA. The three TDOAs determine a slowness vector s (far-field plane
//! wave: τ_j − τ_1 = −(m_j − m_1)·s), whose in-plane direction is the azimuth.
//! A source directly below the array produces near-zero TDOAs, so a small
//! |s|·c marks the wearer's own voice.

use serde::{Deserialize, Serialize};

use crate::direction::Direction;
use crate::error::{Error, Result};
use crate::features::{stft, Spectrogram, StftConfig};
use crate::sim::{ArrayGeometry, MultiChannelClip, NUM_MICS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalConfig {
    /// Below this in-plane |s|·c the clip is labeled `self`. A far-field
    /// source in the array plane gives 1.
    pub self_speed_ratio: f64,
    /// If set, `self` additionally requires the mean-channel RMS level to be
    /// at least this many dBFS.
    pub self_min_level_dbfs: Option<f64>,
    /// Bins below this frequency are ignored.
    pub min_freq_hz: f64,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            self_speed_ratio: 0.35,
            self_min_level_dbfs: None,
            min_freq_hz: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEstimate {
    pub direction: Direction,
    /// Clockwise from front, in [0, 360).
    pub azimuth_deg: f64,
    /// In-plane slowness magnitude times c.
    pub speed_ratio: f64,
    /// τ_j − τ_1 for j = 2, 3, 4, seconds; `None` where no bin was usable.
    pub tdoas_s: [Option<f64>; 3],
    /// RMS of the far-field fit residual, seconds.
    pub residual_s: f64,
}

/// Estimates the direction class of a four-channel clip.
pub fn classical_doa(
    clip: &MultiChannelClip,
    geometry: &ArrayGeometry,
    stft_cfg: &StftConfig,
    cfg: &ClassicalConfig,
) -> Result<ClassicalEstimate> {
    geometry.validate()?;
    let sr = f64::from(clip.sample_rate());
    let specs = (0..NUM_MICS)
        .map(|i| stft(clip.channel(i), sr, stft_cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut tdoas = [None; 3];
    for j in 1..NUM_MICS {
        let limit = geometry.aliasing_limit_hz(0, j).min(sr / 2.0);
        tdoas[j - 1] = pair_tdoa(&specs[0], &specs[j], cfg.min_freq_hz, limit);
    }
    let fit = fit_slowness(geometry, &tdoas)?;
    let level_ok = cfg.self_min_level_dbfs.is_none_or(|min| level_dbfs(clip) >= min);
    let direction = if fit.speed_ratio < cfg.self_speed_ratio && level_ok {
        Direction::SelfVoice
    } else {
        Direction::from_azimuth(fit.azimuth_deg)
    };
    Ok(ClassicalEstimate {
        direction,
        azimuth_deg: fit.azimuth_deg,
        speed_ratio: fit.speed_ratio,
        tdoas_s: tdoas,
        residual_s: fit.residual_s,
    })
}

fn level_dbfs(clip: &MultiChannelClip) -> f64 {
    let mono = clip.mono();
    let ms = mono.iter().map(|v| v * v).sum::<f64>() / mono.len().max(1) as f64;
    10.0 * ms.log10()
}

/// Magnitude-weighted slope of cross-spectrum phase against angular frequency.
fn pair_tdoa(reference: &Spectrogram, other: &Spectrogram, lo_hz: f64, hi_hz: f64) -> Option<f64> {
    let df = reference.freq_resolution;
    let (mut num, mut den) = (0.0, 0.0);
    for f in 1..reference.num_bins() {
        let hz = f as f64 * df;
        if hz < lo_hz {
            continue;
        }
        if hz >= hi_hz {
            break;
        }
        let c: rustfft::num_complex::Complex<f64> = reference
            .bin(f)
            .iter()
            .zip(other.bin(f))
            .map(|(a, b)| a * b.conj())
            .sum();
        let w = c.norm();
        if w == 0.0 {
            continue;
        }
        let omega = 2.0 * std::f64::consts::PI * hz;
        num += w * omega * c.arg();
        den += w * omega * omega;
    }
    (den > 0.0).then(|| num / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlownessFit {
    pub azimuth_deg: f64,
    pub speed_ratio: f64,
    pub residual_s: f64,
}

/// Least-squares plane-wave fit to TDOAs τ_j − τ_1 (j = 2, 3, 4).
///
/// The slowness is solved within the array plane; its horizontal projection
/// gives the azimuth. Needs at least two usable pairs.
pub fn fit_slowness(geometry: &ArrayGeometry, tdoas_s: &[Option<f64>; 3]) -> Result<SlownessFit> {
    geometry.validate()?;
    let m = &geometry.mic_positions;
    let diff = |j: usize| [m[j][0] - m[0][0], m[j][1] - m[0][1], m[j][2] - m[0][2]];
    // Orthonormal basis of the array plane.
    let e1 = normalize(diff(1));
    let d3 = diff(3);
    let d3_perp = sub(d3, scale(e1, dot(d3, e1)));
    let e2 = normalize(d3_perp);

    let rows: Vec<([f64; 2], f64)> = (1..NUM_MICS)
        .filter_map(|j| tdoas_s[j - 1].map(|t| ([dot(diff(j), e1), dot(diff(j), e2)], -t)))
        .collect();
    if rows.len() < 2 {
        return Err(Error::Empty("need TDOAs from at least two microphone pairs".into()));
    }
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (r, y) in &rows {
        a11 += r[0] * r[0];
        a12 += r[0] * r[1];
        a22 += r[1] * r[1];
        b1 += r[0] * y;
        b2 += r[1] * y;
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() <= 1e-18 * (a11 * a22).max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidGeometry("usable microphone pairs are collinear".into()));
    }
    let u = (a22 * b1 - a12 * b2) / det;
    let v = (a11 * b2 - a12 * b1) / det;
    let residual_s =
        (rows.iter().map(|(r, y)| (r[0] * u + r[1] * v - y).powi(2)).sum::<f64>() / rows.len() as f64).sqrt();
    let s = [e1[0] * u + e2[0] * v, e1[1] * u + e2[1] * v, e1[2] * u + e2[2] * v];
    let azimuth_deg = s[0].atan2(s[1]).to_degrees().rem_euclid(360.0);
    Ok(SlownessFit {
        azimuth_deg,
        speed_ratio: (u * u + v * v).sqrt() * geometry.speed_of_sound,
        residual_s,
    })
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn scale(a: [f64; 3], k: f64) -> [f64; 3] {
    [a[0] * k, a[1] * k, a[2] * k]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    scale(a, 1.0 / dot(a, a).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{synth_clip, SignalKind, SourceSpec};

    fn far_delays(g: &ArrayGeometry, az_deg: f64) -> [Option<f64>; 3] {
        let a = az_deg.to_radians();
        let u = [a.sin(), a.cos(), 0.0];
        let m = &g.mic_positions;
        let t = |j: usize| -(dot(sub(m[j], m[0]), u)) / g.speed_of_sound;
        [Some(t(1)), Some(t(2)), Some(t(3))]
    }

    #[test]
    fn exact_plane_wave_delays_recover_azimuth() {
        let g = ArrayGeometry::default();
        for k in 0..72 {
            let az = k as f64 * 5.0 + 1.0;
            let fit = fit_slowness(&g, &far_delays(&g, az)).unwrap();
            assert!((fit.azimuth_deg - az).abs() < 1e-9, "{az} vs {}", fit.azimuth_deg);
            assert!((fit.speed_ratio - 1.0).abs() < 1e-9);
            assert!(fit.residual_s < 1e-15);
        }
    }

    #[test]
    fn two_pairs_suffice_but_one_does_not() {
        let g = ArrayGeometry::default();
        let mut d = far_delays(&g, 100.0);
        d[1] = None;
        assert!((fit_slowness(&g, &d).unwrap().azimuth_deg - 100.0).abs() < 1e-9);
        d[0] = None;
        assert!(fit_slowness(&g, &d).is_err());
    }

    #[test]
    fn broadside_and_endfire_tones() {
        let g = ArrayGeometry::default();
        let cfg = StftConfig::default();
        for (az, want) in [(0.0, Direction::Front), (90.0, Direction::Right)] {
            let src = SourceSpec::far_field(want, az, 2.0, SignalKind::PureTone { freq_hz: 500.0 });
            let clip = synth_clip(&g, &src, 0.5, 16_000, 1).unwrap();
            let est = classical_doa(&clip, &g, &cfg, &ClassicalConfig::default()).unwrap();
            assert_eq!(est.direction, want);
            assert!(((est.azimuth_deg - az + 180.0).rem_euclid(360.0) - 180.0).abs() < 1.0);
        }
    }

    #[test]
    fn degenerate_geometry_is_rejected() {
        let mut g = ArrayGeometry::default();
        g.mic_positions[1] = g.mic_positions[0];
        assert!(matches!(
            fit_slowness(&g, &[Some(0.0); 3]),
            Err(Error::InvalidGeometry(_))
        ));
    }
}
