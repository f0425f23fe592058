use std::f64::consts::PI;

use rustfft::num_complex::Complex;

use super::stft::{stft, Spectrogram, StftConfig};
use crate::error::{Error, Result};
use crate::sim::{MultiChannelClip, NUM_MICS};

/// Phase is taken as 0 below this magnitude.
pub const ZERO_MAGNITUDE: f64 = 1e-12;

/// Number of IPD maps (mics 2, 3, 4 against mic 1).
pub const NUM_PAIRS: usize = NUM_MICS - 1;

/// Wraps an angle to (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let wrapped = x - 2.0 * PI * ((x - PI) / (2.0 * PI)).ceil();
    // Guard the open end against rounding in the subtraction.
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

fn phase(c: Complex<f64>) -> f64 {
    if c.norm() < ZERO_MAGNITUDE {
        0.0
    } else {
        c.arg()
    }
}

/// Real F×T matrix stored frequency-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IpdMap {
    pub values: Vec<f64>,
    pub num_bins: usize,
    pub num_frames: usize,
}

impl IpdMap {
    pub fn get(&self, f: usize, t: usize) -> f64 {
        self.values[f * self.num_frames + t]
    }
}

/// Entrywise ∠ref − ∠other wrapped to (−π, π].
pub fn ipd(reference: &Spectrogram, other: &Spectrogram) -> Result<IpdMap> {
    if !reference.same_shape(other) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", reference.num_bins(), reference.num_frames()),
            actual: format!("{}x{}", other.num_bins(), other.num_frames()),
        });
    }
    let values = reference
        .values()
        .iter()
        .zip(other.values())
        .map(|(&a, &b)| wrap_phase(phase(a) - phase(b)))
        .collect();
    Ok(IpdMap {
        values,
        num_bins: reference.num_bins(),
        num_frames: reference.num_frames(),
    })
}

/// Three stacked IPD maps; row r holds IPD between mic 1 and mic r + 2.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    data: Vec<f64>,
    num_bins: usize,
    num_frames: usize,
}

impl PhaseMatrix {
    pub fn from_rows(rows: [IpdMap; NUM_PAIRS]) -> Result<Self> {
        let (f, t) = (rows[0].num_bins, rows[0].num_frames);
        if rows.iter().any(|r| r.num_bins != f || r.num_frames != t) {
            return Err(Error::invalid("IPD rows have different shapes"));
        }
        let data = rows.into_iter().flat_map(|r| r.values).collect();
        Ok(Self {
            data,
            num_bins: f,
            num_frames: t,
        })
    }

    /// Builds a matrix from raw row-major data of shape 3×F×T.
    pub fn from_raw(data: Vec<f64>, num_bins: usize, num_frames: usize) -> Result<Self> {
        if data.len() != NUM_PAIRS * num_bins * num_frames {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", NUM_PAIRS * num_bins * num_frames),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Self {
            data,
            num_bins,
            num_frames,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        [NUM_PAIRS, self.num_bins, self.num_frames]
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn get(&self, row: usize, f: usize, t: usize) -> f64 {
        self.data[(row * self.num_bins + f) * self.num_frames + t]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let size = self.num_bins * self.num_frames;
        &self.data[row * size..(row + 1) * size]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<f64> {
        self.data
    }
}

/// STFT of each channel followed by IPD against microphone 1.
pub fn phase_matrix(clip: &MultiChannelClip, cfg: &StftConfig) -> Result<PhaseMatrix> {
    let sr = clip.sample_rate() as f64;
    let specs = clip
        .channels()
        .iter()
        .map(|ch| stft(ch, sr, cfg))
        .collect::<Result<Vec<_>>>()?;
    let rows = [
        ipd(&specs[0], &specs[1])?,
        ipd(&specs[0], &specs[2])?,
        ipd(&specs[0], &specs[3])?,
    ];
    PhaseMatrix::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::stft::WindowFn;
    use proptest::prelude::*;

    #[test]
    fn wrap_examples() {
        assert!((wrap_phase(6.0) - (6.0 - 2.0 * PI)).abs() < 1e-15);
        assert!((wrap_phase(3.0 - -3.0) + 0.283_185_307).abs() < 1e-8);
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert_eq!(wrap_phase(0.0), 0.0);
        assert!((wrap_phase(-7.0) - (-7.0 + 2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn wrap_agrees_with_exhaustive_shift_search() {
        // Oracle: try every shift by 2πk, k ∈ [-5, 5], keep the one landing in (−π, π].
        for i in -2000..=2000 {
            let x = i as f64 * 0.0157;
            let oracle = (-5..=5)
                .map(|k| x + 2.0 * PI * k as f64)
                .find(|v| *v > -PI && *v <= PI)
                .unwrap();
            assert!((wrap_phase(x) - oracle).abs() < 1e-12, "x={x}");
        }
    }

    fn spec_of(x: &[f64], c: &StftConfig) -> Spectrogram {
        stft(x, 16_000.0, c).unwrap()
    }

    #[test]
    fn self_difference_is_zero_and_shape_checked() {
        let c = StftConfig::default();
        let x: Vec<f64> = (0..2048).map(|i| (i as f64 * 0.1).sin()).collect();
        let s = spec_of(&x, &c);
        assert!(ipd(&s, &s).unwrap().values.iter().all(|v| *v == 0.0));
        let short = spec_of(&x[..1024], &c);
        assert!(matches!(ipd(&s, &short), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn delayed_bin_centered_tone() {
        let c = StftConfig::default();
        let (k, sr) = (21usize, 16_000.0);
        let f = k as f64 * sr / 512.0;
        let dt = 1.7e-4;
        let a: Vec<f64> = (0..4096).map(|n| (2.0 * PI * f * n as f64 / sr).sin()).collect();
        let b: Vec<f64> = (0..4096).map(|n| (2.0 * PI * f * (n as f64 / sr - dt)).sin()).collect();
        let m = ipd(&spec_of(&a, &c), &spec_of(&b, &c)).unwrap();
        let expected = wrap_phase(2.0 * PI * f * dt);
        for t in 0..m.num_frames {
            assert!((m.get(k, t) - expected).abs() < 1e-3);
        }
    }

    #[test]
    fn integer_shift_covariance() {
        let c = StftConfig {
            window_len: 256,
            hop: 128,
            window: WindowFn::Hann,
        };
        let (k, sr, m_shift) = (10usize, 8000.0, 3usize);
        let f = k as f64 * sr / 256.0;
        let tone = |n: usize| (2.0 * PI * f * n as f64 / sr + 0.4).cos();
        let a: Vec<f64> = (m_shift..2048 + m_shift).map(tone).collect();
        let b: Vec<f64> = (0..2048).map(tone).collect();
        let m = ipd(&spec_of(&a, &c), &spec_of(&b, &c)).unwrap();
        let expected = wrap_phase(2.0 * PI * f * m_shift as f64 / sr);
        for t in 0..m.num_frames {
            assert!((m.get(k, t) - expected).abs() < 1e-3);
        }
    }

    #[test]
    fn identical_channels_give_zero_matrix_and_permutation_swaps_rows() {
        let c = StftConfig::default();
        let x: Vec<f64> = (0..1600).map(|i| ((i * 31) % 17) as f64 / 17.0 - 0.5).collect();
        let same = MultiChannelClip::new(vec![x.clone(); 4], 16_000, None).unwrap();
        let pm = phase_matrix(&same, &c).unwrap();
        assert!(pm.as_slice().iter().all(|v| *v == 0.0));

        let chans: Vec<Vec<f64>> = (0..4)
            .map(|j| {
                (0..1600)
                    .map(|i| ((i * (31 + 2 * j) + j) % 19) as f64 / 19.0 - 0.5)
                    .collect()
            })
            .collect();
        let clip = MultiChannelClip::new(chans.clone(), 16_000, None).unwrap();
        let swapped = MultiChannelClip::new(
            vec![chans[0].clone(), chans[1].clone(), chans[3].clone(), chans[2].clone()],
            16_000,
            None,
        )
        .unwrap();
        let p = phase_matrix(&clip, &c).unwrap();
        let q = phase_matrix(&swapped, &c).unwrap();
        assert_eq!(p.row(0), q.row(0));
        assert_eq!(p.row(1), q.row(2));
        assert_eq!(p.row(2), q.row(1));
        assert!(p.as_slice().iter().all(|v| *v > -PI && *v <= PI));
    }

    #[test]
    fn antisymmetry_at_the_pi_boundary() {
        // Phases π/2 and −π/2 differ by exactly π one way and −π the other,
        // which the convention maps to π both times.
        assert_eq!(wrap_phase(PI / 2.0 - -PI / 2.0), PI);
        assert_eq!(wrap_phase(-PI / 2.0 - PI / 2.0), PI);
    }

    proptest! {
        #[test]
        fn wrap_lands_in_half_open_interval(x in -1e4f64..1e4) {
            let w = wrap_phase(x);
            prop_assert!(w > -PI && w <= PI);
            let k = ((x - w) / (2.0 * PI)).round();
            prop_assert!((x - w - 2.0 * PI * k).abs() < 1e-9);
        }

        #[test]
        fn adding_full_turns_leaves_ipd_unchanged(a in -PI..PI, b in -PI..PI, k in -4i32..4) {
            let base = wrap_phase(a - b);
            let turned = wrap_phase(a + 2.0 * PI * k as f64 - b);
            let d = (base - turned).abs();
            prop_assert!(d < 1e-9 || (d - 2.0 * PI).abs() < 1e-9);
        }

        #[test]
        fn ipd_is_antisymmetric(a in -PI..PI, b in -PI..PI) {
            let ab = wrap_phase(a - b);
            let ba = wrap_phase(b - a);
            prop_assume!((ab.abs() - PI).abs() > 1e-9);
            prop_assert!((ab + ba).abs() < 1e-12);
        }
    }
}
