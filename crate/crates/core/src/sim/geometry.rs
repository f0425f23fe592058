use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

const SIDE_TOLERANCE_M: f64 = 1e-9;

/// Four microphones in the device frame (x = right, y = front, z = up), meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub mic_positions: [Point3; 4],
    /// Meters per second.
    #[serde(default = "default_speed_of_sound")]
    pub speed_of_sound: f64,
}

fn default_speed_of_sound() -> f64 {
    343.0
}

impl Default for ArrayGeometry {
    /// 0.14 m wide by 0.12 m deep, roughly the span of a pair of glasses.
    /// Mic 1 front-left, mic 2 front-right, mic 3 back-right, mic 4 back-left.
    fn default() -> Self {
        Self::rectangle(0.14, 0.12)
    }
}

pub(crate) fn distance(a: &Point3, b: &Point3) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl ArrayGeometry {
    /// Horizontal rectangle centered at the origin.
    pub fn rectangle(width_m: f64, depth_m: f64) -> Self {
        let (hw, hd) = (width_m / 2.0, depth_m / 2.0);
        Self {
            mic_positions: [[-hw, hd, 0.0], [hw, hd, 0.0], [hw, -hd, 0.0], [-hw, -hd, 0.0]],
            speed_of_sound: default_speed_of_sound(),
        }
    }

    /// Checks the four positions form a non-degenerate rectangle.
    ///
    /// A quadrilateral is a rectangle iff for one of the three ways of pairing
    /// its corners into diagonals, both diagonals share a midpoint and length.
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_of_sound.is_finite() && self.speed_of_sound > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "speed of sound must be positive, got {}",
                self.speed_of_sound
            )));
        }
        let m = &self.mic_positions;
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite coordinate".into()));
        }
        for i in 0..4 {
            for j in i + 1..4 {
                if distance(&m[i], &m[j]) <= SIDE_TOLERANCE_M {
                    return Err(Error::InvalidGeometry(format!(
                        "microphones {} and {} coincide",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let pairings = [((0, 2), (1, 3)), ((0, 1), (2, 3)), ((0, 3), (1, 2))];
        let is_rectangle = pairings.iter().any(|&((a, b), (c, d))| {
            let mid1 = midpoint(&m[a], &m[b]);
            let mid2 = midpoint(&m[c], &m[d]);
            distance(&mid1, &mid2) <= SIDE_TOLERANCE_M
                && (distance(&m[a], &m[b]) - distance(&m[c], &m[d])).abs() <= SIDE_TOLERANCE_M
        });
        if !is_rectangle {
            return Err(Error::InvalidGeometry("microphones do not form a rectangle".into()));
        }
        Ok(())
    }

    pub fn centroid(&self) -> Point3 {
        let mut c = [0.0; 3];
        for p in &self.mic_positions {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += pi / 4.0;
            }
        }
        c
    }

    /// Propagation delay in seconds from `source` to each microphone.
    pub fn delays(&self, source: &Point3) -> [f64; 4] {
        let c = self.speed_of_sound;
        self.mic_positions.map(|m| distance(source, &m) / c)
    }

    pub fn spacing(&self, i: usize, j: usize) -> f64 {
        distance(&self.mic_positions[i], &self.mic_positions[j])
    }

    /// Highest frequency at which the phase difference between mics `i` and `j`
    /// is unambiguous, c / (2d).
    pub fn aliasing_limit_hz(&self, i: usize, j: usize) -> f64 {
        self.speed_of_sound / (2.0 * self.spacing(i, j))
    }
}

fn midpoint(a: &Point3, b: &Point3) -> Point3 {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]
}
