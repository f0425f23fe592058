//! The nine direction-of-arrival classes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Eight 45° compass sectors around the wearer plus the wearer's own voice.
///
/// Azimuth is measured clockwise from straight ahead: front = 0°, right = 90°.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Front,
    FrontRight,
    Right,
    BackRight,
    Back,
    BackLeft,
    Left,
    FrontLeft,
    #[serde(rename = "self")]
    SelfVoice,
}

pub const NUM_DIRECTIONS: usize = 9;

impl Direction {
    pub const ALL: [Direction; NUM_DIRECTIONS] = [
        Direction::Front,
        Direction::FrontRight,
        Direction::Right,
        Direction::BackRight,
        Direction::Back,
        Direction::BackLeft,
        Direction::Left,
        Direction::FrontLeft,
        Direction::SelfVoice,
    ];

    pub const COMPASS: [Direction; 8] = [
        Direction::Front,
        Direction::FrontRight,
        Direction::Right,
        Direction::BackRight,
        Direction::Back,
        Direction::BackLeft,
        Direction::Left,
        Direction::FrontLeft,
    ];

    /// Class index used by the network output layer.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Direction> {
        Self::ALL.get(index).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::Front => "front",
            Direction::FrontRight => "front-right",
            Direction::Right => "right",
            Direction::BackRight => "back-right",
            Direction::Back => "back",
            Direction::BackLeft => "back-left",
            Direction::Left => "left",
            Direction::FrontLeft => "front-left",
            Direction::SelfVoice => "self",
        }
    }

    pub fn is_compass(self) -> bool {
        self != Direction::SelfVoice
    }

    /// Sector center in degrees, `None` for `self`.
    pub fn center_deg(self) -> Option<f64> {
        self.is_compass().then(|| self.index() as f64 * 45.0)
    }

    /// Sector containing `azimuth_deg`; sector k spans [k·45 − 22.5, k·45 + 22.5).
    pub fn from_azimuth(azimuth_deg: f64) -> Direction {
        let shifted = (azimuth_deg + 22.5).rem_euclid(360.0);
        let k = (shifted / 45.0).floor() as usize % 8;
        Self::COMPASS[k]
    }

    /// Whether `azimuth_deg` falls inside this class's sector.
    pub fn contains_azimuth(self, azimuth_deg: f64) -> bool {
        self.is_compass() && Direction::from_azimuth(azimuth_deg) == self
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase().replace('_', "-");
        Direction::ALL
            .iter()
            .copied()
            .find(|d| d.label() == lower)
            .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}
