use std::fs;
use std::path::Path;

use super::bbox::BBox;
use crate::error::{Error, Result};
use crate::features::tensor_file::Tensor3;

/// Heat map over image pixels, row-major, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl LocalizationMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Empty("localization map".into()));
        }
        if values.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values for {width}x{height}", width * height),
                actual: values.len().to_string(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("map value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, values })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let values = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nearest-neighbor resampling: target pixel centers map back to source pixels.
    pub fn resize_nearest(&self, width: usize, height: usize) -> Result<Self> {
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let pick =
            |i: usize, to: usize, from: usize| (((i as f64 + 0.5) * from as f64 / to as f64) as usize).min(from - 1);
        Self::from_fn(width, height, |r, c| {
            self.get(pick(r, height, self.height), pick(c, width, self.width))
        })
    }

    /// Reads binary PGM (`P5`, maxval at most 255), scaling samples by 1/maxval.
    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode_pgm(&bytes, path)
    }

    pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut pos = 0;
        let mut token = || -> Result<String> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::format(path, "truncated PGM header"));
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        if token()? != "P5" {
            return Err(Error::format(path, "not a binary PGM (expected P5)"));
        }
        let mut num = |what: &str| -> Result<usize> {
            token()?
                .parse()
                .map_err(|_| Error::format(path, format!("bad PGM {what}")))
        };
        let (width, height, maxval) = (num("width")?, num("height")?, num("maxval")?);
        if maxval == 0 || maxval > 255 {
            return Err(Error::format(path, format!("unsupported PGM maxval {maxval}")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        let data = &bytes[(pos + 1).min(bytes.len())..];
        if data.len() != width * height {
            return Err(Error::format(
                path,
                format!(
                    "raster has {} bytes, {width}x{height} needs {}",
                    data.len(),
                    width * height
                ),
            ));
        }
        let values = data.iter().map(|&b| f64::from(b) / maxval as f64).collect();
        Self::new(width, height, values).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Binary PGM with maxval 255, values rounded to the nearest level.
    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.values.iter().map(|v| (v * 255.0).round() as u8));
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode_pgm()).map_err(|e| Error::io(path, e))
    }

    /// Reads a `(1, H, W)` tensor file.
    pub fn read_tensor(path: &Path) -> Result<Self> {
        let t = Tensor3::read(path)?;
        if t.dims[0] != 1 {
            return Err(Error::format(
                path,
                format!("map tensor must have leading dim 1, got {:?}", t.dims),
            ));
        }
        Self::new(t.dims[2], t.dims[1], t.data.into_iter().map(f64::from).collect())
            .map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn write_tensor(&self, path: &Path) -> Result<()> {
        Tensor3 {
            dims: [1, self.height, self.width],
            data: self.values.iter().map(|&v| v as f32).collect(),
        }
        .write(path)
    }

    /// Dispatches on extension: `.pgm` as PGM, anything else as a tensor file.
    pub fn read(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("pgm") => Self::read_pgm(path),
            _ => Self::read_tensor(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryGrid {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl BinaryGrid {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// Cells strictly above `tau`.
pub fn threshold_map(map: &LocalizationMap, tau: f64) -> BinaryGrid {
    BinaryGrid {
        width: map.width,
        height: map.height,
        cells: map.values.iter().map(|&v| v > tau).collect(),
    }
}

/// Tightest box around the positive cells.
pub fn pseudo_bbox(grid: &BinaryGrid) -> Option<BBox> {
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for (i, _) in grid.cells.iter().enumerate().filter(|(_, &c)| c) {
        let (r, c) = (i / grid.width, i % grid.width);
        bounds = Some(match bounds {
            None => (r, r, c, c),
            Some((r0, r1, c0, c1)) => (r0.min(r), r1.max(r), c0.min(c), c1.max(c)),
        });
    }
    bounds.map(|(r0, r1, c0, c1)| BBox {
        x: c0 as u32,
        y: r0 as u32,
        w: (c1 - c0 + 1) as u32,
        h: (r1 - r0 + 1) as u32,
    })
}
