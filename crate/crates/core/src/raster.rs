//! Raster model, binary PGM (P5) I/O and the log-ratio difference operator.
//!
//! Intensities are carried as `f64` whatever the source bit depth. PGM samples
//! are read without rescaling, so an 8-bit file yields values in `0..=255`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A pixel position. `row` indexes the image height, `col` the width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub const fn new(row: usize, col: usize) -> Self {
        Coord { row, col }
    }
}

/// Single-channel intensity image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::Dimension {
                expected: width * height,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Data(format!(
                "intensity {} at index {i} is not finite and non-negative",
                values[i]
            )));
        }
        Ok(Raster {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Raster::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Two co-registered acquisitions of the same scene.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalPair {
    t1: Raster,
    t2: Raster,
}

impl TemporalPair {
    pub fn new(t1: Raster, t2: Raster) -> Result<Self> {
        if !t1.same_shape(&t2) {
            return Err(Error::Alignment {
                left_width: t1.width,
                left_height: t1.height,
                right_width: t2.width,
                right_height: t2.height,
            });
        }
        Ok(TemporalPair { t1, t2 })
    }

    pub fn t1(&self) -> &Raster {
        &self.t1
    }

    pub fn t2(&self) -> &Raster {
        &self.t2
    }

    pub fn width(&self) -> usize {
        self.t1.width
    }

    pub fn height(&self) -> usize {
        self.t1.height
    }
}

/// Binary change labels: 0 = unchanged, 1 = changed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl ReferenceMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "reference map dimensions must be positive, got {width}x{height}"
            )));
        }
        if labels.len() != width * height {
            return Err(Error::Dimension {
                expected: width * height,
                found: labels.len(),
            });
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::Data(format!(
                "label {} at index {i} is not 0 or 1",
                labels[i]
            )));
        }
        Ok(ReferenceMap {
            width,
            height,
            labels,
        })
    }

    pub fn unchanged(width: usize, height: usize) -> Result<Self> {
        ReferenceMap::new(width, height, vec![0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn get(&self, c: Coord) -> u8 {
        self.labels[c.row * self.width + c.col]
    }

    pub fn set(&mut self, c: Coord, label: bool) {
        self.labels[c.row * self.width + c.col] = u8::from(label);
    }

    pub fn count_changed(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        let w = self.width;
        (0..self.labels.len()).map(move |i| Coord::new(i / w, i % w))
    }

    pub fn matches(&self, pair: &TemporalPair) -> bool {
        self.width == pair.width() && self.height == pair.height()
    }

    /// Raster view with changed pixels at 255.
    pub fn to_raster(&self) -> Raster {
        let values = self
            .labels
            .iter()
            .map(|&l| if l == 1 { 255.0 } else { 0.0 })
            .collect();
        Raster {
            width: self.width,
            height: self.height,
            values,
        }
    }

    /// Any nonzero intensity counts as changed.
    pub fn from_raster(r: &Raster) -> Self {
        ReferenceMap {
            width: r.width,
            height: r.height,
            labels: r.values.iter().map(|&v| u8::from(v != 0.0)).collect(),
        }
    }
}

/// Sample depth for [`save_raster`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value * 10 + u64::from(b - b'0');
            if value > u64::from(u32::MAX) {
                return Err(self.err(format!("{what} overflows")));
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err(format!("expected {what}")));
        }
        Ok(value as u32)
    }
}

/// Decodes a binary PGM (P5) byte buffer.
pub fn decode_pgm(bytes: &[u8]) -> Result<Raster> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    match bytes.get(..2) {
        Some(b"P5") => {}
        Some(b"P2") => return Err(cur.err("ASCII PGM (P2) is not supported")),
        _ => return Err(cur.err("missing P5 magic")),
    }
    cur.pos = 2;
    let width = cur.read_uint("width")? as usize;
    let height = cur.read_uint("height")? as usize;
    cur.skip_whitespace_and_comments();
    let maxval_offset = cur.pos;
    let maxval = cur.read_uint("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format {
            offset: maxval_offset,
            reason: format!("unsupported maxval {maxval}"),
        });
    }
    if width == 0 || height == 0 {
        return Err(cur.err(format!("empty image {width}x{height}")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err("expected whitespace after maxval")),
    }

    let n = width * height;
    let sample_bytes = if maxval < 256 { 1 } else { 2 };
    let payload = &bytes[cur.pos..];
    if payload.len() < n * sample_bytes {
        return Err(Error::Format {
            offset: bytes.len(),
            reason: format!(
                "truncated payload: need {} bytes, found {}",
                n * sample_bytes,
                payload.len()
            ),
        });
    }
    let values = if sample_bytes == 1 {
        payload[..n].iter().map(|&b| f64::from(b)).collect()
    } else {
        payload[..2 * n]
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])))
            .collect()
    };
    Raster::new(width, height, values)
}

/// Encodes a raster as binary PGM, rounding each value to the nearest integer.
pub fn encode_pgm(r: &Raster, depth: BitDepth) -> Result<Vec<u8>> {
    let max = depth.max_value();
    let header = format!("P5\n{} {}\n{}\n", r.width, r.height, max);
    let sample_bytes = if depth == BitDepth::Eight { 1 } else { 2 };
    let mut out = Vec::with_capacity(header.len() + r.values.len() * sample_bytes);
    out.extend_from_slice(header.as_bytes());
    for (i, &v) in r.values.iter().enumerate() {
        let q = v.round();
        if !(0.0..=f64::from(max)).contains(&q) {
            return Err(Error::Range {
                row: i / r.width,
                col: i % r.width,
                value: v,
                max,
            });
        }
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    Ok(out)
}

pub fn load_raster(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn save_raster(r: &Raster, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm(r, depth)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_pair(path1: impl AsRef<Path>, path2: impl AsRef<Path>) -> Result<TemporalPair> {
    TemporalPair::new(load_raster(path1)?, load_raster(path2)?)
}

pub fn load_reference(path: impl AsRef<Path>) -> Result<ReferenceMap> {
    Ok(ReferenceMap::from_raster(&load_raster(path)?))
}

pub fn save_reference(map: &ReferenceMap, path: impl AsRef<Path>) -> Result<()> {
    save_raster(&map.to_raster(), path, BitDepth::Eight)
}

/// Per-pixel `|ln((t2 + offset) / (t1 + offset))|`.
pub fn log_ratio(pair: &TemporalPair, offset: f64) -> Result<Raster> {
    if !(offset > 0.0 && offset.is_finite()) {
        return Err(Error::Parameter(format!(
            "log-ratio offset must be positive, got {offset}"
        )));
    }
    let values = pair
        .t1
        .values
        .iter()
        .zip(&pair.t2.values)
        .map(|(&a, &b)| ((b + offset) / (a + offset)).ln().abs())
        .collect();
    Raster::new(pair.width(), pair.height(), values)
}
