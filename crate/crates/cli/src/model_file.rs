//! Binary model persistence.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "PCNM" | version u32 = 1 | h, k, L1, L2, block_side, D: u32 | normalize_hist u8
//! stage-1 filters: L1·k·k f64 (filter-major, row-major within a filter)
//! stage-2 filters: L2·k·k f64
//! classifier weights: D f64 | bias f64
//! CRC32 of every preceding byte: u32
//! ```

use std::fs;
use std::path::Path;

use sarcd_core::classifier::LinearModel;
use sarcd_core::pcanet::{FeatureExtractor, FilterBank, Map, PcaNetModel, MAX_L2};

use crate::error::{CliError, Result};

pub const MAGIC: [u8; 4] = *b"PCNM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 6 * 4 + 1;

pub fn encode(model: &PcaNetModel) -> Vec<u8> {
    let ex = &model.extractor;
    let k = ex.k();
    let mut out = Vec::with_capacity(expected_len(k, ex.stage1.len(), ex.stage2.len(), model.feature_len()));
    out.extend_from_slice(&MAGIC);
    for v in [
        VERSION,
        ex.h as u32,
        k as u32,
        ex.stage1.len() as u32,
        ex.stage2.len() as u32,
        ex.block_side as u32,
        model.feature_len() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(u8::from(ex.normalize_hist));
    for bank in [&ex.stage1, &ex.stage2] {
        for f in bank.filters() {
            for v in f.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    for v in model.classifier.weights.iter().chain([&model.classifier.bias]) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn expected_len(k: usize, l1: usize, l2: usize, d: usize) -> usize {
    HEADER_LEN + 8 * ((l1 + l2) * k * k + d + 1) + 4
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u32(&mut self) -> u32 {
        let v = u32::from_le_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        v
    }

    fn f64(&mut self) -> f64 {
        let v = f64::from_le_bytes(self.bytes[self.pos..self.pos + 8].try_into().unwrap());
        self.pos += 8;
        v
    }

    fn bank(&mut self, count: usize, k: usize) -> Result<FilterBank> {
        let filters = (0..count)
            .map(|_| Map::new(k, k, (0..k * k).map(|_| self.f64()).collect()))
            .collect::<sarcd_core::Result<Vec<_>>>()?;
        Ok(FilterBank::from_filters(k, filters, Vec::new())?)
    }
}

pub fn decode(bytes: &[u8]) -> Result<PcaNetModel> {
    if bytes.len() < HEADER_LEN {
        return Err(CliError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(CliError::BadMagic { found: magic });
    }
    let mut rd = Reader { bytes, pos: 4 };
    let version = rd.u32();
    if version != VERSION {
        return Err(CliError::UnsupportedVersion(version));
    }
    let [h, k, l1, l2, block_side, d] = [(); 6].map(|_| rd.u32() as usize);
    let normalize = bytes[rd.pos];
    rd.pos += 1;

    if k == 0 || l1 == 0 || l2 == 0 || l2 > MAX_L2 || l1 > k * k || l2 > k * k {
        return Err(CliError::Inconsistent(format!(
            "header k={k}, L1={l1}, L2={l2} out of range"
        )));
    }
    let expected = expected_len(k, l1, l2, d);
    if bytes.len() < expected {
        return Err(CliError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(CliError::Inconsistent(format!(
            "{} trailing bytes after CRC",
            bytes.len() - expected
        )));
    }
    let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..expected - 4]);
    if stored != computed {
        return Err(CliError::Crc { stored, computed });
    }

    if h == 0 || h % 2 == 0 || block_side == 0 || h % block_side != 0 || k > h {
        return Err(CliError::Inconsistent(format!(
            "geometry h={h}, k={k}, block={block_side} is invalid"
        )));
    }
    if normalize > 1 {
        return Err(CliError::Inconsistent(format!("normalize flag {normalize}")));
    }
    let blocks = (2 * h / block_side) * (h / block_side);
    if d != l1 * blocks * (1 << l2) {
        return Err(CliError::Inconsistent(format!(
            "feature length {d} != L1·B·2^L2 = {}",
            l1 * blocks * (1 << l2)
        )));
    }

    let stage1 = rd.bank(l1, k)?;
    let stage2 = rd.bank(l2, k)?;
    let weights: Vec<f64> = (0..d).map(|_| rd.f64()).collect();
    let bias = rd.f64();
    let extractor = FeatureExtractor {
        h,
        block_side,
        normalize_hist: normalize == 1,
        stage1,
        stage2,
    };
    Ok(PcaNetModel::new(extractor, LinearModel { weights, bias })?)
}

pub fn save_model(model: &PcaNetModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(model)).map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PcaNetModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model() -> PcaNetModel {
        let k = 3;
        let bank = |n: usize, off: f64| {
            let filters = (0..n)
                .map(|i| Map::new(k, k, (0..9).map(|j| off + (i * 9 + j) as f64 * 0.125).collect()).unwrap())
                .collect();
            FilterBank::from_filters(k, filters, Vec::new()).unwrap()
        };
        let extractor = FeatureExtractor {
            h: 3,
            block_side: 3,
            normalize_hist: true,
            stage1: bank(2, -1.0),
            stage2: bank(2, 0.5),
        };
        let d = extractor.feature_len();
        assert_eq!(d, 2 * 2 * 4);
        let classifier = LinearModel {
            weights: (0..d).map(|i| i as f64 - 7.5).collect(),
            bias: -0.25,
        };
        PcaNetModel::new(extractor, classifier).unwrap()
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let m = toy_model();
        let bytes = encode(&m);
        assert_eq!(&bytes[..4], b"PCNM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.extractor.stage1.filters(), m.extractor.stage1.filters());
        assert_eq!(back.classifier, m.classifier);
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode(&toy_model());
        let mut flipped = bytes.clone();
        flipped[HEADER_LEN + 17] ^= 0x01;
        assert!(matches!(decode(&flipped), Err(CliError::Crc { .. })));

        assert!(matches!(decode(&bytes[..bytes.len() - 9]), Err(CliError::Truncated { .. })));
        assert!(matches!(decode(&bytes[..10]), Err(CliError::Truncated { .. })));

        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(decode(&magic), Err(CliError::BadMagic { .. })));

        let mut version = bytes.clone();
        version[4] = 2;
        assert!(matches!(decode(&version), Err(CliError::UnsupportedVersion(2))));
    }

    #[test]
    fn inconsistent_dimension_is_rejected() {
        let mut bytes = encode(&toy_model());
        // Claim a different D and fix the CRC so only the consistency check can fail.
        let d_off = 4 + 4 + 5 * 4;
        bytes[d_off..d_off + 4].copy_from_slice(&15u32.to_le_bytes());
        bytes.truncate(bytes.len() - 4 - 8);
        let crc = crc32fast::hash(&bytes);
        bytes.extend_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(CliError::Inconsistent(_))));
    }
}
