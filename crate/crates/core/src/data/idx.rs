//! IDX ingestion (the MNIST container format): big-endian u32 magic, one u32
//! per dimension, then unsigned bytes.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format { offset: offset as u64, message: "truncated header".into() })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = read_u32(bytes, 0)?;
    if magic != expected {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {magic:#010x}, expected {expected:#010x}"),
        });
    }
    Ok(())
}

/// Parses an image file; returns `(n, rows * cols, pixels scaled to [0, 1])`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let n = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let dim = rows * cols;
    let payload = &bytes[16..];
    let need = n * dim;
    if payload.len() < need {
        return Err(Error::Format {
            offset: (16 + payload.len()) as u64,
            message: format!("truncated pixel data: expected {need} bytes, found {}", payload.len()),
        });
    }
    let pixels = payload[..need].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok((n, dim, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let n = read_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() < n {
        return Err(Error::Format {
            offset: (8 + payload.len()) as u64,
            message: format!("truncated labels: expected {n} bytes, found {}", payload.len()),
        });
    }
    Ok(payload[..n].iter().map(|&b| b as usize).collect())
}

/// Loads a pair of IDX files into a dataset with `classes` label values.
pub fn load_idx(images: &Path, labels: &Path, classes: usize) -> Result<Dataset> {
    let (n, dim, pixels) = parse_idx_images(&fs::read(images)?)?;
    let labels = parse_idx_labels(&fs::read(labels)?)?;
    if labels.len() != n {
        return Err(Error::Format {
            offset: 4,
            message: format!("{n} images but {} labels", labels.len()),
        });
    }
    Dataset::new(pixels, labels, dim, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut out = magic.to_be_bytes().to_vec();
        for d in dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out
    }

    #[test]
    fn mnist_sized_header() {
        let mut bytes = header(2051, &[10_000, 28, 28]);
        bytes.resize(16 + 10_000 * 784, 255);
        let (n, dim, pixels) = parse_idx_images(&bytes).unwrap();
        assert_eq!((n, dim), (10_000, 784));
        assert!(pixels.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let bytes = header(2049, &[1, 1, 1]);
        match parse_idx_images(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let mut bytes = header(2049, &[5]);
        bytes.extend_from_slice(&[1, 2, 3]);
        match parse_idx_labels(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 11),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_idx_labels(&[0, 0, 8]).is_err());
    }

    #[test]
    fn labels_roundtrip() {
        let mut bytes = header(2049, &[3]);
        bytes.extend_from_slice(&[7, 1, 0]);
        assert_eq!(parse_idx_labels(&bytes).unwrap(), vec![7, 1, 0]);
    }
}
