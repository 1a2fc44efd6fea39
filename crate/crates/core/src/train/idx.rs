//! Reader for the big-endian IDX files used by MNIST-style datasets.

use std::path::Path;

use thiserror::Error;

use super::data::{Dataset, Role};
use crate::tensor::Tensor;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("bad magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32, IdxError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated { expected: at + 4, found: bytes.len() })
}

fn header(bytes: &[u8], magic: u32, dims: usize) -> Result<Vec<usize>, IdxError> {
    let found = be_u32(bytes, 0)?;
    if found != magic {
        return Err(IdxError::BadMagic { expected: magic, found });
    }
    (0..dims).map(|k| be_u32(bytes, 4 + 4 * k).map(|v| v as usize)).collect()
}

fn payload(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8], IdxError> {
    bytes
        .get(offset..offset + len)
        .ok_or(IdxError::Truncated { expected: offset + len, found: bytes.len() })
}

/// Decodes an image file into flattened rows scaled to [0, 1].
pub fn parse_images(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>), IdxError> {
    let dims = header(bytes, IMAGES_MAGIC, 3)?;
    let (n, width) = (dims[0], dims[1] * dims[2]);
    let raw = payload(bytes, 16, n * width)?;
    Ok((n, width, raw.iter().map(|&p| p as f64 / 255.0).collect()))
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<usize>, IdxError> {
    let n = header(bytes, LABELS_MAGIC, 1)?[0];
    Ok(payload(bytes, 8, n)?.iter().map(|&l| l as usize).collect())
}

fn read(path: &Path) -> Result<Vec<u8>, IdxError> {
    std::fs::read(path).map_err(|source| IdxError::Io { path: path.display().to_string(), source })
}

/// Loads a matching image/label file pair as one dataset.
pub fn load_idx(images_path: &Path, labels_path: &Path, role: Role) -> crate::Result<Dataset> {
    let (n, width, pixels) = parse_images(&read(images_path)?)?;
    let labels = parse_labels(&read(labels_path)?)?;
    if labels.len() != n {
        return Err(IdxError::CountMismatch { images: n, labels: labels.len() }.into());
    }
    if n == 0 || width == 0 {
        return Err(crate::Error::EmptyInput);
    }
    Dataset::new(Tensor::matrix(n, width, pixels)?, labels, role)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn images(n: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = IMAGES_MAGIC.to_be_bytes().to_vec();
        for d in [n, rows, cols] {
            b.extend_from_slice(&d.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    fn labels(ls: &[u8]) -> Vec<u8> {
        let mut b = LABELS_MAGIC.to_be_bytes().to_vec();
        b.extend_from_slice(&(ls.len() as u32).to_be_bytes());
        b.extend_from_slice(ls);
        b
    }

    #[test]
    fn four_two_by_two_images() {
        let px: Vec<u8> = (0..16).map(|i| (i * 17) as u8).collect();
        let (n, w, data) = parse_images(&images(4, 2, 2, &px)).unwrap();
        assert_eq!((n, w), (4, 4));
        assert_eq!(data[0], 0.0);
        assert_eq!(data[15], 1.0);
        assert_eq!(data[5], 85.0 / 255.0);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut b = images(1, 2, 2, &[0, 0, 0, 0]);
        b[3] = 0x01;
        assert!(matches!(parse_images(&b), Err(IdxError::BadMagic { found: 0x801, .. })));
        let b = images(2, 2, 2, &[0, 0, 0, 0]);
        assert!(matches!(parse_images(&b), Err(IdxError::Truncated { expected: 24, found: 20 })));
        assert!(matches!(parse_labels(&[0, 0]), Err(IdxError::Truncated { .. })));
    }

    #[test]
    fn load_checks_counts() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lbl");
        std::fs::write(&ip, images(2, 1, 2, &[0, 255, 255, 0])).unwrap();
        std::fs::write(&lp, labels(&[1, 0, 1])).unwrap();
        let err = load_idx(&ip, &lp, Role::Train).unwrap_err();
        assert!(err.to_string().contains("count mismatch"));

        std::fs::write(&lp, labels(&[1, 0])).unwrap();
        let ds = load_idx(&ip, &lp, Role::Train).unwrap();
        assert_eq!(ds.features.shape(), &[2, 2]);
        assert_eq!(ds.labels, vec![1, 0]);
    }
}
