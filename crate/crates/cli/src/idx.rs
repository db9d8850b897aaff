//! Read-only IDX (MNIST) parsing.
//!
//! Layout: two zero bytes, an element-type byte (only `0x08`, unsigned byte,
//! is supported), a rank byte, `rank` big-endian u32 dimension sizes, then
//! the raw elements in row-major order.

use std::path::Path;

use lstmcs::DenseMatrix;
use thiserror::Error;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdxError {
    #[error("IDX magic must start with two zero bytes, found {0:02x} {1:02x}")]
    BadMagic(u8, u8),
    #[error("unsupported IDX element type {0:#04x} (only 0x08 unsigned byte)")]
    UnsupportedType(u8),
    #[error("IDX rank {found} where rank {expected} was expected")]
    BadRank { expected: u8, found: u8 },
    #[error("IDX stream truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("IDX stream has {extra} trailing bytes beyond the declared dimensions")]
    TrailingData { extra: usize },
}

/// An unsigned-byte IDX tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxTensor {
    pub fn parse(bytes: &[u8]) -> std::result::Result<Self, IdxError> {
        if bytes.len() < 4 {
            return Err(IdxError::Truncated {
                needed: 4,
                available: bytes.len(),
            });
        }
        if bytes[0] != 0 || bytes[1] != 0 {
            return Err(IdxError::BadMagic(bytes[0], bytes[1]));
        }
        if bytes[2] != 0x08 {
            return Err(IdxError::UnsupportedType(bytes[2]));
        }
        let rank = bytes[3] as usize;
        let header = 4 + 4 * rank;
        if bytes.len() < header {
            return Err(IdxError::Truncated {
                needed: header,
                available: bytes.len(),
            });
        }
        let dims: Vec<usize> = bytes[4..header]
            .chunks_exact(4)
            .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        let needed = dims.iter().product::<usize>() + header;
        match bytes.len().cmp(&needed) {
            std::cmp::Ordering::Less => Err(IdxError::Truncated {
                needed,
                available: bytes.len(),
            }),
            std::cmp::Ordering::Greater => Err(IdxError::TrailingData {
                extra: bytes.len() - needed,
            }),
            std::cmp::Ordering::Equal => Ok(Self {
                dims,
                data: bytes[header..].to_vec(),
            }),
        }
    }

    fn expect_rank(&self, rank: u8) -> std::result::Result<(), IdxError> {
        if self.dims.len() != rank as usize {
            return Err(IdxError::BadRank {
                expected: rank,
                found: self.dims.len() as u8,
            });
        }
        Ok(())
    }

    /// A rank-3 tensor as `count` images with pixels scaled to [0, 1].
    pub fn images(&self) -> std::result::Result<Vec<DenseMatrix>, IdxError> {
        self.expect_rank(3)?;
        let (rows, cols) = (self.dims[1], self.dims[2]);
        Ok(self
            .data
            .chunks_exact(rows * cols)
            .map(|px| DenseMatrix::new(rows, cols, px.iter().map(|&p| f64::from(p) / 255.0).collect()).expect("chunk size"))
            .collect())
    }

    /// A rank-1 tensor of labels.
    pub fn labels(&self) -> std::result::Result<Vec<u8>, IdxError> {
        self.expect_rank(1)?;
        Ok(self.data.clone())
    }
}

fn read(path: &Path) -> Result<IdxTensor> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    IdxTensor::parse(&bytes).map_err(|source| CliError::Idx {
        path: path.into(),
        source,
    })
}

pub fn read_images(path: &Path) -> Result<Vec<DenseMatrix>> {
    read(path)?.images().map_err(|source| CliError::Idx {
        path: path.into(),
        source,
    })
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    read(path)?.labels().map_err(|source| CliError::Idx {
        path: path.into(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent fixture writer: header assembled byte by byte.
    fn fixture(dims: &[u32], data: &[u8]) -> Vec<u8> {
        let mut out = vec![0, 0, 8, dims.len() as u8];
        for d in dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn two_image_fixture_round_trips() {
        let data: Vec<u8> = (0..2 * 3 * 2).map(|i| (i * 20) as u8).collect();
        let t = IdxTensor::parse(&fixture(&[2, 3, 2], &data)).unwrap();
        assert_eq!(t.dims, vec![2, 3, 2]);
        let imgs = t.images().unwrap();
        assert_eq!(imgs.len(), 2);
        assert_eq!(imgs[1].shape(), (3, 2));
        assert_eq!(imgs[0].get(0, 1), 20.0 / 255.0);
        assert_eq!(imgs[1].get(2, 1), 220.0 / 255.0);
    }

    #[test]
    fn header_bytes_identify_rank_three_ubyte() {
        let bytes = fixture(&[1, 28, 28], &[0; 784]);
        assert_eq!(&bytes[..4], &[0x00, 0x00, 0x08, 0x03]);
        assert_eq!(IdxTensor::parse(&bytes).unwrap().dims, vec![1, 28, 28]);
    }

    #[test]
    fn labels_parse() {
        assert_eq!(IdxTensor::parse(&fixture(&[3], &[7, 0, 9])).unwrap().labels().unwrap(), vec![7, 0, 9]);
    }

    #[test]
    fn distinct_errors() {
        assert_eq!(IdxTensor::parse(&[1, 0, 8, 1, 0, 0, 0, 0]), Err(IdxError::BadMagic(1, 0)));
        assert_eq!(IdxTensor::parse(&[0, 0, 0x0d, 1, 0, 0, 0, 0]), Err(IdxError::UnsupportedType(0x0d)));
        assert!(matches!(IdxTensor::parse(&fixture(&[2, 2, 2], &[0; 7])), Err(IdxError::Truncated { needed: 24, available: 23 })));
        assert_eq!(IdxTensor::parse(&fixture(&[2], &[0; 3])), Err(IdxError::TrailingData { extra: 1 }));
        assert!(matches!(IdxTensor::parse(&[0, 0, 8]), Err(IdxError::Truncated { .. })));
        let labels = IdxTensor::parse(&fixture(&[2], &[1, 2])).unwrap();
        assert_eq!(labels.images(), Err(IdxError::BadRank { expected: 3, found: 1 }));
    }
}
