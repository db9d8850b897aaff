//! Binary greyscale PGM (P5) with 8-bit samples.
//!
//! Reading scales samples by `1 / maxval` into [0, 1]. Writing always uses
//! `maxval = 255` with the header `P5\n<width> <height>\n255\n`, clamping to
//! [0, 1] and rounding to the nearest level, so reading then writing an
//! 8-bit file with that header reproduces it byte for byte.

use std::path::Path;

use lstmcs::DenseMatrix;
use thiserror::Error;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PgmError {
    #[error("not a binary PGM: magic {0:?} (expected P5)")]
    NotP5(String),
    #[error("malformed PGM header: {0}")]
    Header(String),
    #[error("unsupported PGM maxval {0} (must be 1..=255)")]
    BadMaxval(u32),
    #[error("PGM pixel data truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
}

/// Reads one whitespace-delimited header token, skipping `#` comments.
fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> std::result::Result<&'a [u8], PgmError> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(PgmError::Header("unexpected end of header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn number(bytes: &[u8], pos: &mut usize, what: &str) -> std::result::Result<u32, PgmError> {
    let t = token(bytes, pos)?;
    std::str::from_utf8(t)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| PgmError::Header(format!("{what} {:?} is not a number", String::from_utf8_lossy(t))))
}

pub fn decode(bytes: &[u8]) -> std::result::Result<DenseMatrix, PgmError> {
    let mut pos = 0;
    let magic = token(bytes, &mut pos).map_err(|_| PgmError::NotP5(String::new()))?;
    if magic != b"P5" {
        return Err(PgmError::NotP5(String::from_utf8_lossy(magic).into_owned()));
    }
    let width = number(bytes, &mut pos, "width")? as usize;
    let height = number(bytes, &mut pos, "height")? as usize;
    let maxval = number(bytes, &mut pos, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::BadMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(PgmError::Header(format!("empty image {width}x{height}")));
    }
    // Exactly one whitespace byte separates the header from the samples.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(PgmError::Header("missing whitespace after maxval".into()));
    }
    pos += 1;
    let needed = width * height;
    let data = &bytes[pos..];
    if data.len() < needed {
        return Err(PgmError::Truncated {
            needed,
            available: data.len(),
        });
    }
    let scale = f64::from(maxval);
    let pixels = data[..needed].iter().map(|&p| f64::from(p) / scale).collect();
    Ok(DenseMatrix::new(height, width, pixels).expect("pixel count"))
}

pub fn encode(image: &DenseMatrix) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.cols(), image.rows()).into_bytes();
    out.extend(image.as_slice().iter().map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn read(path: &Path) -> Result<DenseMatrix> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|source| CliError::Pgm {
        path: path.into(),
        source,
    })
}

pub fn write(image: &DenseMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, encode(image)).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_fixture_scales() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 128, 64]);
        let img = decode(&bytes).unwrap();
        assert_eq!(img.as_slice(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
        assert_eq!(encode(&img), bytes);
    }

    #[test]
    fn comments_and_small_maxval() {
        let mut bytes = b"P5 # comment\n# another\n3 1 3\n".to_vec();
        bytes.extend_from_slice(&[0, 3, 1]);
        let img = decode(&bytes).unwrap();
        assert_eq!(img.shape(), (1, 3));
        assert_eq!(img.as_slice(), &[0.0, 1.0, 1.0 / 3.0]);
    }

    #[test]
    fn parse_errors_are_distinct() {
        assert!(matches!(decode(b"P2\n1 1\n255\n0"), Err(PgmError::NotP5(m)) if m == "P2"));
        assert_eq!(decode(b"P5\n1 1\n65535\n\0\0"), Err(PgmError::BadMaxval(65535)));
        assert_eq!(decode(b"P5\n1 1\n0\n\0"), Err(PgmError::BadMaxval(0)));
        assert_eq!(decode(b"P5\n2 2\n255\n\0"), Err(PgmError::Truncated { needed: 4, available: 1 }));
        assert!(matches!(decode(b"P5\nx 1\n255\n\0"), Err(PgmError::Header(_))));
    }

    #[test]
    fn encode_rounds_and_clamps() {
        let img = DenseMatrix::new(1, 3, vec![-0.5, 0.5, 2.0]).unwrap();
        assert_eq!(&encode(&img)[11..], &[0, 128, 255]);
    }

    proptest! {
        #[test]
        fn quantized_round_trip_is_bit_exact(w in 1usize..9, h in 1usize..9, seed in any::<u64>()) {
            let mut state = seed;
            let pixels: Vec<u8> = (0..w * h).map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 56) as u8
            }).collect();
            let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
            bytes.extend_from_slice(&pixels);
            prop_assert_eq!(encode(&decode(&bytes).unwrap()), bytes);
        }
    }
}
