//! Per-block orthonormal transforms (2-D DCT-II, 3-level Haar) and the
//! block ⇄ column vectorization used to turn images into sparse matrices.
//!
//! Vectorization order: pixels of a block are read column-major
//! (`index = col·block + row`), and blocks are ordered row-major across the
//! image (`block_index = block_row·(width/block) + block_col`).

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Dct,
    Haar3,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

const HAAR_LEVELS: usize = 3;

fn check_divisible(image: &DenseMatrix, block: usize) -> Result<()> {
    if block == 0 || !image.rows().is_multiple_of(block) || !image.cols().is_multiple_of(block) {
        return Err(Error::config(format!(
            "image {}x{} is not divisible into {block}x{block} blocks",
            image.rows(),
            image.cols()
        )));
    }
    Ok(())
}

/// Orthonormal DCT-II matrix `C` with `C[k][n] = α_k cos(π(2n+1)k / 2B)`.
pub fn dct_matrix(size: usize) -> DenseMatrix {
    let mut c = DenseMatrix::zeros(size, size);
    let b = size as f64;
    for k in 0..size {
        let alpha = if k == 0 { (1.0 / b).sqrt() } else { (2.0 / b).sqrt() };
        for n in 0..size {
            let angle = std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2.0 * b);
            c.set(k, n, alpha * angle.cos());
        }
    }
    c
}

/// Applies `out = T · X · Tᵀ` (or `Tᵀ · X · T` when `transpose_t`) to one block in place.
fn separable(block: &mut [f64], size: usize, t: &DenseMatrix, transpose_t: bool) {
    let coef = |i: usize, j: usize| if transpose_t { t.get(j, i) } else { t.get(i, j) };
    let mut tmp = vec![0.0; size * size];
    // tmp = T · X
    for i in 0..size {
        for j in 0..size {
            tmp[i * size + j] = (0..size).map(|k| coef(i, k) * block[k * size + j]).sum();
        }
    }
    // out = tmp · Tᵀ
    for i in 0..size {
        for j in 0..size {
            block[i * size + j] = (0..size).map(|k| tmp[i * size + k] * coef(j, k)).sum();
        }
    }
}

fn haar_step_forward(v: &mut [f64], len: usize) {
    let half = len / 2;
    let mut out = vec![0.0; len];
    for i in 0..half {
        let (a, b) = (v[2 * i], v[2 * i + 1]);
        out[i] = (a + b) * std::f64::consts::FRAC_1_SQRT_2;
        out[half + i] = (a - b) * std::f64::consts::FRAC_1_SQRT_2;
    }
    v[..len].copy_from_slice(&out);
}

fn haar_step_inverse(v: &mut [f64], len: usize) {
    let half = len / 2;
    let mut out = vec![0.0; len];
    for i in 0..half {
        let (s, d) = (v[i], v[half + i]);
        out[2 * i] = (s + d) * std::f64::consts::FRAC_1_SQRT_2;
        out[2 * i + 1] = (s - d) * std::f64::consts::FRAC_1_SQRT_2;
    }
    v[..len].copy_from_slice(&out);
}

/// One 2-D level on the top-left `len × len` region: rows, then columns.
fn haar_level(block: &mut [f64], size: usize, len: usize, dir: Direction) {
    let step = match dir {
        Direction::Forward => haar_step_forward,
        Direction::Inverse => haar_step_inverse,
    };
    let mut line = vec![0.0; len];
    let mut rows = |block: &mut [f64]| {
        for r in 0..len {
            line.copy_from_slice(&block[r * size..r * size + len]);
            step(&mut line, len);
            block[r * size..r * size + len].copy_from_slice(&line);
        }
    };
    let mut col_line = vec![0.0; len];
    let mut cols = |block: &mut [f64]| {
        for c in 0..len {
            for r in 0..len {
                col_line[r] = block[r * size + c];
            }
            step(&mut col_line, len);
            for r in 0..len {
                block[r * size + c] = col_line[r];
            }
        }
    };
    match dir {
        Direction::Forward => {
            rows(block);
            cols(block);
        }
        Direction::Inverse => {
            cols(block);
            rows(block);
        }
    }
}

/// Dyadic (Mallat) 3-level Haar decomposition of a square block.
fn haar3(block: &mut [f64], size: usize, dir: Direction) {
    match dir {
        Direction::Forward => {
            for level in 0..HAAR_LEVELS {
                haar_level(block, size, size >> level, dir);
            }
        }
        Direction::Inverse => {
            for level in (0..HAAR_LEVELS).rev() {
                haar_level(block, size, size >> level, dir);
            }
        }
    }
}

/// Applies the transform independently to every `block × block` tile.
pub fn block_transform(image: &DenseMatrix, block: usize, kind: TransformKind, dir: Direction) -> Result<DenseMatrix> {
    check_divisible(image, block)?;
    if kind == TransformKind::Haar3 && !block.is_multiple_of(1 << HAAR_LEVELS) {
        return Err(Error::config(format!("haar3 needs a block size divisible by 8, got {block}")));
    }
    if kind == TransformKind::None {
        return Ok(image.clone());
    }
    let dct = (kind == TransformKind::Dct).then(|| dct_matrix(block));
    let mut out = image.clone();
    let mut tile = vec![0.0; block * block];
    for br in (0..image.rows()).step_by(block) {
        for bc in (0..image.cols()).step_by(block) {
            for r in 0..block {
                for c in 0..block {
                    tile[r * block + c] = out.get(br + r, bc + c);
                }
            }
            match kind {
                TransformKind::Dct => {
                    let t = dct.as_ref().expect("dct matrix");
                    separable(&mut tile, block, t, dir == Direction::Inverse);
                }
                TransformKind::Haar3 => haar3(&mut tile, block, dir),
                TransformKind::None => unreachable!(),
            }
            for r in 0..block {
                for c in 0..block {
                    out.set(br + r, bc + c, tile[r * block + c]);
                }
            }
        }
    }
    Ok(out)
}

/// Image → (block² × nblocks) matrix, one vectorized block per column.
pub fn blockize(image: &DenseMatrix, block: usize) -> Result<DenseMatrix> {
    check_divisible(image, block)?;
    let per_row = image.cols() / block;
    let nblocks = per_row * (image.rows() / block);
    let mut out = DenseMatrix::zeros(block * block, nblocks);
    for b in 0..nblocks {
        let (br, bc) = ((b / per_row) * block, (b % per_row) * block);
        for c in 0..block {
            for r in 0..block {
                out.set(c * block + r, b, image.get(br + r, bc + c));
            }
        }
    }
    Ok(out)
}

/// Inverse of [`blockize`] for an image of `rows × cols` pixels.
pub fn deblockize(blocks: &DenseMatrix, block: usize, rows: usize, cols: usize) -> Result<DenseMatrix> {
    let mut image = DenseMatrix::zeros(rows, cols);
    check_divisible(&image, block)?;
    let per_row = cols / block;
    let nblocks = per_row * (rows / block);
    if blocks.shape() != (block * block, nblocks) {
        return Err(Error::Shape {
            op: "deblockize",
            left: blocks.shape(),
            right: (block * block, nblocks),
        });
    }
    for b in 0..nblocks {
        let (br, bc) = ((b / per_row) * block, (b % per_row) * block);
        for c in 0..block {
            for r in 0..block {
                image.set(br + r, bc + c, blocks.get(c * block + r, b));
            }
        }
    }
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn random_image(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = SeededRng::new(seed);
        DenseMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.uniform()).collect()).unwrap()
    }

    #[test]
    fn dct_of_constant_block_is_dc_only() {
        let img = DenseMatrix::new(8, 8, vec![0.3; 64]).unwrap();
        let c = block_transform(&img, 8, TransformKind::Dct, Direction::Forward).unwrap();
        assert!((c.get(0, 0) - 8.0 * 0.3).abs() < 1e-12);
        for i in 0..8 {
            for j in 0..8 {
                if (i, j) != (0, 0) {
                    assert!(c.get(i, j).abs() < 1e-12, "({i},{j}) = {}", c.get(i, j));
                }
            }
        }
    }

    #[test]
    fn haar_of_constant_block_has_one_coefficient() {
        let img = DenseMatrix::new(8, 8, vec![0.7; 64]).unwrap();
        let c = block_transform(&img, 8, TransformKind::Haar3, Direction::Forward).unwrap();
        let nonzero = c.as_slice().iter().filter(|&&x| x != 0.0).count();
        assert_eq!(nonzero, 1);
        assert!((c.get(0, 0) - 8.0 * 0.7).abs() < 1e-12);
    }

    #[test]
    fn round_trips_on_64x64() {
        let img = random_image(64, 64, 1);
        for kind in [TransformKind::Dct, TransformKind::Haar3] {
            let fwd = block_transform(&img, 8, kind, Direction::Forward).unwrap();
            let back = block_transform(&fwd, 8, kind, Direction::Inverse).unwrap();
            assert!(back.sub(&img).unwrap().max_abs() <= 1e-10, "{kind:?}");
        }
    }

    #[test]
    fn indivisible_dimensions_rejected() {
        let img = random_image(10, 8, 2);
        assert!(block_transform(&img, 8, TransformKind::Dct, Direction::Forward).is_err());
        assert!(blockize(&img, 4).is_err());
        let img = random_image(12, 12, 2);
        assert!(block_transform(&img, 12, TransformKind::Haar3, Direction::Forward).is_err());
    }

    #[test]
    fn blockize_shapes() {
        assert_eq!(blockize(&random_image(24, 24, 3), 12).unwrap().shape(), (144, 4));
        assert_eq!(blockize(&random_image(64, 64, 3), 8).unwrap().shape(), (64, 64));
    }

    #[test]
    fn blockize_order_is_column_major_within_row_major_across() {
        let data: Vec<f64> = (0..16).map(|x| x as f64).collect();
        let img = DenseMatrix::new(4, 4, data).unwrap();
        let b = blockize(&img, 2).unwrap();
        // Block 0 is rows 0..2, cols 0..2: pixels 0,1,4,5 read column-major.
        assert_eq!(b.column(0).as_ref(), &[0.0, 4.0, 1.0, 5.0]);
        // Block 1 is to the right of block 0.
        assert_eq!(b.column(1).as_ref(), &[2.0, 6.0, 3.0, 7.0]);
        assert_eq!(b.column(2).as_ref(), &[8.0, 12.0, 9.0, 13.0]);
    }

    proptest! {
        #[test]
        fn transforms_preserve_energy(seed in any::<u64>(), kind in prop_oneof![Just(TransformKind::Dct), Just(TransformKind::Haar3)]) {
            let img = random_image(16, 16, seed);
            let fwd = block_transform(&img, 8, kind, Direction::Forward).unwrap();
            prop_assert!((fwd.frobenius_norm() - img.frobenius_norm()).abs() <= 1e-10);
            let back = block_transform(&fwd, 8, kind, Direction::Inverse).unwrap();
            prop_assert!(back.sub(&img).unwrap().max_abs() <= 1e-10);
        }

        #[test]
        fn blockize_round_trip_is_exact(seed in any::<u64>(), bs in prop_oneof![Just(2usize), Just(4), Just(12)], by in 1usize..4, bx in 1usize..4) {
            let img = random_image(bs * by, bs * bx, seed);
            let back = deblockize(&blockize(&img, bs).unwrap(), bs, img.rows(), img.cols()).unwrap();
            prop_assert_eq!(back, img);
        }
    }
}
