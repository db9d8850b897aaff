//! Turning a config into sparse matrices: seeded synthetic ensembles or image
//! groups (MNIST digit classes, or consecutive PGM files) cut into blocks.
//!
//! Every random stream is derived from the master seed with a fixed salt, so
//! training, validation and test instances never share a generator stream.

use std::path::{Path, PathBuf};

use lstmcs::rng::derive_seed;
use lstmcs::signal::{gen_sparse_ensemble, MeasurementEnsemble};
use lstmcs::transform::{block_transform, blockize, deblockize, Direction, TransformKind};
use lstmcs::DenseMatrix;

use crate::config::{Dataset, ExperimentConfig};
use crate::error::{CliError, CoreContext, Result};
use crate::{idx, pgm};

/// Salts of the derived seed streams.
pub mod stream {
    pub const SENSING: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const TEST: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SHUFFLE: u64 = 6;
    pub const VALIDATION: u64 = 7;
}

/// MNIST digits are center-cropped from 28 × 28 to this edge.
pub const MNIST_CROP: usize = 24;

/// The M × N sensing matrix; its seed depends only on the master seed.
pub fn sensing_matrix(cfg: &ExperimentConfig, m: usize) -> Result<MeasurementEnsemble> {
    MeasurementEnsemble::generate(m, cfg.n, derive_seed(cfg.seed, stream::SENSING)).context(|| format!("sensing matrix {m}x{}", cfg.n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub s: DenseMatrix,
    pub k: usize,
    pub seed: u64,
}

fn synthetic(cfg: &ExperimentConfig, k: usize, seed: u64) -> Result<SyntheticInstance> {
    let e = gen_sparse_ensemble(cfg.n, cfg.l, k, cfg.pattern, cfg.amplitude, seed).context(|| format!("synthetic instance (k = {k})"))?;
    Ok(SyntheticInstance { s: e.s, k, seed })
}

/// `count` instances cycling through `k_grid`, from the given stream.
fn cycling(cfg: &ExperimentConfig, salt: u64, count: usize) -> Result<Vec<SyntheticInstance>> {
    let base = derive_seed(cfg.seed, salt);
    (0..count)
        .map(|i| synthetic(cfg, cfg.k_grid[i % cfg.k_grid.len()], derive_seed(base, i as u64)))
        .collect()
}

pub fn synthetic_train(cfg: &ExperimentConfig) -> Result<Vec<SyntheticInstance>> {
    cycling(cfg, stream::TRAIN, cfg.train_count)
}

pub fn synthetic_validation(cfg: &ExperimentConfig) -> Result<Vec<SyntheticInstance>> {
    cycling(cfg, stream::VALIDATION, cfg.validation_count)
}

/// `test_count` instances of sparsity `k`; the trial seeds depend on `k`.
pub fn synthetic_test(cfg: &ExperimentConfig, k: usize) -> Result<Vec<SyntheticInstance>> {
    let base = derive_seed(derive_seed(cfg.seed, stream::TEST), k as u64);
    (0..cfg.test_count).map(|t| synthetic(cfg, k, derive_seed(base, t as u64))).collect()
}

/// `L` same-sized images measured together; channel `j` is image `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGroup {
    pub id: usize,
    pub images: Vec<DenseMatrix>,
    /// One N × L sparse matrix per block position, in block order.
    pub blocks: Vec<DenseMatrix>,
}

impl ImageGroup {
    pub fn new(id: usize, images: Vec<DenseMatrix>, block: usize, transform: TransformKind) -> Result<Self> {
        let shape = images[0].shape();
        if let Some(bad) = images.iter().find(|im| im.shape() != shape) {
            return Err(CliError::config(format!(
                "image group {id} mixes sizes {shape:?} and {:?}",
                bad.shape()
            )));
        }
        let columns = images
            .iter()
            .map(|im| {
                let coeffs = block_transform(im, block, transform, Direction::Forward)?;
                blockize(&coeffs, block)
            })
            .collect::<lstmcs::Result<Vec<_>>>()
            .context(|| format!("image group {id}"))?;
        let nblocks = columns[0].cols();
        let blocks = (0..nblocks)
            .map(|b| {
                let cols: Vec<_> = columns.iter().map(|c| c.column(b)).collect();
                DenseMatrix::from_columns(block * block, &cols).expect("block column length")
            })
            .collect();
        Ok(Self { id, images, blocks })
    }

    /// Pixel-domain images from per-block estimates.
    pub fn reconstruct(&self, estimates: &[DenseMatrix], block: usize, transform: TransformKind) -> Result<Vec<DenseMatrix>> {
        let (rows, cols) = self.images[0].shape();
        (0..self.images.len())
            .map(|j| {
                let columns: Vec<_> = estimates.iter().map(|e| e.column(j)).collect();
                let blocks = DenseMatrix::from_columns(block * block, &columns)?;
                let coeffs = deblockize(&blocks, block, rows, cols)?;
                block_transform(&coeffs, block, transform, Direction::Inverse)
            })
            .collect::<lstmcs::Result<Vec<_>>>()
            .context(|| format!("reconstructing image group {}", self.id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Center crop to `edge × edge`.
pub fn center_crop(image: &DenseMatrix, edge: usize) -> Result<DenseMatrix> {
    let (rows, cols) = image.shape();
    if rows < edge || cols < edge {
        return Err(CliError::config(format!("image {rows}x{cols} is smaller than the {edge}x{edge} crop")));
    }
    let (r0, c0) = ((rows - edge) / 2, (cols - edge) / 2);
    let mut out = DenseMatrix::zeros(edge, edge);
    for r in 0..edge {
        for c in 0..edge {
            out.set(r, c, image.get(r0 + r, c0 + c));
        }
    }
    Ok(out)
}

/// Images of one source, already arranged so that group `g` is entry `g`.
fn source_groups(cfg: &ExperimentConfig, images: &Path, labels: Option<&PathBuf>) -> Result<Vec<Vec<DenseMatrix>>> {
    match cfg.dataset {
        Dataset::Mnist => {
            let labels_path = labels.ok_or_else(|| CliError::config("mnist needs a labels path for every image source"))?;
            let pixels = idx::read_images(images)?;
            let labels = idx::read_labels(labels_path)?;
            if pixels.len() != labels.len() {
                return Err(CliError::config(format!(
                    "{} holds {} images but {} holds {} labels",
                    images.display(),
                    pixels.len(),
                    labels_path.display(),
                    labels.len()
                )));
            }
            let mut by_class: Vec<Vec<DenseMatrix>> = vec![Vec::new(); cfg.l];
            for (img, &label) in pixels.iter().zip(&labels) {
                if let Some(class) = by_class.get_mut(label as usize) {
                    class.push(center_crop(img, MNIST_CROP)?);
                }
            }
            let groups = by_class.iter().map(Vec::len).min().unwrap_or(0);
            Ok((0..groups).map(|g| by_class.iter().map(|c| c[g].clone()).collect()).collect())
        }
        Dataset::Images => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(images)
                .map_err(|e| CliError::io(images, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
                .collect();
            files.sort();
            files
                .chunks_exact(cfg.l)
                .map(|chunk| chunk.iter().map(|p| pgm::read(p)).collect::<Result<Vec<_>>>())
                .collect()
        }
        Dataset::Synthetic => Err(CliError::config("synthetic data has no image source")),
    }
}

/// Image groups of a split. Validation follows training in the training
/// source; test data comes from `test_images_path` when set, otherwise it
/// follows the validation groups.
pub fn image_groups(cfg: &ExperimentConfig, split: Split) -> Result<Vec<ImageGroup>> {
    let train_path = cfg.images_path.as_ref().ok_or_else(|| CliError::config("`images_path` is required"))?;
    let (path, labels, offset, count) = match split {
        Split::Train => (train_path, cfg.labels_path.as_ref(), 0, cfg.train_count),
        Split::Validation => (train_path, cfg.labels_path.as_ref(), cfg.train_count, cfg.validation_count),
        Split::Test => match &cfg.test_images_path {
            Some(p) => (p, cfg.test_labels_path.as_ref(), 0, cfg.test_count),
            None => (train_path, cfg.labels_path.as_ref(), cfg.train_count + cfg.validation_count, cfg.test_count),
        },
    };
    if count == 0 {
        return Ok(Vec::new());
    }
    let all = source_groups(cfg, path, labels)?;
    if all.len() < offset + count {
        return Err(CliError::config(format!(
            "{} provides {} groups of {} images; {split:?} needs groups {offset}..{}",
            path.display(),
            all.len(),
            cfg.l,
            offset + count
        )));
    }
    all.into_iter()
        .enumerate()
        .skip(offset)
        .take(count)
        .map(|(id, images)| ImageGroup::new(id, images, cfg.block, cfg.transform))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_disjoint_and_deterministic() {
        let cfg = ExperimentConfig {
            train_count: 5,
            validation_count: 3,
            k_grid: vec![2, 3],
            ..Default::default()
        };
        let train = synthetic_train(&cfg).unwrap();
        assert_eq!(train, synthetic_train(&cfg).unwrap());
        assert_eq!(train.iter().map(|t| t.k).collect::<Vec<_>>(), vec![2, 3, 2, 3, 2]);
        let test = synthetic_test(&cfg, 2).unwrap();
        let valid = synthetic_validation(&cfg).unwrap();
        for t in &test {
            assert!(train.iter().chain(&valid).all(|x| x.seed != t.seed && x.s != t.s));
        }
        assert_ne!(synthetic_test(&cfg, 3).unwrap()[0].seed, test[0].seed);
    }

    #[test]
    fn crop_takes_the_center() {
        let img = DenseMatrix::new(28, 28, (0..784).map(f64::from).collect()).unwrap();
        let c = center_crop(&img, 24).unwrap();
        assert_eq!(c.get(0, 0), img.get(2, 2));
        assert_eq!(c.get(23, 23), img.get(25, 25));
        assert!(center_crop(&c, 25).is_err());
    }

    #[test]
    fn image_group_blocks_and_reconstructs() {
        for transform in [TransformKind::None, TransformKind::Dct, TransformKind::Haar3] {
            let images: Vec<_> = (0..2)
                .map(|j| DenseMatrix::new(16, 16, (0..256).map(|i| ((i * (j + 3)) % 17) as f64 / 17.0).collect()).unwrap())
                .collect();
            let g = ImageGroup::new(0, images.clone(), 8, transform).unwrap();
            assert_eq!(g.blocks.len(), 4);
            assert_eq!(g.blocks[0].shape(), (64, 2));
            let back = g.reconstruct(&g.blocks, 8, transform).unwrap();
            for (a, b) in back.iter().zip(&images) {
                assert!(a.sub(b).unwrap().max_abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mixed_sizes_are_rejected() {
        let images = vec![DenseMatrix::zeros(8, 8), DenseMatrix::zeros(16, 8)];
        assert!(ImageGroup::new(3, images, 8, TransformKind::None).is_err());
    }
}
