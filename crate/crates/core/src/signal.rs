//! Measurement ensembles, sparse signal ensembles, noisy encoding and the
//! reconstruction metric.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::SeededRng;

/// Column-normalized Gaussian sensing matrix `A` (M × N).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    matrix: DenseMatrix,
    seed: u64,
}

impl MeasurementEnsemble {
    /// Draws `M·N` standard normals in row-major order, then scales every
    /// column to unit ℓ₂ norm.
    pub fn generate(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::config(format!("measurement ensemble needs M, N > 0 (got M={m}, N={n})")));
        }
        if m > n {
            return Err(Error::config(format!("measurement ensemble needs M <= N (got M={m}, N={n})")));
        }
        let mut rng = SeededRng::new(seed);
        let data: Vec<f64> = (0..m * n).map(|_| rng.standard_normal()).collect();
        let mut matrix = DenseMatrix::new(m, n, data)?;
        normalize_columns(&mut matrix);
        Ok(Self { matrix, seed })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn m(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n(&self) -> usize {
        self.matrix.cols()
    }
}

fn normalize_columns(matrix: &mut DenseMatrix) {
    let (rows, cols) = matrix.shape();
    let mut norms = vec![0.0; cols];
    for i in 0..rows {
        for (j, acc) in norms.iter_mut().enumerate() {
            *acc += matrix.get(i, j).powi(2);
        }
    }
    for n in &mut norms {
        *n = n.sqrt();
    }
    let data = matrix.as_mut_slice();
    for i in 0..rows {
        for j in 0..cols {
            if norms[j] > 0.0 {
                data[i * cols + j] /= norms[j];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparsityPattern {
    /// All channels share one support.
    Joint,
    /// Every channel draws its own support.
    Independent,
    /// Taken from image blocks or transform coefficients.
    ImageDerived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeLaw {
    /// Magnitude uniform on [0.5, 1.5] with an independent random sign.
    UniformSigned,
    Gaussian,
}

/// Sparse matrix `S` (N × L) with its per-channel sparsity.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEnsemble {
    pub s: DenseMatrix,
    pub k_per_channel: Vec<usize>,
    pub pattern: SparsityPattern,
}

impl SparseEnsemble {
    /// Wraps an arbitrary matrix, counting non-zeros per column.
    pub fn from_matrix(s: DenseMatrix, pattern: SparsityPattern) -> Self {
        let k_per_channel = (0..s.cols())
            .map(|j| (0..s.rows()).filter(|&i| s.get(i, j) != 0.0).count())
            .collect();
        Self { s, k_per_channel, pattern }
    }

    pub fn n(&self) -> usize {
        self.s.rows()
    }

    pub fn channels(&self) -> usize {
        self.s.cols()
    }

    pub fn support(&self, channel: usize) -> Vec<usize> {
        (0..self.s.rows()).filter(|&i| self.s.get(i, channel) != 0.0).collect()
    }
}

/// `L` channels with `k` non-zeros each.
pub fn gen_sparse_ensemble(
    n: usize,
    l: usize,
    k: usize,
    pattern: SparsityPattern,
    law: AmplitudeLaw,
    seed: u64,
) -> Result<SparseEnsemble> {
    gen_sparse_ensemble_with_counts(n, &vec![k; l], pattern, law, seed)
}

/// Per-channel sparsity counts. Supports are drawn uniformly without
/// replacement (once for `Joint`, per channel for `Independent`), then the
/// amplitudes of each channel in ascending index order.
pub fn gen_sparse_ensemble_with_counts(
    n: usize,
    counts: &[usize],
    pattern: SparsityPattern,
    law: AmplitudeLaw,
    seed: u64,
) -> Result<SparseEnsemble> {
    if let Some(&k) = counts.iter().find(|&&k| k > n) {
        return Err(Error::config(format!("sparsity k={k} exceeds signal length N={n}")));
    }
    let l = counts.len();
    let mut rng = SeededRng::new(seed);
    let supports: Vec<Vec<usize>> = match pattern {
        SparsityPattern::Joint => {
            let k = counts.first().copied().unwrap_or(0);
            if counts.iter().any(|&c| c != k) {
                return Err(Error::config("joint sparsity requires equal k in every channel"));
            }
            let mut shared = rng.choose(n, k);
            shared.sort_unstable();
            vec![shared; l]
        }
        SparsityPattern::Independent => counts
            .iter()
            .map(|&k| {
                let mut s = rng.choose(n, k);
                s.sort_unstable();
                s
            })
            .collect(),
        SparsityPattern::ImageDerived => {
            return Err(Error::config("image-derived ensembles come from data, not the generator"));
        }
    };
    let mut s = DenseMatrix::zeros(n, l);
    for (j, support) in supports.iter().enumerate() {
        for &i in support {
            s.set(i, j, draw_amplitude(&mut rng, law));
        }
    }
    Ok(SparseEnsemble {
        s,
        k_per_channel: counts.to_vec(),
        pattern,
    })
}

fn draw_amplitude(rng: &mut SeededRng, law: AmplitudeLaw) -> f64 {
    match law {
        AmplitudeLaw::UniformSigned => {
            let magnitude = rng.uniform_range(0.5, 1.5);
            if rng.uniform() < 0.5 {
                -magnitude
            } else {
                magnitude
            }
        }
        AmplitudeLaw::Gaussian => loop {
            let x = rng.standard_normal();
            if x != 0.0 {
                break x;
            }
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self { sigma: 0.0, seed: 0 }
    }
}

/// `Y = A·S + E`, with `E` i.i.d. `N(0, σ²)` drawn in row-major order.
/// `σ = 0` consumes no randomness and returns the exact product.
pub fn measure(a: &MeasurementEnsemble, s: &DenseMatrix, noise: NoiseSpec) -> Result<DenseMatrix> {
    if !(noise.sigma >= 0.0) || !noise.sigma.is_finite() {
        return Err(Error::Domain(format!("noise sigma must be finite and >= 0, got {}", noise.sigma)));
    }
    let mut y = a.matrix().matmul(s)?;
    if noise.sigma > 0.0 {
        let mut rng = SeededRng::new(noise.seed);
        for v in y.as_mut_slice() {
            *v += noise.sigma * rng.standard_normal();
        }
    }
    Ok(y)
}

/// `‖Ŝ − S‖_F / ‖S‖_F`.
pub fn nmse(s: &DenseMatrix, shat: &DenseMatrix) -> Result<f64> {
    let diff = shat.sub(s)?;
    let denom = s.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::UndefinedMetric("NMSE of an all-zero reference matrix"));
    }
    Ok(diff.frobenius_norm() / denom)
}

/// `10·log₁₀(signal_power / σ²)` in dB.
pub fn snr_db(sigma: f64, signal_power: f64) -> Result<f64> {
    if !(sigma > 0.0) || !(signal_power > 0.0) {
        return Err(Error::Domain(format!(
            "SNR needs sigma > 0 and signal power > 0 (got sigma={sigma}, power={signal_power})"
        )));
    }
    Ok(10.0 * (signal_power / (sigma * sigma)).log10())
}

/// Mean squared entry of a matrix.
pub fn mean_power(m: &DenseMatrix) -> f64 {
    let n = m.as_slice().len().max(1);
    m.as_slice().iter().map(|x| x * x).sum::<f64>() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_by_one_ensemble_is_unit() {
        for seed in 0..10 {
            let a = MeasurementEnsemble::generate(1, 1, seed).unwrap();
            assert_eq!(a.matrix().get(0, 0).abs(), 1.0);
        }
    }

    #[test]
    fn columns_have_unit_norm() {
        let a = MeasurementEnsemble::generate(36, 144, 7).unwrap();
        for j in 0..144 {
            assert!((a.matrix().column(j).norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn ensemble_is_deterministic_and_validated() {
        let a = MeasurementEnsemble::generate(8, 12, 99).unwrap();
        let b = MeasurementEnsemble::generate(8, 12, 99).unwrap();
        assert_eq!(a, b);
        assert!(matches!(MeasurementEnsemble::generate(13, 12, 0), Err(Error::Config(_))));
    }

    #[test]
    fn zero_sparsity_is_zero_matrix() {
        let s = gen_sparse_ensemble(10, 3, 0, SparsityPattern::Independent, AmplitudeLaw::Gaussian, 1).unwrap();
        assert!(s.s.as_slice().iter().all(|&x| x == 0.0));
        assert!(gen_sparse_ensemble(10, 3, 11, SparsityPattern::Joint, AmplitudeLaw::Gaussian, 1).is_err());
    }

    #[test]
    fn joint_pattern_shares_support() {
        let s = gen_sparse_ensemble(30, 4, 5, SparsityPattern::Joint, AmplitudeLaw::UniformSigned, 2).unwrap();
        let first = s.support(0);
        assert_eq!(first.len(), 5);
        for j in 1..4 {
            assert_eq!(s.support(j), first);
        }
    }

    #[test]
    fn uniform_amplitudes_in_range() {
        let s = gen_sparse_ensemble(50, 4, 10, SparsityPattern::Independent, AmplitudeLaw::UniformSigned, 3).unwrap();
        for &x in s.s.as_slice() {
            assert!(x == 0.0 || (0.5..1.5).contains(&x.abs()));
        }
        for j in 0..4 {
            assert_eq!(s.support(j).len(), 10);
        }
    }

    /// Independent supports of size k in N positions overlap by k²/N on average
    /// (hypergeometric mean); checked by Monte Carlo within 3 standard errors.
    #[test]
    fn independent_overlap_matches_hypergeometric_mean() {
        let (n, k, draws) = (100usize, 5usize, 10_000u64);
        let mut overlaps = Vec::with_capacity(draws as usize);
        for seed in 0..draws {
            let s = gen_sparse_ensemble(n, 2, k, SparsityPattern::Independent, AmplitudeLaw::Gaussian, seed).unwrap();
            let a = s.support(0);
            let b = s.support(1);
            overlaps.push(a.iter().filter(|i| b.contains(i)).count() as f64);
        }
        let mean = overlaps.iter().sum::<f64>() / draws as f64;
        let expected = (k * k) as f64 / n as f64;
        // Hypergeometric variance: k·(k/N)·(1−k/N)·(N−k)/(N−1).
        let p = k as f64 / n as f64;
        let var = k as f64 * p * (1.0 - p) * (n - k) as f64 / (n - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!((mean - expected).abs() <= 3.0 * se, "mean overlap {mean} vs {expected} (se {se})");
    }

    #[test]
    fn noiseless_measure_is_matmul() {
        let a = MeasurementEnsemble::generate(6, 10, 4).unwrap();
        let s = gen_sparse_ensemble(10, 3, 2, SparsityPattern::Independent, AmplitudeLaw::Gaussian, 5).unwrap();
        let y = measure(&a, &s.s, NoiseSpec::noiseless()).unwrap();
        assert_eq!(y, a.matrix().matmul(&s.s).unwrap());
        let y0 = measure(&a, &DenseMatrix::zeros(10, 3), NoiseSpec::noiseless()).unwrap();
        assert!(y0.as_slice().iter().all(|&x| x == 0.0));
        assert!(measure(&a, &DenseMatrix::zeros(9, 3), NoiseSpec::noiseless()).is_err());
    }

    #[test]
    fn noise_has_requested_std() {
        let a = MeasurementEnsemble::generate(100, 100, 1).unwrap();
        let s = DenseMatrix::zeros(100, 1000);
        let y = measure(&a, &s, NoiseSpec { sigma: 0.005, seed: 77 }).unwrap();
        let xs = y.as_slice();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.0049..=0.0051).contains(&std), "std {std}");
    }

    #[test]
    fn nmse_examples() {
        let s = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, -2.0]]).unwrap();
        assert_eq!(nmse(&s, &s).unwrap(), 0.0);
        assert_eq!(nmse(&s, &DenseMatrix::zeros(2, 2)).unwrap(), 1.0);
        assert_eq!(nmse(&s, &s.scaled(2.0)).unwrap(), 1.0);
        assert!(matches!(nmse(&DenseMatrix::zeros(2, 2), &s), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn snr_examples() {
        assert!(snr_db(0.1, 0.01).unwrap().abs() < 1e-12);
        assert!((snr_db(0.1, 1.0).unwrap() - 20.0).abs() < 1e-12);
        assert!(snr_db(0.0, 1.0).is_err());
        assert!(snr_db(0.1, -1.0).is_err());
    }

    /// The published σ → SNR table corresponds to unit signal power.
    #[test]
    fn published_sigma_grid_maps_to_published_snr() {
        let table = [(0.5, 6.0), (0.2, 14.0), (0.1, 20.0), (0.05, 26.0), (0.01, 40.0), (0.005, 46.0)];
        for (sigma, snr) in table {
            assert!((snr_db(sigma, 1.0).unwrap() - snr).abs() < 0.1, "sigma {sigma}");
        }
    }

    proptest! {
        #[test]
        fn nmse_scale_identity(seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let s = DenseMatrix::new(5, 3, (0..15).map(|_| rng.standard_normal()).collect()).unwrap();
            let e = DenseMatrix::new(5, 3, (0..15).map(|_| rng.standard_normal()).collect()).unwrap();
            let shat = DenseMatrix::new(5, 3, s.as_slice().iter().zip(e.as_slice()).map(|(a, b)| a + b).collect()).unwrap();
            let got = nmse(&s, &shat).unwrap();
            let want = e.frobenius_norm() / s.frobenius_norm();
            prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
        }

        #[test]
        fn generators_are_deterministic(seed in any::<u64>(), k in 0usize..8) {
            let a = gen_sparse_ensemble(16, 3, k, SparsityPattern::Independent, AmplitudeLaw::UniformSigned, seed).unwrap();
            let b = gen_sparse_ensemble(16, 3, k, SparsityPattern::Independent, AmplitudeLaw::UniformSigned, seed).unwrap();
            prop_assert_eq!(a, b);
            let n1 = measure(&MeasurementEnsemble::generate(4, 16, seed).unwrap(), &DenseMatrix::zeros(16, 2), NoiseSpec { sigma: 0.1, seed }).unwrap();
            let n2 = measure(&MeasurementEnsemble::generate(4, 16, seed).unwrap(), &DenseMatrix::zeros(16, 2), NoiseSpec { sigma: 0.1, seed }).unwrap();
            prop_assert_eq!(n1, n2);
        }
    }
}
