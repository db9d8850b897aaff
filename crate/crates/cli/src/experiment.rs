//! Running solvers over instance sets and aggregating the outcomes.
//!
//! Instances are independent jobs and run on the rayon pool; results are
//! collected in instance order, so every CSV is deterministic apart from its
//! wall-time column. Timing runs serially so that solves do not compete for
//! cores.

use std::collections::BTreeMap;
use std::time::Instant;

use lstmcs::model_io;
use lstmcs::rng::derive_seed;
use lstmcs::signal::{measure, nmse, MeasurementEnsemble, NoiseSpec};
use lstmcs::solvers::{Exhaustive, LstmCs, MmvSolver, Omp, Somp, SolverConfig};
use lstmcs::{DenseMatrix, LstmParams};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, SolverK, SolverKind};
use crate::dataset::{stream, ImageGroup, SyntheticInstance};
use crate::error::{CliError, CoreContext, Result};

/// One (solver, instance[, channel]) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub solver: String,
    pub instance: usize,
    /// Image datasets report one row per image (channel); synthetic rows cover the whole matrix.
    pub channel: Option<usize>,
    /// True sparsity for synthetic instances.
    pub k: Option<usize>,
    pub m_over_n: f64,
    pub sigma: f64,
    /// Seed of the instance (synthetic) or of its noise stream (images).
    pub seed: u64,
    pub nmse: f64,
    pub recovered: bool,
    pub wall_time: f64,
}

impl ResultRow {
    pub const HEADER: [&'static str; 11] = [
        "experiment",
        "solver",
        "instance",
        "channel",
        "k",
        "m_over_n",
        "sigma",
        "seed",
        "nmse",
        "recovered",
        "wall_time_seconds",
    ];

    pub fn record(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.solver.clone(),
            self.instance.to_string(),
            opt(self.channel),
            opt(self.k),
            self.m_over_n.to_string(),
            self.sigma.to_string(),
            self.seed.to_string(),
            self.nmse.to_string(),
            self.recovered.to_string(),
            self.wall_time.to_string(),
        ]
    }
}

pub(crate) fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Loads one model per measurement count when LSTM-CS is requested and
/// checks that each matches `(m, n)`.
pub fn load_models(cfg: &ExperimentConfig, ms: &[usize]) -> Result<BTreeMap<usize, LstmParams>> {
    let mut models = BTreeMap::new();
    if !cfg.solvers.contains(&SolverKind::LstmCs) {
        return Ok(models);
    }
    for &m in ms {
        let path = cfg.model_path_for(m);
        let model = model_io::load(&path).context(|| format!("loading model {}", path.display()))?;
        if (model.dims.m, model.dims.n) != (m, cfg.n) {
            return Err(CliError::config(format!(
                "model {} was trained for M={}, N={} but the experiment needs M={m}, N={}",
                path.display(),
                model.dims.m,
                model.dims.n,
                cfg.n
            )));
        }
        models.insert(m, model);
    }
    Ok(models)
}

/// Instantiates the configured solvers, in config order.
pub fn build_solvers<'a>(cfg: &ExperimentConfig, model: Option<&'a LstmParams>) -> Result<Vec<Box<dyn MmvSolver + 'a>>> {
    cfg.solvers
        .iter()
        .map(|kind| -> Result<Box<dyn MmvSolver + 'a>> {
            Ok(match kind {
                SolverKind::LstmCs => {
                    let model = model.ok_or_else(|| CliError::config("lstm-cs requested but no model is loaded"))?;
                    Box::new(LstmCs::with_support(model, cfg.support_mode))
                }
                SolverKind::Omp => Box::new(Omp),
                SolverKind::Somp => Box::new(Somp),
                SolverKind::Oracle => Box::new(Exhaustive),
            })
        })
        .collect()
}

/// Iteration budget: the instance's true `k` or the fixed value, capped at M.
pub fn solver_config(cfg: &ExperimentConfig, k: Option<usize>, m: usize) -> Result<SolverConfig> {
    let k_max = match (cfg.solver_k, k) {
        (SolverK::Fixed(f), _) => f,
        (SolverK::Known, Some(k)) => k,
        (SolverK::Known, None) => return Err(CliError::config("solver_k = known needs instances of known sparsity")),
    };
    Ok(SolverConfig::new(cfg.res_min, k_max.min(m)))
}

/// Evaluation context shared by all instances of one grid point.
pub struct GridPoint<'a> {
    pub experiment: &'a str,
    pub a: &'a MeasurementEnsemble,
    pub sigma: f64,
    pub solvers: &'a [Box<dyn MmvSolver + 'a>],
}

impl GridPoint<'_> {
    fn m_over_n(&self) -> f64 {
        self.a.m() as f64 / self.a.n() as f64
    }
}

fn noise(cfg: &ExperimentConfig, sigma: f64, key: u64) -> NoiseSpec {
    NoiseSpec {
        sigma,
        seed: derive_seed(derive_seed(cfg.seed, stream::NOISE), key),
    }
}

/// One row per (instance, solver), instance-major.
pub fn run_synthetic(cfg: &ExperimentConfig, point: &GridPoint<'_>, instances: &[SyntheticInstance]) -> Result<Vec<ResultRow>> {
    let per_instance = instances
        .par_iter()
        .enumerate()
        .map(|(index, inst)| {
            let y = measure(point.a, &inst.s, noise(cfg, point.sigma, inst.seed)).context(|| format!("measuring instance {index}"))?;
            let scfg = solver_config(cfg, Some(inst.k), point.a.m())?;
            point
                .solvers
                .iter()
                .map(|solver| {
                    let r = solver
                        .solve(point.a.matrix(), &y, &scfg)
                        .context(|| format!("{} on instance {index} (k = {})", solver.name(), inst.k))?;
                    let e = nmse(&inst.s, &r.shat).context(|| format!("NMSE of instance {index}"))?;
                    Ok(ResultRow {
                        experiment: point.experiment.to_string(),
                        solver: solver.name().to_string(),
                        instance: index,
                        channel: None,
                        k: Some(inst.k),
                        m_over_n: point.m_over_n(),
                        sigma: point.sigma,
                        seed: inst.seed,
                        nmse: e,
                        recovered: e <= cfg.recovery_threshold,
                        wall_time: r.wall_time,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_instance.into_iter().flatten().collect())
}

/// A reconstructed image kept for writing.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub solver: String,
    pub group: usize,
    pub channel: usize,
    pub image: DenseMatrix,
}

/// One row per (group, solver, image), plus the reconstructions.
pub fn run_images(cfg: &ExperimentConfig, point: &GridPoint<'_>, groups: &[ImageGroup]) -> Result<(Vec<ResultRow>, Vec<Reconstruction>)> {
    let scfg = solver_config(cfg, None, point.a.m())?;
    let per_group = groups
        .par_iter()
        .map(|group| {
            let group_key = noise(cfg, point.sigma, group.id as u64).seed;
            let ys = group
                .blocks
                .iter()
                .enumerate()
                .map(|(b, s)| {
                    let spec = NoiseSpec {
                        sigma: point.sigma,
                        seed: derive_seed(group_key, b as u64),
                    };
                    measure(point.a, s, spec)
                })
                .collect::<lstmcs::Result<Vec<_>>>()
                .context(|| format!("measuring image group {}", group.id))?;
            let mut rows = Vec::new();
            let mut recs = Vec::new();
            for solver in point.solvers {
                let mut estimates = Vec::with_capacity(ys.len());
                let mut wall = 0.0;
                for (b, y) in ys.iter().enumerate() {
                    let r = solver
                        .solve(point.a.matrix(), y, &scfg)
                        .context(|| format!("{} on image group {} block {b}", solver.name(), group.id))?;
                    wall += r.wall_time;
                    estimates.push(r.shat);
                }
                let images = group.reconstruct(&estimates, cfg.block, cfg.transform)?;
                for (j, (image, original)) in images.into_iter().zip(&group.images).enumerate() {
                    let e = nmse(original, &image).context(|| format!("NMSE of image group {} channel {j}", group.id))?;
                    rows.push(ResultRow {
                        experiment: point.experiment.to_string(),
                        solver: solver.name().to_string(),
                        instance: group.id,
                        channel: Some(j),
                        k: None,
                        m_over_n: point.m_over_n(),
                        sigma: point.sigma,
                        seed: group_key,
                        nmse: e,
                        recovered: e <= cfg.recovery_threshold,
                        wall_time: wall / group.images.len() as f64,
                    });
                    recs.push(Reconstruction {
                        solver: solver.name().to_string(),
                        group: group.id,
                        channel: j,
                        image,
                    });
                }
            }
            Ok((rows, recs))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, recs): (Vec<_>, Vec<_>) = per_group.into_iter().unzip();
    Ok((rows.into_iter().flatten().collect(), recs.into_iter().flatten().collect()))
}

/// Aggregate over all rows sharing (solver, k, m/n, σ).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub solver: String,
    pub k: Option<usize>,
    pub m_over_n: f64,
    pub sigma: f64,
    pub trials: usize,
    pub mean_nmse: f64,
    pub recovered_fraction: f64,
}

impl SummaryRow {
    pub const HEADER: [&'static str; 7] = ["solver", "k", "m_over_n", "sigma", "trials", "mean_nmse", "recovered_fraction"];

    pub fn record(&self) -> Vec<String> {
        vec![
            self.solver.clone(),
            opt(self.k),
            self.m_over_n.to_string(),
            self.sigma.to_string(),
            self.trials.to_string(),
            self.mean_nmse.to_string(),
            self.recovered_fraction.to_string(),
        ]
    }
}

/// Groups rows in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    let mut index: BTreeMap<(String, Option<usize>, u64, u64), usize> = BTreeMap::new();
    for row in rows {
        let key = (row.solver.clone(), row.k, row.m_over_n.to_bits(), row.sigma.to_bits());
        let i = *index.entry(key).or_insert_with(|| {
            out.push(SummaryRow {
                solver: row.solver.clone(),
                k: row.k,
                m_over_n: row.m_over_n,
                sigma: row.sigma,
                trials: 0,
                mean_nmse: 0.0,
                recovered_fraction: 0.0,
            });
            out.len() - 1
        });
        let s = &mut out[i];
        s.trials += 1;
        s.mean_nmse += row.nmse;
        s.recovered_fraction += f64::from(u8::from(row.recovered));
    }
    for s in &mut out {
        s.mean_nmse /= s.trials as f64;
        s.recovered_fraction /= s.trials as f64;
    }
    out
}

/// Smallest m/n at which the recovered fraction reaches `fraction`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRow {
    pub solver: String,
    pub k: Option<usize>,
    pub sigma: f64,
    pub m_over_n: Option<f64>,
}

impl BoundaryRow {
    pub const HEADER: [&'static str; 4] = ["solver", "k", "sigma", "boundary_m_over_n"];

    pub fn record(&self) -> Vec<String> {
        vec![self.solver.clone(), opt(self.k), self.sigma.to_string(), opt(self.m_over_n)]
    }
}

pub fn phase_boundary(summary: &[SummaryRow], fraction: f64) -> Vec<BoundaryRow> {
    let mut out: Vec<BoundaryRow> = Vec::new();
    for s in summary {
        let existing = out.iter().position(|b| b.solver == s.solver && b.k == s.k && b.sigma.to_bits() == s.sigma.to_bits());
        let i = existing.unwrap_or_else(|| {
            out.push(BoundaryRow {
                solver: s.solver.clone(),
                k: s.k,
                sigma: s.sigma,
                m_over_n: None,
            });
            out.len() - 1
        });
        if s.recovered_fraction >= fraction && out[i].m_over_n.is_none_or(|b| s.m_over_n < b) {
            out[i].m_over_n = Some(s.m_over_n);
        }
    }
    out
}

/// One problem of the timing set: a synthetic instance or one image block.
#[derive(Debug, Clone)]
pub struct TimingProblem {
    pub y: DenseMatrix,
    pub k: Option<usize>,
}

/// Mean per-vector solve time of one (solver, problem) over the repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub solver: String,
    pub instance: usize,
    pub k: Option<usize>,
    pub vectors: usize,
    pub seconds_per_vector: f64,
}

impl TimingRow {
    pub const HEADER: [&'static str; 5] = ["solver", "instance", "k", "vectors", "seconds_per_vector"];

    pub fn record(&self) -> Vec<String> {
        vec![
            self.solver.clone(),
            self.instance.to_string(),
            opt(self.k),
            self.vectors.to_string(),
            self.seconds_per_vector.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingSummary {
    pub solver: String,
    pub instances: usize,
    /// Total solve time over total vectors, averaged over repeats.
    pub mean_seconds_per_vector: f64,
    /// Standard deviation of that aggregate across repeats (0 for one repeat).
    pub repeat_std: f64,
    pub ratio_to_omp: Option<f64>,
}

impl TimingSummary {
    pub const HEADER: [&'static str; 5] = ["solver", "instances", "mean_seconds_per_vector", "repeat_std_seconds", "ratio_to_omp"];

    pub fn record(&self) -> Vec<String> {
        vec![
            self.solver.clone(),
            self.instances.to_string(),
            self.mean_seconds_per_vector.to_string(),
            self.repeat_std.to_string(),
            opt(self.ratio_to_omp),
        ]
    }
}

/// Solves every problem with every solver `repeats` times, serially and
/// interleaved (problem-major) so slow drifts affect all solvers alike.
pub fn run_timing(
    cfg: &ExperimentConfig,
    a: &MeasurementEnsemble,
    problems: &[TimingProblem],
    solvers: &[Box<dyn MmvSolver + '_>],
    repeats: usize,
) -> Result<(Vec<TimingRow>, Vec<TimingSummary>)> {
    // totals[s][r] = seconds of solver s in repeat r; per[s][p] = seconds summed over repeats.
    let mut totals = vec![vec![0.0; repeats]; solvers.len()];
    let mut per = vec![vec![0.0; problems.len()]; solvers.len()];
    for r in 0..repeats {
        for (p, problem) in problems.iter().enumerate() {
            let scfg = solver_config(cfg, problem.k, a.m())?;
            for (s, solver) in solvers.iter().enumerate() {
                let start = Instant::now();
                solver
                    .solve(a.matrix(), &problem.y, &scfg)
                    .context(|| format!("{} on timing problem {p}", solver.name()))?;
                let secs = start.elapsed().as_secs_f64();
                totals[s][r] += secs;
                per[s][p] += secs;
            }
        }
    }
    let vectors_total: usize = problems.iter().map(|p| p.y.cols()).sum();
    let mut rows = Vec::with_capacity(solvers.len() * problems.len());
    for (s, solver) in solvers.iter().enumerate() {
        for (p, problem) in problems.iter().enumerate() {
            rows.push(TimingRow {
                solver: solver.name().to_string(),
                instance: p,
                k: problem.k,
                vectors: problem.y.cols(),
                seconds_per_vector: per[s][p] / (repeats * problem.y.cols()) as f64,
            });
        }
    }
    let mut summary: Vec<TimingSummary> = solvers
        .iter()
        .zip(&totals)
        .map(|(solver, reps)| {
            let per_vector: Vec<f64> = reps.iter().map(|t| t / vectors_total as f64).collect();
            let mean = per_vector.iter().sum::<f64>() / repeats as f64;
            let var = per_vector.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / repeats as f64;
            TimingSummary {
                solver: solver.name().to_string(),
                instances: problems.len(),
                mean_seconds_per_vector: mean,
                repeat_std: var.sqrt(),
                ratio_to_omp: None,
            }
        })
        .collect();
    if let Some(omp) = summary.iter().find(|s| s.solver == "omp").map(|s| s.mean_seconds_per_vector) {
        for s in &mut summary {
            s.ratio_to_omp = Some(s.mean_seconds_per_vector / omp);
        }
    }
    Ok((rows, summary))
}

/// Plain-text description of the machine, recorded next to timing results.
pub fn machine_description() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|info| {
            info.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown".into());
    let threads = std::thread::available_parallelism().map_or(0, |n| n.get());
    format!(
        "os = {}\narch = {}\ncpu = {cpu}\navailable_parallelism = {threads}\nrayon_threads = {}\noptimized_build = {}\ntiming_mode = serial\n",
        std::env::consts::OS,
        std::env::consts::ARCH,
        rayon::current_num_threads(),
        !cfg!(debug_assertions)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{sensing_matrix, synthetic_test};

    fn row(solver: &str, k: usize, ratio: f64, nmse: f64) -> ResultRow {
        ResultRow {
            experiment: "t".into(),
            solver: solver.into(),
            instance: 0,
            channel: None,
            k: Some(k),
            m_over_n: ratio,
            sigma: 0.0,
            seed: 0,
            nmse,
            recovered: nmse <= 0.6,
            wall_time: 0.0,
        }
    }

    #[test]
    fn summary_and_boundary() {
        let rows = vec![
            row("omp", 2, 0.1, 0.9),
            row("omp", 2, 0.1, 0.1),
            row("omp", 2, 0.2, 0.1),
            row("omp", 2, 0.2, 0.2),
            row("omp", 2, 0.3, 0.0),
            row("omp", 2, 0.3, 0.7),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].trials, 2);
        assert_eq!(s[0].recovered_fraction, 0.5);
        assert!((s[0].mean_nmse - 0.5).abs() < 1e-15);
        let b = phase_boundary(&s, 0.9);
        assert_eq!(b, vec![BoundaryRow { solver: "omp".into(), k: Some(2), sigma: 0.0, m_over_n: Some(0.2) }]);
        assert_eq!(phase_boundary(&s, 1.01)[0].m_over_n, None);
    }

    #[test]
    fn synthetic_rows_are_instance_major_and_deterministic() {
        let cfg = ExperimentConfig {
            n: 16,
            m: 8,
            l: 2,
            test_count: 3,
            solvers: vec![SolverKind::Omp, SolverKind::Somp, SolverKind::Oracle],
            ..Default::default()
        };
        let a = sensing_matrix(&cfg, 8).unwrap();
        let solvers = build_solvers(&cfg, None).unwrap();
        let point = GridPoint {
            experiment: "x",
            a: &a,
            sigma: 0.0,
            solvers: &solvers,
        };
        let inst = synthetic_test(&cfg, 2).unwrap();
        let rows = run_synthetic(&cfg, &point, &inst).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[1].solver, "somp");
        assert_eq!(rows[3].instance, 1);
        // The exhaustive oracle is exact on noiseless 2-sparse channels.
        assert!(rows.iter().filter(|r| r.solver == "oracle").all(|r| r.nmse <= 1e-10));
        let again = run_synthetic(&cfg, &point, &inst).unwrap();
        let strip = |rs: &[ResultRow]| rs.iter().map(|r| (r.nmse, r.seed)).collect::<Vec<_>>();
        assert_eq!(strip(&rows), strip(&again));
    }

    #[test]
    fn lstm_cs_without_model_is_a_config_error() {
        let cfg = ExperimentConfig::default();
        assert!(matches!(build_solvers(&cfg, None), Err(CliError::Config(_))));
    }

    #[test]
    fn solver_budget_is_capped_at_m() {
        let cfg = ExperimentConfig::default();
        assert_eq!(solver_config(&cfg, Some(12), 8).unwrap().k_max, 8);
        assert!(solver_config(&cfg, None, 8).is_err());
        let fixed = ExperimentConfig {
            solver_k: SolverK::Fixed(5),
            ..Default::default()
        };
        assert_eq!(solver_config(&fixed, None, 8).unwrap().k_max, 5);
    }

    #[test]
    fn timing_shape() {
        let cfg = ExperimentConfig {
            n: 16,
            m: 8,
            l: 2,
            solvers: vec![SolverKind::Omp, SolverKind::Somp],
            ..Default::default()
        };
        let a = sensing_matrix(&cfg, 8).unwrap();
        let solvers = build_solvers(&cfg, None).unwrap();
        let problems: Vec<_> = synthetic_test(&ExperimentConfig { test_count: 4, ..cfg.clone() }, 2)
            .unwrap()
            .into_iter()
            .map(|i| TimingProblem {
                y: measure(&a, &i.s, NoiseSpec::noiseless()).unwrap(),
                k: Some(i.k),
            })
            .collect();
        let (rows, summary) = run_timing(&cfg, &a, &problems, &solvers, 2).unwrap();
        assert_eq!(rows.len(), 2 * 4);
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[0].ratio_to_omp, Some(1.0));
        assert!(summary.iter().all(|s| s.mean_seconds_per_vector > 0.0));
    }
}
