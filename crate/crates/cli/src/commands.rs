//! The five subcommands. Each validates the config, loads everything it needs,
//! computes, and returns the staged [`Outputs`] together with the in-memory
//! results; nothing touches the file system until [`Outputs::commit`].

use std::path::PathBuf;

use lstmcs::lstm::LstmDims;
use lstmcs::model_io;
use lstmcs::rng::derive_seed;
use lstmcs::signal::{measure, MeasurementEnsemble, NoiseSpec};
use lstmcs::training::{
    generate_training_pairs, train_with_observer, Augmentation, EpochRecord, PairOptions, TrainConfig, TrainOutcome,
    TrainingSequence, ValidationSample, ValidationSet,
};
use lstmcs::{DenseMatrix, LstmParams};

use crate::config::{Axis, Dataset, ExperimentConfig, Momentum};
use crate::dataset::{image_groups, sensing_matrix, stream, synthetic_test, synthetic_train, synthetic_validation, Split};
use crate::error::{CliError, CoreContext, Result};
use crate::experiment::{
    build_solvers, load_models, machine_description, phase_boundary, run_images, run_synthetic, run_timing, solver_config,
    summarize, BoundaryRow, GridPoint, Reconstruction, ResultRow, SummaryRow, TimingProblem, TimingRow, TimingSummary,
};
use crate::output::{matrix_csv, Outputs};
use crate::pgm;

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn stage_config(cfg: &ExperimentConfig, outputs: &mut Outputs) {
    outputs.add(out_path(cfg, "config_used.txt"), cfg.emit().into_bytes());
}

fn stage_results(cfg: &ExperimentConfig, outputs: &mut Outputs, rows: &[ResultRow]) -> Result<Vec<SummaryRow>> {
    outputs.add_csv(out_path(cfg, "results.csv"), &ResultRow::HEADER, rows.iter().map(ResultRow::record))?;
    let summary = summarize(rows);
    outputs.add_csv(out_path(cfg, "summary.csv"), &SummaryRow::HEADER, summary.iter().map(SummaryRow::record))?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// train

#[derive(Debug)]
pub struct TrainReport {
    pub outcome: TrainOutcome,
    pub model_path: PathBuf,
    pub sequences: usize,
    pub pairs: usize,
    pub outputs: Outputs,
}

/// Training sparse matrices: synthetic instances or every block of the training images.
fn training_matrices(cfg: &ExperimentConfig) -> Result<Vec<DenseMatrix>> {
    Ok(match cfg.dataset {
        Dataset::Synthetic => synthetic_train(cfg)?.into_iter().map(|i| i.s).collect(),
        _ => image_groups(cfg, Split::Train)?.into_iter().flat_map(|g| g.blocks).collect(),
    })
}

fn validation_set(cfg: &ExperimentConfig, a: &MeasurementEnsemble) -> Result<Option<ValidationSet>> {
    if cfg.validation_count == 0 {
        return Ok(None);
    }
    let problems: Vec<(DenseMatrix, Option<usize>)> = match cfg.dataset {
        Dataset::Synthetic => synthetic_validation(cfg)?.into_iter().map(|i| (i.s, Some(i.k))).collect(),
        // All-zero blocks have no defined NMSE and are left out.
        _ => image_groups(cfg, Split::Validation)?
            .into_iter()
            .flat_map(|g| g.blocks)
            .filter(|b| b.frobenius_norm() > 0.0)
            .map(|b| (b, None))
            .collect(),
    };
    let noise_base = derive_seed(cfg.seed, stream::VALIDATION);
    let samples = problems
        .into_iter()
        .enumerate()
        .map(|(i, (s, k))| {
            let noise = NoiseSpec {
                sigma: cfg.sigma,
                seed: derive_seed(noise_base, i as u64),
            };
            let y = measure(a, &s, noise).context(|| format!("validation instance {i}"))?;
            let k_max = Some(solver_config(cfg, k, a.m())?.k_max);
            Ok(ValidationSample { y, s, k_max })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(ValidationSet {
        a: a.matrix().clone(),
        samples,
        solver: solver_config(cfg, Some(cfg.k_max), a.m())?,
        support: cfg.support_mode,
    }))
}

fn train_config(cfg: &ExperimentConfig) -> TrainConfig {
    TrainConfig {
        epsilon: cfg.epsilon,
        clip: cfg.clip,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: derive_seed(cfg.seed, stream::SHUFFLE),
        constant_momentum: match cfg.momentum {
            Momentum::Banded => None,
            Momentum::Constant(mu) => Some(mu),
        },
        early_stopping: cfg.early_stopping,
        patience: (cfg.patience > 0).then_some(cfg.patience),
        augmentation: Augmentation {
            sign_flips: cfg.augment_signs,
            channel_shuffle: cfg.augment_channels,
        },
    }
}

pub fn train(cfg: &ExperimentConfig, observer: impl FnMut(&EpochRecord)) -> Result<TrainReport> {
    cfg.validate()?;
    if cfg.early_stopping && cfg.validation_count == 0 {
        return Err(CliError::config("early_stopping needs validation_count > 0"));
    }
    let a = sensing_matrix(cfg, cfg.m)?;
    let opts = PairOptions {
        k_max: cfg.k_max,
        include_initial_pair: cfg.include_initial_pair,
        normalize: true,
    };
    let mut data: Vec<TrainingSequence> = Vec::new();
    for (i, s) in training_matrices(cfg)?.iter().enumerate() {
        let seqs = generate_training_pairs(s, a.matrix(), &opts).context(|| format!("training pairs of instance {i}"))?;
        data.extend(seqs.into_iter().filter(|q| q.pair_count() > 0));
    }
    if data.len() < cfg.batch_size {
        return Err(CliError::config(format!(
            "batch_size = {} exceeds the {} training sequences; lower batch_size or raise train_count",
            cfg.batch_size,
            data.len()
        )));
    }
    let pairs = data.iter().map(TrainingSequence::pair_count).sum();
    let validation = validation_set(cfg, &a)?;
    let init = LstmParams::init(LstmDims::new(cfg.m, cfg.n, cfg.ncell), cfg.variant, derive_seed(cfg.seed, stream::INIT))
        .context(|| "model initialization".into())?;
    let outcome = train_with_observer(init, &data, validation.as_ref(), &train_config(cfg), observer).context(|| "training".into())?;

    let mut outputs = Outputs::new();
    let model_path = cfg.model_path_for(cfg.m);
    outputs.add(&model_path, model_io::serialize(&outcome.params));
    outputs.add_csv(
        out_path(cfg, "train_log.csv"),
        &["epoch", "mean_batch_loss", "validation_nmse", "wall_time_seconds"],
        outcome.log.iter().map(|r| {
            vec![
                r.epoch.to_string(),
                r.mean_batch_loss.to_string(),
                crate::experiment::opt(r.validation_nmse),
                r.wall_time.to_string(),
            ]
        }),
    )?;
    stage_config(cfg, &mut outputs);
    Ok(TrainReport {
        outcome,
        model_path,
        sequences: data.len(),
        pairs,
        outputs,
    })
}

// ---------------------------------------------------------------------------
// solve

#[derive(Debug)]
pub struct SolveReport {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub reconstructions: Vec<Reconstruction>,
    pub outputs: Outputs,
}

/// Test rows at one (m, σ); synthetic data covers every `k` in `k_grid`.
fn evaluate(
    cfg: &ExperimentConfig,
    experiment: &str,
    a: &MeasurementEnsemble,
    model: Option<&LstmParams>,
    sigma: f64,
    ks: &[usize],
) -> Result<(Vec<ResultRow>, Vec<Reconstruction>)> {
    let solvers = build_solvers(cfg, model)?;
    let point = GridPoint {
        experiment,
        a,
        sigma,
        solvers: &solvers,
    };
    match cfg.dataset {
        Dataset::Synthetic => {
            let mut rows = Vec::new();
            for &k in ks {
                rows.extend(run_synthetic(cfg, &point, &synthetic_test(cfg, k)?)?);
            }
            Ok((rows, Vec::new()))
        }
        _ => run_images(cfg, &point, &image_groups(cfg, Split::Test)?),
    }
}

pub fn solve(cfg: &ExperimentConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let models = load_models(cfg, &[cfg.m])?;
    let a = sensing_matrix(cfg, cfg.m)?;
    let (rows, reconstructions) = evaluate(cfg, "solve", &a, models.get(&cfg.m), cfg.sigma, &cfg.k_grid)?;
    let mut outputs = Outputs::new();
    let summary = stage_results(cfg, &mut outputs, &rows)?;
    if cfg.write_images && !reconstructions.is_empty() {
        for group in image_groups(cfg, Split::Test)? {
            for (j, image) in group.images.iter().enumerate() {
                outputs.add(out_path(cfg, &format!("images/original/g{:04}_c{j}.pgm", group.id)), pgm::encode(image));
            }
        }
        for r in &reconstructions {
            let name = format!("images/{}/g{:04}_c{}.pgm", r.solver, r.group, r.channel);
            outputs.add(out_path(cfg, &name), pgm::encode(&r.image));
        }
    }
    stage_config(cfg, &mut outputs);
    Ok(SolveReport {
        rows,
        summary,
        reconstructions,
        outputs,
    })
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Debug)]
pub struct SweepReport {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub boundary: Vec<BoundaryRow>,
    pub outputs: Outputs,
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    if cfg.axis == Axis::K && cfg.dataset != Dataset::Synthetic {
        return Err(CliError::config("axis = k needs synthetic data; image sparsity is not controlled"));
    }
    let ms: Vec<usize> = match cfg.axis {
        Axis::MOverN => cfg.m_over_n_grid.iter().map(|&r| cfg.m_for_ratio(r)).collect(),
        _ => vec![cfg.m],
    };
    let models = load_models(cfg, &ms)?;
    let experiment = format!("sweep_{}", cfg.axis.name());
    let mut rows = Vec::new();
    match cfg.axis {
        Axis::K => {
            let a = sensing_matrix(cfg, cfg.m)?;
            rows.extend(evaluate(cfg, &experiment, &a, models.get(&cfg.m), cfg.sigma, &cfg.k_grid)?.0);
        }
        Axis::Sigma => {
            let a = sensing_matrix(cfg, cfg.m)?;
            for &sigma in &cfg.sigma_grid {
                rows.extend(evaluate(cfg, &experiment, &a, models.get(&cfg.m), sigma, &cfg.k_grid)?.0);
            }
        }
        Axis::MOverN => {
            for &m in &ms {
                let a = sensing_matrix(cfg, m)?;
                rows.extend(evaluate(cfg, &experiment, &a, models.get(&m), cfg.sigma, &cfg.k_grid)?.0);
            }
        }
    }
    let mut outputs = Outputs::new();
    let summary = stage_results(cfg, &mut outputs, &rows)?;
    let boundary = if cfg.axis == Axis::MOverN {
        let b = phase_boundary(&summary, cfg.phase_fraction);
        outputs.add_csv(out_path(cfg, "phase_boundary.csv"), &BoundaryRow::HEADER, b.iter().map(BoundaryRow::record))?;
        b
    } else {
        Vec::new()
    };
    stage_config(cfg, &mut outputs);
    Ok(SweepReport {
        rows,
        summary,
        boundary,
        outputs,
    })
}

// ---------------------------------------------------------------------------
// timing

#[derive(Debug)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    pub summary: Vec<TimingSummary>,
    pub outputs: Outputs,
}

/// Measurements of the timing set: every synthetic test instance, or every block of the test images.
pub fn timing_problems(cfg: &ExperimentConfig, a: &MeasurementEnsemble) -> Result<Vec<TimingProblem>> {
    let noise_base = derive_seed(cfg.seed, stream::NOISE);
    let noisy = |s: &DenseMatrix, key: u64| {
        measure(
            a,
            s,
            NoiseSpec {
                sigma: cfg.sigma,
                seed: derive_seed(noise_base, key),
            },
        )
        .context(|| "measuring timing instance".into())
    };
    let mut problems = Vec::new();
    match cfg.dataset {
        Dataset::Synthetic => {
            for &k in &cfg.k_grid {
                for inst in synthetic_test(cfg, k)? {
                    problems.push(TimingProblem {
                        y: noisy(&inst.s, inst.seed)?,
                        k: Some(k),
                    });
                }
            }
        }
        _ => {
            for group in image_groups(cfg, Split::Test)? {
                for (b, s) in group.blocks.iter().enumerate() {
                    problems.push(TimingProblem {
                        y: noisy(s, derive_seed(group.id as u64, b as u64))?,
                        k: None,
                    });
                }
            }
        }
    }
    Ok(problems)
}

pub fn timing(cfg: &ExperimentConfig) -> Result<TimingReport> {
    cfg.validate()?;
    let models = load_models(cfg, &[cfg.m])?;
    let a = sensing_matrix(cfg, cfg.m)?;
    let problems = timing_problems(cfg, &a)?;
    let solvers = build_solvers(cfg, models.get(&cfg.m))?;
    let (rows, summary) = run_timing(cfg, &a, &problems, &solvers, cfg.timing_repeats)?;
    let mut outputs = Outputs::new();
    outputs.add_csv(out_path(cfg, "timing.csv"), &TimingRow::HEADER, rows.iter().map(TimingRow::record))?;
    outputs.add_csv(out_path(cfg, "timing_summary.csv"), &TimingSummary::HEADER, summary.iter().map(TimingSummary::record))?;
    outputs.add(out_path(cfg, "machine.txt"), machine_description().into_bytes());
    stage_config(cfg, &mut outputs);
    Ok(TimingReport { rows, summary, outputs })
}

// ---------------------------------------------------------------------------
// gen-data

/// Emits the sensing matrix and every training and test instance (S and Y) of a synthetic config.
pub fn gen_data(cfg: &ExperimentConfig) -> Result<Outputs> {
    cfg.validate()?;
    if cfg.dataset != Dataset::Synthetic {
        return Err(CliError::config("gen-data emits synthetic ensembles; set dataset = synthetic"));
    }
    let a = sensing_matrix(cfg, cfg.m)?;
    let mut outputs = Outputs::new();
    outputs.add(out_path(cfg, "sensing_matrix.csv"), matrix_csv(a.matrix())?);
    let noise_base = derive_seed(cfg.seed, stream::NOISE);
    let mut index = Vec::new();
    let mut emit = |split: &str, i: usize, s: &DenseMatrix, k: usize, seed: u64, outputs: &mut Outputs| -> Result<()> {
        let noise = NoiseSpec {
            sigma: cfg.sigma,
            seed: derive_seed(noise_base, seed),
        };
        let y = measure(&a, s, noise).context(|| format!("{split} instance {i}"))?;
        let stem = format!("{split}_{i:04}");
        outputs.add(out_path(cfg, &format!("{stem}_s.csv")), matrix_csv(s)?);
        outputs.add(out_path(cfg, &format!("{stem}_y.csv")), matrix_csv(&y)?);
        index.push(vec![split.to_string(), i.to_string(), k.to_string(), seed.to_string(), stem]);
        Ok(())
    };
    for (i, inst) in synthetic_train(cfg)?.iter().enumerate() {
        emit("train", i, &inst.s, inst.k, inst.seed, &mut outputs)?;
    }
    let mut t = 0;
    for &k in &cfg.k_grid {
        for inst in synthetic_test(cfg, k)? {
            emit("test", t, &inst.s, k, inst.seed, &mut outputs)?;
            t += 1;
        }
    }
    outputs.add_csv(out_path(cfg, "instances.csv"), &["split", "instance", "k", "seed", "stem"], index)?;
    stage_config(cfg, &mut outputs);
    Ok(outputs)
}
