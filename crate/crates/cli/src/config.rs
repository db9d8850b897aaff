//! Experiment configuration: flat UTF-8 `key = value` lines, `#` starts a
//! comment, blank lines are ignored. Every key has a default, so a config file
//! only lists what it changes; unknown or repeated keys are hard errors.
//!
//! Lists are comma separated. Integer lists also accept inclusive ranges
//! `a..b` (step 1) and `a..b:s`, e.g. `k_grid = 4..16` or `k_grid = 2, 4..8:2`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lstmcs::lstm::Variant;
use lstmcs::signal::{AmplitudeLaw, SparsityPattern};
use lstmcs::solvers::SupportMode;
use lstmcs::transform::TransformKind;

use crate::error::{CliError, Result};

/// Canonical keys with a one-line description, in emission order.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "master seed; every generator stream is derived from it"),
    ("dataset", "synthetic | mnist | images"),
    ("images_path", "mnist: IDX image file; images: directory of P5 PGM files (training source)"),
    ("labels_path", "mnist: IDX label file matching images_path"),
    ("test_images_path", "optional separate test source; empty = continue after the training data"),
    ("test_labels_path", "mnist: IDX label file matching test_images_path"),
    ("output_dir", "directory receiving CSV, model and image outputs"),
    ("model_path", "LSTM-CS model file; `{m}` is replaced by the measurement count"),
    ("n", "signal length N (image datasets: block * block)"),
    ("m", "measurement count M"),
    ("l", "channel count L"),
    ("block", "image block edge in pixels"),
    ("transform", "none | dct | haar3, applied per block before measuring"),
    ("pattern", "synthetic support pattern: joint | independent"),
    ("amplitude", "synthetic non-zero law: uniform (|x| in [0.5,1.5], random sign) | gaussian"),
    ("k_grid", "synthetic sparsity values; training cycles through them, evaluation sweeps them"),
    ("k_max", "largest support kept per channel when generating training pairs"),
    ("solver_k", "greedy iteration cap: known (true k of each synthetic instance) | <integer>"),
    ("res_min", "stop once the residual Frobenius norm is at or below this"),
    ("support_mode", "LSTM-CS support bookkeeping: per-channel | shared"),
    ("solvers", "comma list of lstm-cs, omp, somp, oracle"),
    ("sigma", "noise standard deviation for solve and timing"),
    ("sigma_grid", "noise values for sweep axis = sigma"),
    ("m_over_n_grid", "undersampling ratios for sweep axis = m_over_n"),
    ("axis", "sweep axis: k | sigma | m_over_n"),
    ("train_count", "training instances (synthetic matrices or image groups)"),
    ("validation_count", "validation instances used for early stopping"),
    ("test_count", "test instances per grid point (synthetic) or test image groups"),
    ("recovery_threshold", "an instance counts as recovered when NMSE <= this"),
    ("phase_fraction", "recovered fraction defining the phase boundary"),
    ("timing_repeats", "how often timing re-solves each instance"),
    ("write_images", "solve: write reconstructed PGM images for image datasets"),
    ("ncell", "LSTM cells"),
    ("variant", "full | reduced (no forget gate, no peepholes)"),
    ("epsilon", "optimizer step size"),
    ("clip", "entrywise gradient clip threshold"),
    ("epochs", "training epochs"),
    ("batch_size", "training sequences per mini-batch"),
    ("momentum", "banded (0.9 for the first/last 10% of updates, 0.995 between) | <constant>"),
    ("early_stopping", "keep the parameters with the best validation NMSE"),
    ("patience", "stop after this many epochs without improvement; 0 = never"),
    ("include_initial_pair", "train on (y, first index) as well as on residual pairs"),
    ("augment_signs", "random per-channel sign flips of training sequences"),
    ("augment_channels", "random channel order of training sequences"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    Synthetic,
    Mnist,
    Images,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    K,
    Sigma,
    MOverN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    LstmCs,
    Omp,
    Somp,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverK {
    Known,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Momentum {
    Banded,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: Dataset,
    pub images_path: Option<PathBuf>,
    pub labels_path: Option<PathBuf>,
    pub test_images_path: Option<PathBuf>,
    pub test_labels_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub model_path: String,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub block: usize,
    pub transform: TransformKind,
    pub pattern: SparsityPattern,
    pub amplitude: AmplitudeLaw,
    pub k_grid: Vec<usize>,
    pub k_max: usize,
    pub solver_k: SolverK,
    pub res_min: f64,
    pub support_mode: SupportMode,
    pub solvers: Vec<SolverKind>,
    pub sigma: f64,
    pub sigma_grid: Vec<f64>,
    pub m_over_n_grid: Vec<f64>,
    pub axis: Axis,
    pub train_count: usize,
    pub validation_count: usize,
    pub test_count: usize,
    pub recovery_threshold: f64,
    pub phase_fraction: f64,
    pub timing_repeats: usize,
    pub write_images: bool,
    pub ncell: usize,
    pub variant: Variant,
    pub epsilon: f64,
    pub clip: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: Momentum,
    pub early_stopping: bool,
    pub patience: usize,
    pub include_initial_pair: bool,
    pub augment_signs: bool,
    pub augment_channels: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            dataset: Dataset::Synthetic,
            images_path: None,
            labels_path: None,
            test_images_path: None,
            test_labels_path: None,
            output_dir: PathBuf::from("out"),
            model_path: "model.lstmcs".into(),
            n: 64,
            m: 32,
            l: 4,
            block: 8,
            transform: TransformKind::None,
            pattern: SparsityPattern::Independent,
            amplitude: AmplitudeLaw::UniformSigned,
            k_grid: (4..=16).collect(),
            k_max: 16,
            solver_k: SolverK::Known,
            res_min: 0.0,
            support_mode: SupportMode::PerChannel,
            solvers: vec![SolverKind::LstmCs, SolverKind::Omp, SolverKind::Somp],
            sigma: 0.0,
            sigma_grid: vec![0.5, 0.2, 0.1, 0.05, 0.01, 0.005],
            m_over_n_grid: vec![0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50],
            axis: Axis::K,
            train_count: 200,
            validation_count: 0,
            test_count: 16,
            recovery_threshold: 0.6,
            phase_fraction: 0.9,
            timing_repeats: 1,
            write_images: true,
            ncell: 128,
            variant: Variant::Reduced,
            epsilon: 0.05,
            clip: 1.0,
            epochs: 25,
            batch_size: 20,
            momentum: Momentum::Banded,
            early_stopping: false,
            patience: 0,
            include_initial_pair: true,
            augment_signs: false,
            augment_channels: false,
        }
    }
}

// ---------------------------------------------------------------------------
// Value syntax

fn bad(key: &str, value: &str, expected: &str) -> CliError {
    CliError::config(format!("key `{key}`: cannot parse {value:?} as {expected}"))
}

fn parse_num<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, expected))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, value, "true | false")),
    }
}

fn parse_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim) {
        if let Some((lo, rest)) = item.split_once("..") {
            let (hi, step) = match rest.split_once(':') {
                Some((hi, step)) => (hi, parse_num::<usize>(key, step.trim(), "a range step")?),
                None => (rest, 1),
            };
            let lo: usize = parse_num(key, lo.trim(), "a range start")?;
            let hi: usize = parse_num(key, hi.trim(), "a range end")?;
            if step == 0 || hi < lo {
                return Err(bad(key, item, "a range a..b[:s] with a <= b and s > 0"));
            }
            out.extend((lo..=hi).step_by(step));
        } else {
            out.push(parse_num(key, item, "an unsigned integer")?);
        }
    }
    Ok(out)
}

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_num(key, v.trim(), "a number")).collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn path_str(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::LstmCs => "lstm-cs",
            SolverKind::Omp => "omp",
            SolverKind::Somp => "somp",
            SolverKind::Oracle => "oracle",
        }
    }

    fn parse(key: &str, value: &str) -> Result<Self> {
        match value {
            "lstm-cs" => Ok(SolverKind::LstmCs),
            "omp" => Ok(SolverKind::Omp),
            "somp" => Ok(SolverKind::Somp),
            "oracle" => Ok(SolverKind::Oracle),
            _ => Err(bad(key, value, "lstm-cs | omp | somp | oracle")),
        }
    }
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::K => "k",
            Axis::Sigma => "sigma",
            Axis::MOverN => "m_over_n",
        }
    }
}

impl ExperimentConfig {
    /// Parses a config file's text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1)))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(CliError::config(format!("line {}: key `{key}` given twice", lineno + 1)));
            }
            cfg.set(key, value.trim())
                .map_err(|e| CliError::config(format!("line {}: {}", lineno + 1, strip_prefix(e))))?;
            seen.push(key);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), strip_prefix(e))))
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override {assignment:?} is not of the form key=value")))?;
        self.set(key.trim(), value.trim())
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_num(key, value, "an unsigned 64-bit integer")?,
            "dataset" => {
                self.dataset = match value {
                    "synthetic" => Dataset::Synthetic,
                    "mnist" => Dataset::Mnist,
                    "images" => Dataset::Images,
                    _ => return Err(bad(key, value, "synthetic | mnist | images")),
                }
            }
            "images_path" => self.images_path = parse_path(value),
            "labels_path" => self.labels_path = parse_path(value),
            "test_images_path" => self.test_images_path = parse_path(value),
            "test_labels_path" => self.test_labels_path = parse_path(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "model_path" => self.model_path = value.to_string(),
            "n" => self.n = parse_num(key, value, "an unsigned integer")?,
            "m" => self.m = parse_num(key, value, "an unsigned integer")?,
            "l" => self.l = parse_num(key, value, "an unsigned integer")?,
            "block" => self.block = parse_num(key, value, "an unsigned integer")?,
            "transform" => {
                self.transform = match value {
                    "none" => TransformKind::None,
                    "dct" => TransformKind::Dct,
                    "haar3" => TransformKind::Haar3,
                    _ => return Err(bad(key, value, "none | dct | haar3")),
                }
            }
            "pattern" => {
                self.pattern = match value {
                    "joint" => SparsityPattern::Joint,
                    "independent" => SparsityPattern::Independent,
                    _ => return Err(bad(key, value, "joint | independent")),
                }
            }
            "amplitude" => {
                self.amplitude = match value {
                    "uniform" => AmplitudeLaw::UniformSigned,
                    "gaussian" => AmplitudeLaw::Gaussian,
                    _ => return Err(bad(key, value, "uniform | gaussian")),
                }
            }
            "k_grid" => self.k_grid = parse_usize_list(key, value)?,
            "k_max" => self.k_max = parse_num(key, value, "an unsigned integer")?,
            "solver_k" => {
                self.solver_k = match value {
                    "known" => SolverK::Known,
                    _ => SolverK::Fixed(parse_num(key, value, "known | <integer>")?),
                }
            }
            "res_min" => self.res_min = parse_num(key, value, "a number")?,
            "support_mode" => {
                self.support_mode = match value {
                    "per-channel" => SupportMode::PerChannel,
                    "shared" => SupportMode::Shared,
                    _ => return Err(bad(key, value, "per-channel | shared")),
                }
            }
            "solvers" => {
                self.solvers = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|v| SolverKind::parse(key, v.trim())).collect::<Result<_>>()?
                }
            }
            "sigma" => self.sigma = parse_num(key, value, "a number")?,
            "sigma_grid" => self.sigma_grid = parse_f64_list(key, value)?,
            "m_over_n_grid" => self.m_over_n_grid = parse_f64_list(key, value)?,
            "axis" => {
                self.axis = match value {
                    "k" => Axis::K,
                    "sigma" => Axis::Sigma,
                    "m_over_n" => Axis::MOverN,
                    _ => return Err(bad(key, value, "k | sigma | m_over_n")),
                }
            }
            "train_count" => self.train_count = parse_num(key, value, "an unsigned integer")?,
            "validation_count" => self.validation_count = parse_num(key, value, "an unsigned integer")?,
            "test_count" => self.test_count = parse_num(key, value, "an unsigned integer")?,
            "recovery_threshold" => self.recovery_threshold = parse_num(key, value, "a number")?,
            "phase_fraction" => self.phase_fraction = parse_num(key, value, "a number")?,
            "timing_repeats" => self.timing_repeats = parse_num(key, value, "an unsigned integer")?,
            "write_images" => self.write_images = parse_bool(key, value)?,
            "ncell" => self.ncell = parse_num(key, value, "an unsigned integer")?,
            "variant" => {
                self.variant = match value {
                    "full" => Variant::Full,
                    "reduced" => Variant::Reduced,
                    _ => return Err(bad(key, value, "full | reduced")),
                }
            }
            "epsilon" => self.epsilon = parse_num(key, value, "a number")?,
            "clip" => self.clip = parse_num(key, value, "a number")?,
            "epochs" => self.epochs = parse_num(key, value, "an unsigned integer")?,
            "batch_size" => self.batch_size = parse_num(key, value, "an unsigned integer")?,
            "momentum" => {
                self.momentum = match value {
                    "banded" => Momentum::Banded,
                    _ => Momentum::Constant(parse_num(key, value, "banded | <number>")?),
                }
            }
            "early_stopping" => self.early_stopping = parse_bool(key, value)?,
            "patience" => self.patience = parse_num(key, value, "an unsigned integer")?,
            "include_initial_pair" => self.include_initial_pair = parse_bool(key, value)?,
            "augment_signs" => self.augment_signs = parse_bool(key, value)?,
            "augment_channels" => self.augment_channels = parse_bool(key, value)?,
            _ => {
                return Err(CliError::config(format!(
                    "unknown key `{key}` (valid keys: {})",
                    KEYS.iter().map(|(k, _)| *k).collect::<Vec<_>>().join(", ")
                )))
            }
        }
        Ok(())
    }

    /// The textual value of a canonical key.
    pub fn get(&self, key: &str) -> Option<String> {
        let v = match key {
            "seed" => self.seed.to_string(),
            "dataset" => match self.dataset {
                Dataset::Synthetic => "synthetic",
                Dataset::Mnist => "mnist",
                Dataset::Images => "images",
            }
            .into(),
            "images_path" => path_str(&self.images_path),
            "labels_path" => path_str(&self.labels_path),
            "test_images_path" => path_str(&self.test_images_path),
            "test_labels_path" => path_str(&self.test_labels_path),
            "output_dir" => self.output_dir.display().to_string(),
            "model_path" => self.model_path.clone(),
            "n" => self.n.to_string(),
            "m" => self.m.to_string(),
            "l" => self.l.to_string(),
            "block" => self.block.to_string(),
            "transform" => match self.transform {
                TransformKind::None => "none",
                TransformKind::Dct => "dct",
                TransformKind::Haar3 => "haar3",
            }
            .into(),
            "pattern" => match self.pattern {
                SparsityPattern::Joint => "joint",
                // Image-derived ensembles never come from this key.
                SparsityPattern::Independent | SparsityPattern::ImageDerived => "independent",
            }
            .into(),
            "amplitude" => match self.amplitude {
                AmplitudeLaw::UniformSigned => "uniform",
                AmplitudeLaw::Gaussian => "gaussian",
            }
            .into(),
            "k_grid" => join(&self.k_grid),
            "k_max" => self.k_max.to_string(),
            "solver_k" => match self.solver_k {
                SolverK::Known => "known".into(),
                SolverK::Fixed(k) => k.to_string(),
            },
            "res_min" => self.res_min.to_string(),
            "support_mode" => match self.support_mode {
                SupportMode::PerChannel => "per-channel",
                SupportMode::Shared => "shared",
            }
            .into(),
            "solvers" => self.solvers.iter().map(|s| s.name()).collect::<Vec<_>>().join(","),
            "sigma" => self.sigma.to_string(),
            "sigma_grid" => join(&self.sigma_grid),
            "m_over_n_grid" => join(&self.m_over_n_grid),
            "axis" => self.axis.name().into(),
            "train_count" => self.train_count.to_string(),
            "validation_count" => self.validation_count.to_string(),
            "test_count" => self.test_count.to_string(),
            "recovery_threshold" => self.recovery_threshold.to_string(),
            "phase_fraction" => self.phase_fraction.to_string(),
            "timing_repeats" => self.timing_repeats.to_string(),
            "write_images" => self.write_images.to_string(),
            "ncell" => self.ncell.to_string(),
            "variant" => match self.variant {
                Variant::Full => "full",
                Variant::Reduced => "reduced",
            }
            .into(),
            "epsilon" => self.epsilon.to_string(),
            "clip" => self.clip.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "momentum" => match self.momentum {
                Momentum::Banded => "banded".into(),
                Momentum::Constant(mu) => mu.to_string(),
            },
            "early_stopping" => self.early_stopping.to_string(),
            "patience" => self.patience.to_string(),
            "include_initial_pair" => self.include_initial_pair.to_string(),
            "augment_signs" => self.augment_signs.to_string(),
            "augment_channels" => self.augment_channels.to_string(),
            _ => return None,
        };
        Some(v)
    }

    /// Emits every canonical key, each preceded by its description.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (key, doc) in KEYS {
            let value = self.get(key).expect("every canonical key has a value");
            out.push_str(&format!("# {doc}\n{key} = {value}\n"));
        }
        out
    }

    /// `model_path` with `{m}` replaced by the given measurement count.
    pub fn model_path_for(&self, m: usize) -> PathBuf {
        PathBuf::from(self.model_path.replace("{m}", &m.to_string()))
    }

    /// Measurement count for an undersampling ratio, at least 1.
    pub fn m_for_ratio(&self, ratio: f64) -> usize {
        ((ratio * self.n as f64).round() as usize).max(1)
    }

    /// Checks cross-field consistency and that referenced input paths exist.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CliError::config(msg));
        if self.n == 0 || self.m == 0 || self.l == 0 {
            return fail("n, m and l must all be positive".into());
        }
        if self.m > self.n {
            return fail(format!("m = {} exceeds n = {}", self.m, self.n));
        }
        if self.k_grid.is_empty() || self.sigma_grid.is_empty() || self.m_over_n_grid.is_empty() {
            return fail("k_grid, sigma_grid and m_over_n_grid must be non-empty".into());
        }
        if let Some(&k) = self.k_grid.iter().find(|&&k| k > self.n) {
            return fail(format!("k_grid value {k} exceeds n = {}", self.n));
        }
        if let Some(&s) = self.sigma_grid.iter().chain([&self.sigma]).find(|s| !(s.is_finite() && **s >= 0.0)) {
            return fail(format!("noise level {s} must be finite and >= 0"));
        }
        if let Some(&r) = self.m_over_n_grid.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return fail(format!("m_over_n_grid value {r} must lie in (0, 1]"));
        }
        if !(self.res_min.is_finite() && self.res_min >= 0.0) {
            return fail(format!("res_min = {} must be finite and >= 0", self.res_min));
        }
        if self.solvers.is_empty() {
            return fail("solvers must name at least one solver".into());
        }
        if self.k_max == 0 {
            return fail("k_max must be positive".into());
        }
        if let SolverK::Fixed(k) = self.solver_k {
            if k == 0 || k > self.m {
                return fail(format!("solver_k = {k} must lie in 1..=m (m = {})", self.m));
            }
        }
        if self.dataset != Dataset::Synthetic && self.solver_k == SolverK::Known {
            return fail("solver_k = known needs synthetic data; set an integer for image datasets".into());
        }
        if self.ncell == 0 || self.batch_size == 0 || self.timing_repeats == 0 {
            return fail("ncell, batch_size and timing_repeats must be positive".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) || !(self.clip > 0.0) {
            return fail("epsilon must be finite and >= 0 and clip must be positive".into());
        }
        if let Momentum::Constant(mu) = self.momentum {
            if !(0.0..1.0).contains(&mu) {
                return fail(format!("momentum = {mu} must lie in [0, 1)"));
            }
        }
        if !(self.recovery_threshold >= 0.0) || !(0.0..=1.0).contains(&self.phase_fraction) {
            return fail("recovery_threshold must be >= 0 and phase_fraction in [0, 1]".into());
        }
        if self.dataset != Dataset::Synthetic {
            if self.block == 0 || self.n != self.block * self.block {
                return fail(format!("n = {} must equal block * block = {}", self.n, self.block * self.block));
            }
            let needs_labels = self.dataset == Dataset::Mnist;
            self.require_path("images_path", &self.images_path)?;
            if needs_labels {
                self.require_path("labels_path", &self.labels_path)?;
                if self.l > 10 {
                    return fail(format!("mnist channels are digit classes; l = {} exceeds 10", self.l));
                }
            }
            if self.test_images_path.is_some() {
                self.require_path("test_images_path", &self.test_images_path)?;
                if needs_labels {
                    self.require_path("test_labels_path", &self.test_labels_path)?;
                }
            }
        }
        Ok(())
    }

    fn require_path(&self, key: &str, path: &Option<PathBuf>) -> Result<()> {
        match path {
            None => Err(CliError::config(format!("`{key}` is required for dataset = {}", self.get("dataset").unwrap()))),
            Some(p) if !p.exists() => Err(CliError::config(format!("`{key}` = {} does not exist", p.display()))),
            Some(_) => Ok(()),
        }
    }
}

fn strip_prefix(e: CliError) -> String {
    match e {
        CliError::Config(msg) => msg,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_canonical_key_round_trips() {
        let cfg = ExperimentConfig::default();
        for (key, _) in KEYS {
            let v = cfg.get(key).unwrap();
            let mut other = ExperimentConfig::default();
            other.set(key, &v).unwrap();
            assert_eq!(other, cfg, "key {key}");
        }
    }

    #[test]
    fn parse_emit_parse_is_identity() {
        let text = "seed = 9\nk_grid = 2, 4..8:2\nsolvers = omp,oracle\nmomentum = 0.9\nsolver_k = 5\n\
                    sigma_grid = 0.5,0.005\nimages_path = /tmp/x # trailing comment\nsupport_mode = shared\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.k_grid, vec![2, 4, 6, 8]);
        assert_eq!(cfg.solvers, vec![SolverKind::Omp, SolverKind::Oracle]);
        assert_eq!(cfg.images_path, Some(PathBuf::from("/tmp/x")));
        let again = ExperimentConfig::parse(&cfg.emit()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_errors() {
        let err = ExperimentConfig::parse("# c\nfoo = 1\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("unknown key `foo`"), "{err}");
        let err = ExperimentConfig::parse("n = 1\nn = 2\n").unwrap_err().to_string();
        assert!(err.contains("twice"), "{err}");
        let err = ExperimentConfig::parse("n = x\n").unwrap_err().to_string();
        assert!(err.contains("`n`"), "{err}");
        assert!(ExperimentConfig::parse("just words\n").is_err());
    }

    #[test]
    fn overrides_apply_on_top() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_override("m=20").unwrap();
        assert_eq!(cfg.m, 20);
        assert!(cfg.apply_override("m").is_err());
        assert!(cfg.apply_override("bogus=1").is_err());
    }

    #[test]
    fn validation_catches_inconsistencies() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let mut cfg = ExperimentConfig::default();
        cfg.solvers.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig {
            dataset: Dataset::Mnist,
            solver_k: SolverK::Fixed(8),
            n: 144,
            block: 12,
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("images_path"), "{err}");
        cfg.images_path = Some(PathBuf::from("/definitely/not/here"));
        assert!(cfg.validate().unwrap_err().to_string().contains("does not exist"));
        let cfg = ExperimentConfig {
            m: 100,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn model_path_template() {
        let cfg = ExperimentConfig {
            model_path: "models/m{m}.lstmcs".into(),
            ..Default::default()
        };
        assert_eq!(cfg.model_path_for(19), PathBuf::from("models/m19.lstmcs"));
        assert_eq!(cfg.m_for_ratio(0.3), 19);
    }
}
