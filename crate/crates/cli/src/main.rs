use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lstmcs_cli::commands;
use lstmcs_cli::ExperimentConfig;

/// LSTM-based distributed compressive sensing experiments.
#[derive(Parser)]
#[command(name = "lstmcs", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an LSTM-CS model; writes the model file and train_log.csv.
    Train(Common),
    /// Solve the test set with every configured solver; writes results, summary and images.
    Solve(Common),
    /// Sweep k, sigma or m/n (config key `axis`); writes results, summary and phase boundary.
    Sweep(Common),
    /// Per-vector solve times of every solver; writes timing CSVs and a machine description.
    Timing(Common),
    /// Emit the synthetic sensing matrix and instances as CSV.
    GenData(Common),
    /// Print the effective configuration with every canonical key.
    ShowConfig(Common),
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set m=24`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            cfg.apply_override(o).with_context(|| format!("--set {o}"))?;
        }
        Ok(cfg)
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(c) => {
            let cfg = c.load()?;
            let report = commands::train(&cfg, |r| match r.validation_nmse {
                Some(v) => eprintln!("epoch {:>4}  loss {:.6}  validation nmse {v:.6}  {:.1}s", r.epoch, r.mean_batch_loss, r.wall_time),
                None => eprintln!("epoch {:>4}  loss {:.6}  {:.1}s", r.epoch, r.mean_batch_loss, r.wall_time),
            })?;
            report.outputs.commit()?;
            println!(
                "trained on {} sequences ({} pairs), {} updates; kept epoch {}; model written to {}",
                report.sequences,
                report.pairs,
                report.outcome.updates,
                report.outcome.selected_epoch,
                report.model_path.display()
            );
        }
        Command::Solve(c) => {
            let cfg = c.load()?;
            let report = commands::solve(&cfg)?;
            report.outputs.commit()?;
            for s in &report.summary {
                println!("{:<8} k={:<4} mean nmse {:.6}  recovered {:.3}", s.solver, s.k.map_or("-".into(), |k| k.to_string()), s.mean_nmse, s.recovered_fraction);
            }
            println!("{} rows written to {}", report.rows.len(), cfg.output_dir.display());
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            let report = commands::sweep(&cfg)?;
            report.outputs.commit()?;
            for b in &report.boundary {
                let at = b.m_over_n.map_or("not reached".into(), |r| r.to_string());
                println!("{:<8} k={:<4} sigma={} phase boundary at m/n = {at}", b.solver, b.k.map_or("-".into(), |k| k.to_string()), b.sigma);
            }
            println!("{} rows written to {}", report.rows.len(), cfg.output_dir.display());
        }
        Command::Timing(c) => {
            let cfg = c.load()?;
            let report = commands::timing(&cfg)?;
            report.outputs.commit()?;
            for s in &report.summary {
                let ratio = s.ratio_to_omp.map_or(String::new(), |r| format!("  ({r:.2}x omp)"));
                println!("{:<8} {:.3e} s per vector{ratio}", s.solver, s.mean_seconds_per_vector);
            }
        }
        Command::GenData(c) => {
            let cfg = c.load()?;
            let outputs = commands::gen_data(&cfg)?;
            outputs.commit()?;
            println!("{} files written to {}", outputs.paths().count(), cfg.output_dir.display());
        }
        Command::ShowConfig(c) => {
            let cfg = c.load()?;
            cfg.validate()?;
            print!("{}", cfg.emit());
        }
    }
    Ok(())
}
