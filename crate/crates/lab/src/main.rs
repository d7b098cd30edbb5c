use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use wrf_core::bench::{
    emit_table, generate_synthetic, run_experiment, DatasetSpec, ExperimentConfig, ModelKind,
    SyntheticSpec, TableFormat,
};

#[derive(Parser)]
#[command(
    name = "wrf-lab",
    version,
    about = "Compare regular and weighted random forests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the repeated-split benchmark and print a results table.
    Run(RunArgs),
    /// Write a two-Gaussian synthetic dataset to CSV.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV dataset; replaces the config's datasets.
    #[arg(long, requires = "label")]
    data: Option<PathBuf>,
    /// Label column of --data.
    #[arg(long, requires = "data")]
    label: Option<String>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated model ids, e.g. regular_rf,opt_auc.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<TableFormat>,
    /// Directory for out-of-fold matrices of the first repetition.
    #[arg(long)]
    dump_oof: Option<PathBuf>,
    /// Directory for fitted weight vectors of the first repetition.
    #[arg(long)]
    dump_weights: Option<PathBuf>,
    /// Directory for base-forest JSON of the first repetition.
    #[arg(long)]
    dump_model: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    sep: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Fraction of class-1 rows.
    #[arg(long, default_value_t = 0.5)]
    balance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Synth(args) => synth(args).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn build_config(args: RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)
            .with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let (Some(data), Some(label)) = (args.data, args.label) {
        config.datasets = vec![DatasetSpec::csv(data, label)];
    }
    if config.datasets.is_empty() {
        bail!("no datasets: pass --config or --data/--label");
    }
    config.n_trees = args.trees.unwrap_or(config.n_trees);
    config.repetitions = args.reps.unwrap_or(config.repetitions);
    config.folds = args.folds.unwrap_or(config.folds);
    config.seed = args.seed.unwrap_or(config.seed);
    config.format = args.format.unwrap_or(config.format);
    if let Some(models) = args.models {
        config.models = models;
    }
    config.out = args.out.or(config.out);
    config.dump_oof = args.dump_oof.or(config.dump_oof);
    config.dump_weights = args.dump_weights.or(config.dump_weights);
    config.dump_model = args.dump_model.or(config.dump_model);
    config.validate()?;
    Ok(config)
}

/// `Ok(false)` when at least one dataset failed.
fn run(args: RunArgs) -> anyhow::Result<bool> {
    let config = build_config(args)?;
    let outcome = run_experiment(&config)?;

    for (name, audits) in &outcome.audits {
        for (r, a) in audits.iter().enumerate() {
            let acc_drop = a.accuracy_fitted_vs_uniform.is_some_and(|(f, u)| f < u);
            let auc_drop = a.auc_fitted_vs_uniform.is_some_and(|(f, u)| f < u);
            if acc_drop || auc_drop {
                eprintln!("warning: {name} repetition {r}: fitted weights scored below uniform out of fold");
            }
        }
    }

    if !outcome.table.rows.is_empty() {
        match &config.out {
            Some(path) => {
                let file = std::fs::File::create(path)
                    .with_context(|| format!("creating {}", path.display()))?;
                emit_table(&outcome.table, config.format, std::io::BufWriter::new(file))?;
            }
            None => {
                let stdout = std::io::stdout();
                emit_table(&outcome.table, config.format, stdout.lock())?;
            }
        }
    }

    if outcome.errors.is_empty() {
        return Ok(true);
    }
    let mut stderr = std::io::stderr().lock();
    writeln!(
        stderr,
        "{} of {} datasets failed:",
        outcome.errors.len(),
        config.datasets.len()
    )?;
    for e in &outcome.errors {
        writeln!(stderr, "  {}: {}", e.dataset, e.message)?;
    }
    Ok(false)
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let spec = SyntheticSpec {
        n: args.n,
        p: args.p,
        balance: args.balance,
        separation: args.sep,
        noise: args.noise,
    };
    let data = generate_synthetic(&spec, args.seed)?;
    let file = std::fs::File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    data.write_csv(std::io::BufWriter::new(file))?;
    Ok(())
}
