//! phenolink: genome-to-face linkage matching at desk scale: synthetic
//! paired datasets, conditional-table fitting, population sweeps and ROC
//! evaluation, feature-space perturbation defenses, and adversarial
//! training, with reproducible seeded runs.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "phenolink", version, about)]
pub struct Cli {
    /// Master seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// JSON config file; command-line flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Panel JSON (phenotype -> {snps, variants}); built-in panel if omitted.
    #[arg(long, global = true)]
    pub panel: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Parse raw genotype exports and phenotype labels into a dataset directory.
    Ingest(commands::IngestArgs),
    /// Fit conditional tables P(variant | call) from a dataset directory.
    Fit(commands::FitArgs),
    /// Construct a synthetic paired dataset (and, if needed, its genotype pool).
    Synth(commands::SynthArgs),
    /// Train the four phenotype classifiers on a dataset's features.
    Train(commands::TrainArgs),
    /// Score probes against genomes and emit the score matrix.
    Match(commands::MatchArgs),
    /// Top-k success as a function of population size, across modes.
    Sweep(commands::SweepArgs),
    /// ROC curves and AUC under the top-k and score-threshold rules.
    Roc(commands::RocArgs),
    /// Perturb features: universal noise or single-phenotype PGD.
    Attack(commands::AttackArgs),
    /// Adversarially train the phenotype classifiers.
    Advtrain(commands::AdvtrainArgs),
    /// Summarize a run directory's artifacts into a report.
    Report(commands::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(args) => commands::ingest(&cli, args),
        Command::Fit(args) => commands::fit(&cli, args),
        Command::Synth(args) => commands::synth(&cli, args),
        Command::Train(args) => commands::train(&cli, args),
        Command::Match(args) => commands::match_cmd(&cli, args),
        Command::Sweep(args) => commands::sweep(&cli, args),
        Command::Roc(args) => commands::roc(&cli, args),
        Command::Attack(args) => commands::attack(&cli, args),
        Command::Advtrain(args) => commands::advtrain(&cli, args),
        Command::Report(args) => commands::report(&cli, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
