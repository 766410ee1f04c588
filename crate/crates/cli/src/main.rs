//! `satlang`: data generation, exact probes, model training and evaluation.
//!
//! Every subcommand takes `--seed`, `--out`, `--threads` and `--config`.
//! Settings come from flags first, then the config file, then defaults, and
//! each run writes `manifest.json` into its output directory.

mod config;
mod data;
mod models;
mod probe;
mod rebm;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "satlang", version, about = "SAT-derived weighted languages: oracles, witnesses and learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: out/<command>].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    pub threads: Option<usize>,
    /// Flat `key = value` settings file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a hard 3-SAT corpus or a toy residual-model corpus.
    GenData(data::GenDataArgs),
    /// Exact local probabilities after the indicator blow-up of a formula.
    ProbeLocalprob(probe::ProbeArgs),
    /// Compare the witness network with exact weights on every string.
    WitnessCheck(probe::WitnessArgs),
    /// Train an autoregressive model.
    TrainAr(models::TrainArgs),
    /// Evaluate an autoregressive model.
    EvalAr(models::EvalArgs),
    /// Train a residual discriminator on top of a frozen base model.
    TrainRebm(rebm::TrainArgs),
    /// Bootstrap improvement report for a residual model.
    EvalRebm(rebm::EvalArgs),
    /// Check the KL relation on random finite-support instances.
    KlCheck(rebm::KlArgs),
    /// Render result JSON files as CSV tables and SVG plots.
    Report(report::ReportArgs),
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => data::gen_data(a),
        Command::ProbeLocalprob(a) => probe::probe_localprob(a),
        Command::WitnessCheck(a) => probe::witness_check(a),
        Command::TrainAr(a) => models::train_ar(a),
        Command::EvalAr(a) => models::eval_ar(a),
        Command::TrainRebm(a) => rebm::train_rebm(a),
        Command::EvalRebm(a) => rebm::eval_rebm(a),
        Command::KlCheck(a) => rebm::kl_check(a),
        Command::Report(a) => report::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let causes: Vec<String> = e.chain().skip(1).map(|c| c.to_string()).collect();
            let msg = serde_json::json!({ "error": e.to_string(), "causes": causes });
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
