//! `wasabi`: morphometric cohort distances from the command line.

mod commands;
mod output;
mod pipeline;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;


#[derive(Parser, Debug)]
#[command(name = "wasabi", version, about = "Distances between cohorts of regional brain volumes")]
struct Cli {
    /// Worker threads for bootstrap repeats and kernel sums (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One distance between two tables
    Compute(commands::ComputeArgs),
    /// Bootstrap distribution of a distance (within-cohort null with one table)
    Bootstrap(commands::BootstrapArgs),
    /// Reference-vs-candidates comparison table
    Compare(commands::CompareArgs),
    /// QC threshold and filtered table
    QcFilter(commands::QcFilterArgs),
    /// Henze-Zirkler multivariate normality test
    Normality(commands::NormalityArgs),
    /// Synthetic cohorts from a Gaussian spec
    Gen(commands::GenArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Write the report here (atomically) instead of standard output
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let go = || match cli.command {
        Command::Compute(a) => commands::compute(a),
        Command::Bootstrap(a) => commands::bootstrap(a),
        Command::Compare(a) => commands::compare(a),
        Command::QcFilter(a) => commands::qc_filter(a),
        Command::Normality(a) => commands::normality(a),
        Command::Gen(a) => commands::gen(a),
    };
    match cli.workers {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(go),
        None => go(),
    }
}

/// 2 for numerical failures inside the library, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<wasabi_core::Error>())
        .any(|e| e.is_numerical());
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            let causes: Vec<String> = err.chain().skip(1).map(|e| e.to_string()).collect();
            let report = json!({
                "error": {
                    "kind": if code == 2 { "numerical" } else { "input" },
                    "message": err.to_string(),
                    "causes": causes,
                },
                "exit_code": code,
            });
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}
