use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use emest::harness::{self, score, selftest, single, sweep, HarnessError};
use emest::io::write_dataset;
use emest::model::{generate_dataset, AdversarySpec, ModelParams};

#[derive(Parser)]
#[command(
    name = "emest",
    version,
    about = "Mean estimation for entangled, non-identically distributed samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset with a ground-truth trailer.
    Generate {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        /// e.g. `identity`, `isotropic:10000`, `lowrank:2:100`, `embed:0:100`, with optional `+uniform`.
        #[arg(long, default_value = "identity")]
        adversary: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated true mean (default zeros).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mean: Option<Vec<f64>>,
        /// Omit the `# truth` trailer.
        #[arg(long)]
        no_truth: bool,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run the estimator from a JSON config and print the report.
    Estimate {
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a benchmark sweep and write its CSV.
    Sweep {
        config: PathBuf,
        /// Overrides the config output path.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print the l2 distance between an estimate and a dataset's true mean.
    Score { estimate: PathBuf, dataset: PathBuf },
    /// Run the deterministic invariant suite.
    Selftest,
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Generate {
            dim,
            n,
            alpha,
            adversary,
            seed,
            mean,
            no_truth,
            out,
        } => {
            let mean = mean.unwrap_or_else(|| vec![0.0; dim]);
            let params = ModelParams::new(dim, n, alpha, mean)?;
            let adversary: AdversarySpec = adversary.parse()?;
            let data = generate_dataset(&params, &adversary, seed)?;
            write_dataset(&out, &data, !no_truth)?;
        }
        Command::Estimate { config, seed } => {
            let report = single::run_single(&config, seed)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Sweep { config, out } => {
            let (csv, written) = sweep::run_sweep(&config, out.as_deref())?;
            if written.is_none() {
                print!("{csv}");
            }
        }
        Command::Score { estimate, dataset } => {
            println!("{}", score::score(&estimate, &dataset)?);
        }
        Command::Selftest => {
            let checks = selftest::run_selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if let Some(bad) = checks.iter().find(|c| !c.passed) {
                return Err(HarnessError {
                    code: harness::EXIT_NUMERICAL,
                    kind: "selftest",
                    message: format!("check `{}` failed", bad.name),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code as u8)
        }
    }
}
