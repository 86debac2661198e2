use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpbo_cli::bench::{self, Algorithm, RunManifest};
use gpbo_cli::eval::{self, EvalOptions};
use gpbo_cli::study::{self, SuggestArgs};
use gpbo_cli::{CliError, CliResult};
use gpbo_core::designer::{DesignerConfig, Outcome};

#[derive(Parser)]
#[command(name = "gpbo", version, about = "GP-bandit black-box optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Suggest trials for a study, creating the state file if needed.
    Suggest {
        /// Study JSON (parameters and objectives).
        #[arg(long)]
        study: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Seed for a new state file; ignored once the state exists.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Designer configuration JSON for a new state file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Report the outcome of a pending trial.
    Complete {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        id: u64,
        /// Comma-separated metric values, in objective order.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required_unless_present = "infeasible")]
        values: Option<Vec<f64>>,
        #[arg(long, conflicts_with = "values")]
        infeasible: bool,
    },
    /// Run algorithms on benchmarks and write results.csv.
    Bench(BenchArgs),
    /// Compare algorithms from results CSVs against a baseline.
    Eval {
        #[arg(long, num_args = 1.., required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        baseline: String,
        #[arg(long)]
        out: PathBuf,
        /// Seed for the hypervolume scalarizations.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// Run manifest JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    algo: Option<Vec<Algorithm>>,
    #[arg(long)]
    workers: Option<usize>,
}

fn read_designer(path: &PathBuf) -> CliResult<DesignerConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed config {}: {e}", path.display())))
}

fn print_json<T: serde::Serialize>(v: &T) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(v).map_err(|e| CliError::Internal(e.to_string()))?);
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Suggest { study: study_path, state, count, seed, config } => {
            let designer = config.as_ref().map(read_designer).transpose()?;
            let trials =
                study::suggest(&SuggestArgs { study: &study_path, state: &state, count, seed, designer })?;
            print_json(&trials)
        }
        Command::Complete { state, id, values, infeasible } => {
            let outcome = if infeasible { Outcome::Infeasible } else { Outcome::Measured(values.unwrap_or_default()) };
            let trial = study::complete(&state, id, outcome)?;
            print_json(&trial)
        }
        Command::Bench(args) => {
            let mut m = RunManifest::from_path(&args.config)?;
            if let Some(s) = args.seed {
                m.seed = s;
            }
            if let Some(t) = args.horizon {
                m.horizon = t;
            }
            if let Some(r) = args.repeats {
                m.repeats = r;
            }
            if let Some(b) = args.batch {
                m.batch = b;
            }
            if let Some(a) = args.algo {
                m.algorithms = a;
            }
            if args.workers.is_some() {
                m.workers = args.workers;
            }
            let out = args.out.or_else(|| m.out.clone()).unwrap_or_else(|| PathBuf::from("."));
            let path = bench::run_bench(&m, &out)?;
            log::info!("wrote {}", path.display());
            println!("{}", path.display());
            Ok(())
        }
        Command::Eval { results, baseline, out, seed } => {
            let opts = EvalOptions { seed, ..EvalOptions::new(baseline) };
            let report = eval::run_eval(&results, &opts, &out)?;
            for r in &report.rows {
                let score = r.log_efficiency.map_or("n/a".to_string(), |v| format!("{v:.3}"));
                println!("{}\t{}\t{}", r.benchmark, r.algorithm, score);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GPBO_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
