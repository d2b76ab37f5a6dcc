use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adafw::bench::data::write_libsvm_file;
use adafw::bench::experiment::{run_experiment, sweep_k, tune_learning_rate, ExperimentSpec};
use adafw::bench::synthetic::{generate_synthetic_svm, SyntheticSvmSpec};

#[derive(Parser)]
#[command(name = "bench", version, about = "Seeded Frank-Wolfe experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every optimizer of a JSON spec and write traces plus a manifest.
    Run { spec: PathBuf },
    /// Rerun the adaptive variants of a spec across inner iteration counts.
    SweepK {
        spec: PathBuf,
        #[arg(long = "k", value_delimiter = ',', required = true)]
        k: Vec<usize>,
    },
    /// Tune the constant learning rate on the 10^(i/2) grid.
    Tune {
        spec: PathBuf,
        /// Maximum number of runs per optimizer.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Write a synthetic sparse classification dataset in LIBSVM format.
    GenSvm {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        flip_probability: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> adafw::Result<()> {
    match command {
        Command::Run { spec } => {
            let spec = ExperimentSpec::from_file(&spec)?;
            let outcome = run_experiment(&spec)?;
            for run in &outcome.runs {
                let last = run.trace.last().expect("traces start with t = 0");
                println!(
                    "{:<10} t={:<7} epoch={:<8.3} gap={:.6e} -> {}",
                    run.config.algorithm.name(),
                    last.t,
                    last.epoch,
                    last.duality_gap,
                    run.path.display()
                );
            }
            println!("manifest {}", outcome.manifest_path.display());
        }
        Command::SweepK { spec, k } => {
            let spec = ExperimentSpec::from_file(&spec)?;
            let outcome = sweep_k(&spec, &k)?;
            println!("algorithm,k,iterations,final_epoch,final_duality_gap,seconds,wall_seconds,cpu_seconds");
            for r in &outcome.rows {
                println!(
                    "{},{},{},{},{:e},{:.6},{:.6},{:.6}",
                    r.algorithm,
                    r.k,
                    r.iterations,
                    r.final_epoch,
                    r.final_duality_gap,
                    r.seconds,
                    r.wall_seconds,
                    r.cpu_seconds
                );
            }
            println!("summary {}", outcome.summary_path.display());
        }
        Command::Tune { spec, budget } => {
            let spec = ExperimentSpec::from_file(&spec)?;
            for report in tune_learning_rate(&spec, budget)? {
                println!(
                    "{}: eta = 10^({}/2) = {:.6e} by {}",
                    report.algorithm, report.best_exponent, report.best_eta, report.criterion
                );
                for e in &report.evaluations {
                    match e.score {
                        Some(s) => println!("  i={:<3} eta={:<12.6e} score={s:.6e}", e.exponent, e.eta),
                        None => println!("  i={:<3} eta={:<12.6e} diverged", e.exponent, e.eta),
                    }
                }
                if let Some(w) = &report.warning {
                    println!("  warning: {w}");
                }
            }
        }
        Command::GenSvm {
            m,
            n,
            seed,
            flip_probability,
            out,
        } => {
            let spec = SyntheticSvmSpec {
                m,
                n,
                flip_probability,
                seed,
            };
            let data = generate_synthetic_svm(&spec)?;
            write_libsvm_file(&data, &out)?;
            println!(
                "wrote {} samples with {} features to {}",
                data.m(),
                data.n(),
                out.display()
            );
        }
    }
    Ok(())
}
