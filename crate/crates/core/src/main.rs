use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fbrl::env::EnvKind;
use fbrl::harness::config::ExperimentConfig;
use fbrl::harness::experiment::{run_experiment, write_results, FINAL_WINDOW};
use fbrl::harness::oracle::{bfs_shortest_path, greedy_path_length, value_iteration};
use fbrl::harness::report::{compare, load_raw, plot_data};

#[derive(Parser)]
#[command(name = "fbrl", version, about = "Forward-backward reinforcement learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every trial of an experiment and write raw.csv, summary.csv and config.txt.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Forces deterministic (in-loop) imagination.
        #[arg(long)]
        deterministic: bool,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the configured environment exactly and print optimal path data.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare two result directories.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Write plottable mean and standard-error data for a result directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> fbrl::Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            deterministic,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            cfg.deterministic |= deterministic;
            if let Some(out) = out {
                cfg.output_path = out;
            }
            let result = run_experiment(&cfg)?;
            write_results(&cfg.output_path, &cfg, &result)?;
            let finals = result.final_means(FINAL_WINDOW);
            println!(
                "{} {} {}: {} trials, final{FINAL_WINDOW} mean {:.4}, auc {:.4}, median first goal episode {}",
                cfg.method(),
                cfg.environment.kind,
                cfg.environment.size,
                cfg.trials,
                finals.iter().sum::<f64>() / finals.len() as f64,
                result.auc(),
                result.median_first_success(),
            );
            println!("results written to {}", cfg.output_path.display());
        }
        Command::Oracle { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let env = &cfg.environment;
            let table = value_iteration(env, cfg.agent.gamma)?;
            let start = table.value(&env.reset()).unwrap_or(f64::NAN);
            println!("environment\t{} {}", env.kind, env.size);
            println!("states\t{}", table.states.len());
            println!("optimal start value\t{start:.6}");
            match greedy_path_length(env, &table)? {
                Some(n) => println!("greedy path length\t{n}"),
                None => println!("greedy path length\tnone"),
            }
            println!("bfs shortest path\t{:?}", bfs_shortest_path(env)?);
            if env.kind == EnvKind::Gridworld && env.size <= 12 {
                println!("\nV* by row (top row is y = n-1):");
                for y in (0..env.size).rev() {
                    let row: Vec<String> = (0..env.size)
                        .map(|x| format!("{:7.3}", table.values[y * env.size + x]))
                        .collect();
                    println!("{}", row.join(" "));
                }
            }
        }
        Command::Compare { a, b } => {
            print!("{}", compare(&load_raw(&a)?, &load_raw(&b)?));
        }
        Command::Plot { input, out } => {
            std::fs::write(&out, plot_data(&load_raw(&input)?))?;
            println!("plot data written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
