use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ldp_lab::{
    fernique_command, load_config, print_config, rate_command, run, with_seed, EXIT_ERROR,
};

#[derive(Parser)]
#[command(
    name = "ldp-lab",
    version,
    about = "Large-deviation experiments on Gaussian models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a configuration file.
    Run {
        config: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Validate a configuration and print it with all defaults filled in.
    Check { config: PathBuf },
    /// Print the rate I(x) of a point under a model.
    Rate { model: PathBuf, point: PathBuf },
    /// Estimate the Fernique constants of the sup norm under a model.
    Fernique {
        model: PathBuf,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 100_000)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let printed = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            threads,
        } => {
            let loaded = load_config(&config).and_then(|c| match seed {
                Some(s) => with_seed(c, s),
                None => Ok(c),
            });
            let mut cfg = match loaded {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return exit(EXIT_ERROR);
                }
            };
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let outcome = match threads {
                Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                    Ok(pool) => pool.install(|| run(&cfg)),
                    Err(e) => {
                        eprintln!("error: cannot start {n} threads: {e}");
                        return exit(EXIT_ERROR);
                    }
                },
                None => run(&cfg),
            };
            if let Some(r) = &outcome.report {
                print!("{}", r.summary());
            }
            if let Some(e) = &outcome.error {
                eprintln!("error: {e}");
            }
            for p in &outcome.artifacts {
                eprintln!("wrote {}", p.display());
            }
            return exit(outcome.exit_code);
        }
        Command::Check { config } => load_config(&config).map(|c| print_config(&c)),
        Command::Rate { model, point } => rate_command(&model, &point),
        Command::Fernique {
            model,
            s,
            count,
            seed,
        } => fernique_command(&model, s, count, seed),
    };
    match printed {
        Ok(text) => {
            print!("{text}");
            exit(0)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            exit(EXIT_ERROR)
        }
    }
}
