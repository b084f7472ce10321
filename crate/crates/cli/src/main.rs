use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rbsde_cli::{registry, run_experiment, validate, Overrides};

#[derive(Parser)]
#[command(name = "rbsde-lab", version, about = "Run reflected BSDE experiments from TOML files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Replace the Monte Carlo (and a priori) seed.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Replace the number of simulated paths.
    #[arg(long)]
    paths_override: Option<usize>,
    /// Write artifacts here instead of the configured directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed_override,
            n_paths: self.paths_override,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV tables and JSON report.
    Run(RunArgs),
    /// Print the built-in generators, obstacles, dynamics and presets.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Check that a configuration parses and builds.
    Validate(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::List { json } => {
            let out = std::io::stdout().lock();
            let res = if json {
                rbsde::io::write_json(&registry::catalog(), out)
            } else {
                registry::print_catalog(out)
            };
            i32::from(res.is_err()) * 3
        }
        Command::Validate(args) => match validate(&args.config, &args.overrides()) {
            Ok(cfg) => {
                println!("{}: ok ({})", args.config.display(), cfg.kind.id());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::Run(args) => match run_experiment(&args.config, &args.overrides(), args.out_dir.as_deref()) {
            Ok(w) => {
                for c in &w.report.checks {
                    println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
                }
                if w.report.exploratory {
                    println!("exploratory run: no checks");
                }
                for f in &w.files {
                    println!("wrote {}", f.display());
                }
                rbsde_cli::exit_code(&w.report)
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}
