use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use compdyn_cli::commands::{self, AuditOptions, ClassifyOptions, ShadowOptions, SimulateOptions};
use compdyn_cli::config::SystemConfig;
use compdyn_cli::{CliError, Outcome};

/// Classify and simulate weighted shifts and composition operators on
/// dissipative and atomic measure systems.
#[derive(Parser)]
#[command(name = "compdyn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the verdict of every dynamical property.
    Classify {
        config: PathBuf,
        /// Canonical JSON instead of a table.
        #[arg(long)]
        json: bool,
        /// Window length of the horizon cross-check.
        #[arg(long, default_value_t = 200)]
        horizon: u64,
        /// Anchor span of the horizon cross-check.
        #[arg(long, default_value_t = 500)]
        kspan: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, hide = true)]
        inject_violation: bool,
    },
    /// Orbit norms of a finitely supported vector as CSV.
    Simulate {
        config: PathBuf,
        /// Terms `k=a`, `c:k=a` (component c) or `k@j=a` (cell j), comma separated.
        #[arg(long, allow_hyphen_values = true)]
        vector: String,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        from: i64,
        #[arg(long, default_value_t = 10, allow_hyphen_values = true)]
        to: i64,
        /// Scale the vector to norm 1 first.
        #[arg(long)]
        normalize: bool,
    },
    /// Shadow a seeded pseudotrajectory and compare with the a-priori bound.
    Shadow {
        config: PathBuf,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
        #[arg(long, default_value_t = 201)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Emit the config of the weighted shift the system reduces to.
    Reduce { config: PathBuf },
    /// Seeded sweep of random systems through every consistency check.
    Audit {
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        horizon: u64,
        #[arg(long, default_value_t = 500)]
        kspan: u64,
        #[arg(long)]
        json: bool,
        /// Audit this system instead of random ones.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_violation: bool,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Classify {
            config,
            json,
            horizon,
            kspan,
            seed,
            inject_violation,
        } => commands::classify(
            &SystemConfig::load(&config)?,
            &ClassifyOptions {
                json,
                horizon,
                k_span: kspan,
                seed,
                inject_violation,
            },
        ),
        Command::Simulate {
            config,
            vector,
            from,
            to,
            normalize,
        } => commands::simulate(
            &SystemConfig::load(&config)?,
            &SimulateOptions {
                vector,
                from,
                to,
                normalize,
            },
        ),
        Command::Shadow {
            config,
            json,
            delta,
            length,
            seed,
        } => commands::shadow(
            &SystemConfig::load(&config)?,
            &ShadowOptions {
                json,
                delta,
                length,
                seed,
            },
        ),
        Command::Reduce { config } => commands::reduce(&SystemConfig::load(&config)?),
        Command::Audit {
            count,
            seed,
            horizon,
            kspan,
            json,
            config,
            inject_violation,
        } => {
            let cfg = config.as_deref().map(SystemConfig::load).transpose()?;
            commands::audit(
                &AuditOptions {
                    json,
                    count,
                    seed,
                    horizon,
                    k_span: kspan,
                    inject_violation,
                },
                cfg.as_ref(),
            )
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{}", out.stdout);
            if let Some(msg) = out.stderr {
                eprintln!("compdyn: {msg}");
            }
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("compdyn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
