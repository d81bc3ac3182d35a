use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fedns_cli::config::{parse_k_list, parse_seed_list};
use fedns_cli::{effdim_command, run_command, sweep_command, validate_command, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "fedns", version, about = "Federated Newton-sketch experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides run.out
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds, e.g. `1,2,7` or `1-10`; overrides run.seeds
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

impl Common {
    fn options(self) -> Result<RunOptions, CliError> {
        Ok(RunOptions {
            config: self.config,
            out: self.out,
            seeds: self.seeds.as_deref().map(parse_seed_list).transpose()?,
            threads: self.threads,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithm for every seed
    Run(Common),
    /// Mean final FedNS gap for several sketch sizes
    SweepK {
        #[command(flatten)]
        common: Common,
        /// Sketch sizes, e.g. `5,10,20`; overrides sweep.k_values
        #[arg(long)]
        k: Option<String>,
    },
    /// Effective dimension of the loss Hessian at w0 = 0
    Effdim {
        #[arg(long)]
        config: PathBuf,
        /// Also write effdim.json here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running anything
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(common) => {
            let report = run_command(&common.options()?)?;
            let last = report.mean.last().expect("mean trace has round 0");
            println!(
                "{} seeds={} rounds={} mean_final_gap={:e}",
                report.header.algorithm,
                report.runs.len(),
                last.round,
                last.optimal_gap
            );
            for path in &report.written {
                println!("wrote {}", path.display());
            }
        }
        Command::SweepK { common, k } => {
            let ks = k.as_deref().map(parse_k_list).transpose()?;
            let report = sweep_command(&common.options()?, ks)?;
            for row in &report.rows {
                println!("k={} mean_final_gap={:e}", row.sketch_size, row.mean_final_gap);
            }
            for path in &report.written {
                println!("wrote {}", path.display());
            }
        }
        Command::Effdim { config, out } => {
            let r = effdim_command(&config, out.as_deref())?;
            println!("effective_dimension={}", r.effective_dimension);
            println!("model_dim={}", r.model_dim);
            println!("samples={}", r.samples);
            println!("lambda={:e}", r.lambda);
            println!("mbar1={} mbar2={}", r.mbar1, r.mbar2);
        }
        Command::ValidateConfig { config } => {
            let cfg = validate_command(&config)?;
            println!(
                "ok: {} on {} workers, seeds {:?}",
                cfg.algorithm.name(),
                cfg.partition.workers(),
                cfg.run.seeds
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
