use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sqglab::config::load_config;
use sqglab::{commands, thread_cap};

#[derive(Parser)]
#[command(
    name = "sqglab",
    version,
    about = "Spectral simulator and diagnostics for dissipative SQG on the torus"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Directory for output artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Forward run: time-series CSV and final snapshot.
    Simulate(RunArgs),
    /// Backward-dual pairing conservation experiment.
    DualPair(RunArgs),
    /// Three Hoelder estimators on a stored snapshot.
    HolderScan(RunArgs),
    /// Eventual-regularization parameter chain and sensitivities.
    Chain(RunArgs),
    /// Periodized-kernel / multiplier consistency table.
    VerifyKernel(RunArgs),
}

fn run(cli: Cli) -> sqglab::Result<String> {
    let threads = thread_cap()?;
    let args = match &cli.cmd {
        Cmd::Simulate(a)
        | Cmd::DualPair(a)
        | Cmd::HolderScan(a)
        | Cmd::Chain(a)
        | Cmd::VerifyKernel(a) => a,
    };
    let cfg = load_config(&args.config)?;
    std::fs::create_dir_all(&args.out).map_err(|source| sqglab::CliError::Io {
        path: args.out.display().to_string(),
        source,
    })?;
    // echo the full effective config so runs are reproducible from stdout
    let mut head = String::new();
    for line in cfg.echo().lines() {
        head.push_str("# ");
        head.push_str(line);
        head.push('\n');
    }
    head.push_str(&format!("# threads = {threads}\n"));
    let body = match &cli.cmd {
        Cmd::Simulate(_) => commands::run_simulate(&cfg, &args.out)?.to_string(),
        Cmd::DualPair(_) => commands::run_dual_pair(&cfg, &args.out)?.to_string(),
        Cmd::HolderScan(_) => commands::run_holder_scan(&cfg, &args.out)?.to_string(),
        Cmd::Chain(_) => commands::run_chain(&cfg, &args.out)?.to_string(),
        Cmd::VerifyKernel(_) => commands::run_verify_kernel(&cfg, &args.out)?.to_string(),
    };
    Ok(head + &body)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
