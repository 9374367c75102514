use clap::{Parser, Subcommand};
use setclr_cli::commands::{cmd_sweep, cmd_train, cmd_verify};
use setclr_cli::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "setclr", version, about = "Contrastive losses as assignment problems: checks and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the numerical self-check suites.
    Verify {
        /// Run only this suite.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Train every loss variant for every seed.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reuse a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Train the first loss variant across a grid of QARe weights.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated beta values (default 0,0.125,...,1.875).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        beta_grid: Option<Vec<f64>>,
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify { suite } => match cmd_verify(suite.as_deref(), &mut std::io::stdout()) {
            Ok(true) => Ok(()),
            Ok(false) => Err(CliError::Other("one or more suites failed".into())),
            Err(e) => Err(e),
        },
        Command::Train { config, out, force } => cmd_train(&config, out, force).map(|dir| {
            println!("wrote {}", dir.display());
        }),
        Command::Sweep { config, out, beta_grid, force } => cmd_sweep(&config, out, beta_grid, force).map(|dir| {
            println!("wrote {}", dir.display());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
