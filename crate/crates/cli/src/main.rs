use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use convexnet::geometry::Kind;
use convexnet_cli::{ConfigError, ExperimentConfig, ShapeFormat, UnsupportedExport};

/// Exit code for malformed configs and unsupported requests.
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "convexnet", version, about = "Shape experiments with sublinear networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's `output` key).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config file and print it with all defaults filled in.
    Validate { config: PathBuf },
    /// Write the boundary of a saved net as csv/svg (2D) or obj (3D).
    Export {
        net: PathBuf,
        format: String,
        /// Read the net as `gauge` or `support` (default: the kind stored in the file).
        #[arg(long)]
        kind: Option<String>,
        /// Points (2D) or latitude rings (3D).
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn fail(err: anyhow::Error) -> ExitCode {
    eprintln!("error: {err:#}");
    if err.downcast_ref::<ConfigError>().is_some() || err.downcast_ref::<UnsupportedExport>().is_some() {
        ExitCode::from(USAGE)
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => match convexnet_cli::execute(&config, out.as_deref()) {
            Ok((dir, output)) => {
                print!("{}", output.metrics.to_text());
                eprintln!("outputs written to {}", dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Validate { config } => match ExperimentConfig::from_path(&config) {
            Ok(c) => {
                print!("{}", c.resolved());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprint!("{e}");
                ExitCode::from(USAGE)
            }
        },
        Command::Export { net, format, kind, resolution, output } => {
            let Some(format) = ShapeFormat::parse(&format) else {
                eprintln!("error: unknown format `{format}` (csv, svg or obj)");
                return ExitCode::from(USAGE);
            };
            let kind = match kind.as_deref().map(Kind::parse).transpose() {
                Ok(k) => k,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(USAGE);
                }
            };
            match convexnet_cli::export_file(&net, format, kind, resolution, output.as_deref()) {
                Ok(path) => {
                    eprintln!("wrote {}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
