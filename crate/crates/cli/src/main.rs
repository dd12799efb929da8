//! `cutcell-lab`: runs the benchmark studies from a config file.
//!
//! Exit codes: 0 success, 1 configuration error, 2 solver failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cutcell_core::config::{MethodKind, RunConfig, Study};
use cutcell_core::harness::run_study;
use cutcell_core::Error;

/// Output directory override.
const OUT_ENV: &str = "CUTCELL_OUT";

#[derive(Parser, Debug)]
#[command(name = "cutcell-lab", version, about = "Cut-cell quadrature and flow benchmark studies")]
struct Cli {
    #[command(subcommand)]
    study: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Quadrature volume oracles and cost curves.
    Quadrature(Common),
    /// Kovasznay convergence sweep.
    Kovasznay(Common),
    /// Flow past a square (steady or unsteady per config).
    Square(Common),
    /// Sprung square in the channel flow.
    Fsi(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Config file (`key = value` with sections).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides the config and the environment.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Adaptive levels, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "a,b,c")]
    levels: Option<Vec<u32>>,
    /// Cut-cell methods, comma separated.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<Method>>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    degree: Option<u8>,
    /// Write zeros in the timing columns.
    #[arg(long)]
    no_timings: bool,
    /// Suppress progress messages.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Method {
    St,
    Ai,
}

impl Command {
    fn parts(&self) -> (Study, &Common) {
        match self {
            Command::Quadrature(c) => (Study::Quadrature, c),
            Command::Kovasznay(c) => (Study::Kovasznay, c),
            Command::Square(c) => (Study::Square, c),
            Command::Fsi(c) => (Study::Fsi, c),
        }
    }
}

fn build_config(study: Study, args: &Common) -> Result<RunConfig, Error> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::new(study),
    };
    if config.study != study {
        return Err(Error::Config(format!(
            "config is for study \"{}\" but the subcommand is \"{}\"",
            config.study.as_str(),
            study.as_str()
        )));
    }
    if let Some(levels) = &args.levels {
        config.levels = levels.clone();
    }
    if let Some(methods) = &args.method {
        config.methods = methods
            .iter()
            .map(|m| match m {
                Method::St => MethodKind::St,
                Method::Ai => MethodKind::Ai,
            })
            .collect();
    }
    if let Some(d) = args.degree {
        config.degree = d as usize;
    }
    if args.no_timings {
        config.timings = false;
    }
    if let Some(dir) = args.out.clone().or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)) {
        config.output_dir = dir;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (study, args) = cli.study.parts();
    let level = if args.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info };
    env_logger::Builder::new().filter_level(level).format_target(false).init();

    let config = match build_config(study, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    println!("{}", config.to_text());
    match run_study(&config, &config.output_dir) {
        Ok((report, files)) => {
            print!("{}", report.summary().split("\n[config]").next().unwrap_or_default());
            println!("report: {}", files.csv.display());
            if report.has_failures() {
                eprintln!("error: {} row(s) failed; see the status column", report.rows.iter().filter(|r| r.failed()).count());
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
