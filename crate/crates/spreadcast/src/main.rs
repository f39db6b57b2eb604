use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spreadcast::commands::{cmd_ingest, cmd_report, cmd_run, format_summary};
use spreadcast::config::{parse_models, parse_regions, RunConfig};
use spreadcast::error::{Error, EXIT_OK, EXIT_USAGE};

/// Per-region epidemic forecasting with DSPM, NRM and an SVR baseline.
#[derive(Parser, Debug)]
#[command(name = "spreadcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a dataset, print a summary and write a normalised copy.
    Ingest(Common),
    /// Train, forecast and evaluate every selected region.
    Run(Common),
    /// Rebuild the report from a forecasts file (`--input`, default `<out>/forecasts.csv`).
    Report(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// key=value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// long or wide
    #[arg(long)]
    layout: Option<String>,
    /// Comma-separated subset of dspm, nrm, svr.
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Semicolon-separated `Country` or `Country/Province` names.
    #[arg(long)]
    regions: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = &self.layout {
            cfg.layout = v.parse()?;
        }
        if let Some(v) = &self.models {
            cfg.models = parse_models(v)?;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = &self.regions {
            let regions = parse_regions(v)?;
            if regions.is_empty() {
                return Err(Error::Usage("--regions names no region".into()));
            }
            cfg.regions = Some(regions);
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        Ok(cfg)
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Ingest(common) => {
            let cfg = common.resolve()?;
            let summary = cmd_ingest(&cfg)?;
            print!("{}", summary.to_text());
        }
        Command::Run(common) => {
            let cfg = common.resolve()?;
            let outcome = cmd_run(&cfg)?;
            for o in &outcome.outcomes {
                for (m, msg) in &o.failures {
                    eprintln!("warning: {} failed for {}: {msg}", m.label(), o.key);
                }
            }
            print!("{}", format_summary(&outcome.report));
            println!("outputs written to {}", outcome.out_dir.display());
        }
        Command::Report(common) => {
            let cfg = common.resolve()?;
            let report = cmd_report(&cfg, common.input.as_deref())?;
            print!("{}", format_summary(&report));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
