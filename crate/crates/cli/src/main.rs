use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use kansa::experiment::{preset, run_experiment, write_report, ExperimentConfig};
use kansa::solvers::WeightConvention;

/// Kernel collocation convergence studies.
#[derive(Debug, Parser)]
#[command(name = "kansa", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the study described by a JSON config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print a built-in study config, or run it when --print is absent.
    Preset {
        name: String,
        /// Print the config as JSON instead of running it.
        #[arg(long)]
        print: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Flags that take precedence over the config file.
#[derive(Debug, Args)]
struct Overrides {
    /// Output directory for the CSV and summary.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of cells solved concurrently.
    #[arg(long)]
    jobs: Option<usize>,
    /// Exclude the finest k levels from rate fits.
    #[arg(long)]
    fit_drop_last: Option<usize>,
    /// How the boundary weight enters the stacked system.
    #[arg(long, value_parser = parse_convention)]
    weight_convention: Option<WeightConvention>,
    /// Relative singular-value cutoff.
    #[arg(long)]
    rcond: Option<f64>,
    /// Write NA instead of wall-clock solve times.
    #[arg(long)]
    no_timing: bool,
}

fn parse_convention(s: &str) -> Result<WeightConvention, String> {
    s.parse().map_err(|e: kansa::KansaError| e.to_string())
}

impl Overrides {
    fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(out) = &self.out {
            config.output = Some(out.clone());
        }
        if let Some(jobs) = self.jobs {
            config.jobs = jobs;
        }
        if let Some(k) = self.fit_drop_last {
            config.fit_drop_last = k;
        }
        if let Some(c) = self.weight_convention {
            config.weight_convention = c;
        }
        if self.rcond.is_some() {
            config.rcond = self.rcond;
        }
        if self.no_timing {
            config.record_timing = false;
        }
    }
}

fn run(mut config: ExperimentConfig, overrides: &Overrides) -> Result<bool> {
    overrides.apply(&mut config);
    config.validate()?;
    let study = run_experiment(&config)?;
    let dir = config.output.clone().unwrap_or_else(|| PathBuf::from("results"));
    let csv = write_report(&study, &config, &dir)
        .with_context(|| format!("writing results to {}", dir.display()))?;
    print!("{}", study.summary());
    eprintln!("wrote {}", csv.display());
    Ok(study.all_solved())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, overrides } => ExperimentConfig::from_path(&config)
            .with_context(|| format!("loading {}", config.display()))
            .and_then(|c| run(c, &overrides)),
        Command::Preset {
            name,
            print,
            overrides,
        } => preset(&name).map_err(Into::into).and_then(|mut c| {
            if print {
                overrides.apply(&mut c);
                println!("{}", c.to_json()?);
                Ok(true)
            } else {
                run(c, &overrides)
            }
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error!("some cells failed; see the status column");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
