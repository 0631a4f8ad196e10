//! Command-line front end for `crane-sim`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use crate::output;
use crate::scenario::{self, ScenarioError};
use crate::sim::{self, ScenarioConfig, SimError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SIM_FAULT: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "crane-sim",
    version,
    about = "Overhead crane sliding-mode control simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write telemetry, metrics and resolved config.
    Run {
        #[command(flatten)]
        input: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
        /// Skip the linearized stability gate (for probing bad gain sets).
        #[arg(long)]
        skip_stability_check: bool,
    },
    /// Run a scenario with and without the fuzzy compensator.
    Compare {
        #[command(flatten)]
        input: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check gains against the linearized closed loop at each operating point.
    Validate {
        #[command(flatten)]
        input: ScenarioArgs,
    },
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario TOML file.
    pub scenario: PathBuf,
    /// `section.key=value`, applied after the file. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// RNG seed; takes precedence over the file and overrides.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ScenarioArgs {
    pub fn load(&self) -> Result<ScenarioConfig, ScenarioError> {
        let mut config = scenario::load(&self.scenario, &self.overrides)?;
        if let Some(seed) = self.seed {
            config.rng_seed = seed;
        }
        Ok(config)
    }
}

fn sim_exit(e: &SimError) -> u8 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_SIM_FAULT
    }
}

fn load_or_report(input: &ScenarioArgs) -> Result<ScenarioConfig, u8> {
    input.load().map_err(|e| {
        error!("{}: {e}", input.scenario.display());
        EXIT_CONFIG
    })
}

fn write_or_report(dir: &Path, config: &ScenarioConfig, log: &sim::RunLog) -> Result<(), u8> {
    output::write_run(dir, config, log).map_err(|e| {
        error!("writing {}: {e}", dir.display());
        EXIT_SIM_FAULT
    })
}

fn cmd_run(input: &ScenarioArgs, out: &Path, skip_check: bool) -> Result<(), u8> {
    let config = load_or_report(input)?;
    let result = if skip_check {
        sim::simulate(&config)
    } else {
        sim::run(&config)
    };
    let log = result.map_err(|e| {
        error!("{e}");
        sim_exit(&e)
    })?;
    write_or_report(out, &config, &log)?;
    info!("wrote {} records to {}", log.records.len(), out.display());
    Ok(())
}

fn cmd_compare(input: &ScenarioArgs, out: &Path) -> Result<(), u8> {
    let mut fuzzy = load_or_report(input)?;
    fuzzy.fuzzy.enabled = true;
    let plain = ScenarioConfig {
        fuzzy: sim::FuzzyConfig {
            enabled: false,
            ..fuzzy.fuzzy
        },
        ..fuzzy.clone()
    };
    let report = sim::compare(&fuzzy, &plain).map_err(|e| {
        error!("{e}");
        sim_exit(&e)
    })?;
    write_or_report(&out.join("fuzzy"), &fuzzy, &report.log_a)?;
    write_or_report(&out.join("plain"), &plain, &report.log_b)?;
    File::create(out.join("compare.txt"))
        .and_then(|f| output::write_compare(BufWriter::new(f), &report, "fuzzy", "plain"))
        .map_err(|e| {
            error!("writing compare.txt: {e}");
            EXIT_SIM_FAULT
        })?;
    if let Some(r) = report.ratio("rms_error_x") {
        info!("rms_error_x fuzzy/plain = {r:.4}");
    }
    Ok(())
}

fn cmd_validate(input: &ScenarioArgs) -> Result<(), u8> {
    let config = load_or_report(input)?;
    config.validate().map_err(|e| {
        error!("{e}");
        EXIT_CONFIG
    })?;
    let reports = config.stability_reports().map_err(|e| {
        error!("{e}");
        EXIT_CONFIG
    })?;
    let mut passed = true;
    for report in &reports {
        print!("{report}");
        passed &= report.passed();
    }
    println!("{}", if passed { "PASS" } else { "FAIL" });
    if passed {
        Ok(())
    } else {
        Err(EXIT_CHECK_FAILED)
    }
}

pub fn execute(cli: &Cli) -> ExitCode {
    let result = match &cli.command {
        Command::Run {
            input,
            out,
            skip_stability_check,
        } => cmd_run(input, out, *skip_stability_check),
        Command::Compare { input, out } => cmd_compare(input, out),
        Command::Validate { input } => cmd_validate(input),
    };
    ExitCode::from(result.err().unwrap_or(EXIT_OK))
}
