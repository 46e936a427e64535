//! Command line front end: parse an instance file, run one verb and write
//! `report.json` (plus `timings.json`) into the output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::Hooks;
use crate::config::{Instance, RawConfig};
use crate::error::{CliError, EXIT_FAIL, EXIT_PASS};
use crate::report::{RunReport, Verdict};

#[derive(Debug, Parser)]
#[command(
    name = "vlhardy",
    version,
    about = "Weighted Hardy and geometric-mean inequalities with variable limits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the characterization functional on the s-grid.
    Characterize(CommonArgs),
    /// Two-sided bounds on the best constant.
    Sandwich(CommonArgs),
    /// Norm estimate, witness chains and quadrant decomposition against the bounds.
    Verify(VerifyArgs),
    /// One report per parameter sample plus sweep.csv.
    Sweep(CommonArgs),
    /// Regenerate golden values from the brute-force implementations.
    OracleRegen(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "s-grid")]
    pub s_grid: Option<usize>,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Window as `eps,X`.
    #[arg(long)]
    pub window: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long = "corrupt-upper", hide = true)]
    pub corrupt_upper: bool,
}

impl CommonArgs {
    /// The config file with command line overrides applied.
    pub fn raw_config(&self) -> Result<RawConfig, CliError> {
        let mut raw = RawConfig::parse_file(&self.config)?;
        if let Some(seed) = self.seed {
            raw.set("seed", seed.to_string())?;
        }
        if let Some(n) = self.s_grid {
            raw.set("search.s_grid", n.to_string())?;
        }
        if let Some(n) = self.resolution {
            raw.set("search.resolution", n.to_string())?;
        }
        if let Some(w) = &self.window {
            let (eps, x) = w
                .split_once(',')
                .ok_or_else(|| CliError::Usage(format!("--window expects eps,X, got {w:?}")))?;
            raw.set("window.eps", eps.trim())?;
            raw.set("window.X", x.trim())?;
        }
        Ok(raw)
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn finish(out: &Path, report: &RunReport, timings: &report::Timings) -> Result<i32, CliError> {
    write_file(out, "report.json", &report.to_json())?;
    write_file(out, "timings.json", &timings.to_json())?;
    Ok(match report.verdict {
        Some(Verdict::Fail) => EXIT_FAIL,
        _ => EXIT_PASS,
    })
}

fn dispatch(cmd: &Command) -> Result<i32, CliError> {
    match cmd {
        Command::Characterize(a) => {
            let inst = Instance::from_raw(a.raw_config()?)?;
            let (r, t) = commands::characterize(&inst)?;
            finish(&a.out, &r, &t)
        }
        Command::Sandwich(a) => {
            let inst = Instance::from_raw(a.raw_config()?)?;
            let (r, t) = commands::sandwich(&inst)?;
            finish(&a.out, &r, &t)
        }
        Command::Verify(v) => {
            let inst = Instance::from_raw(v.common.raw_config()?)?;
            let (r, t) = commands::verify(
                &inst,
                Hooks {
                    corrupt_upper: v.corrupt_upper,
                },
            )?;
            finish(&v.common.out, &r, &t)
        }
        Command::Sweep(a) => {
            let raw = a.raw_config()?;
            let out = commands::sweep(&raw)?;
            let mut code = EXIT_PASS;
            for (name, report) in &out.samples {
                write_file(&a.out, name, &report.to_json())?;
                if report.verdict == Some(Verdict::Fail) {
                    code = EXIT_FAIL;
                }
            }
            write_file(&a.out, "sweep.csv", &commands::sweep_csv(&out.rows)?)?;
            write_file(&a.out, "timings.json", &out.timings.to_json())?;
            Ok(code)
        }
        Command::OracleRegen(a) => {
            let inst = Instance::from_raw(a.raw_config()?)?;
            let (golden, t) = commands::oracle_regen(&inst)?;
            let mut json = serde_json::to_string_pretty(&golden).expect("golden file serializes");
            json.push('\n');
            write_file(&a.out, "golden.json", &json)?;
            write_file(&a.out, "timings.json", &t.to_json())?;
            Ok(EXIT_PASS)
        }
    }
}

fn jobs(cmd: &Command) -> Option<usize> {
    match cmd {
        Command::Characterize(a) | Command::Sandwich(a) | Command::Sweep(a) | Command::OracleRegen(a) => a.jobs,
        Command::Verify(v) => v.common.jobs,
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match jobs(&cli.command) {
        Some(0) => Err(CliError::Usage("--jobs must be positive".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(CliError::Usage(format!("cannot start {n} workers: {e}"))),
        },
        None => dispatch(&cli.command),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("vlhardy: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                error::EXIT_USAGE
            } else {
                EXIT_PASS
            }
        }
    }
}
