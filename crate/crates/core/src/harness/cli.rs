//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime failure or failed self-check,
//! 2 bad arguments or configuration.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::ExperimentConfig;
use super::metrics::read_rounds;
use super::output::{manifest_for, output_root, write_run_dir, SweepInfo};
use super::plot::{summarize, write_series};
use super::sweep::{run_sweep, SweepParam};
use super::validate::run_checks;
use crate::error::Error;
use crate::fl::experiment::Experiment;

#[derive(Debug, Parser)]
#[command(name = "fedcpu", version, about = "Over-the-air federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every scheme and seed of one config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run directory; defaults to <output root>/<experiment name>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the config once per value of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// M, rho or scheme.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in oracle checks; with --config, also validate the file.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Collapse one or more rounds.csv files into mean and stderr series.
    EmitPlotData {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a complete config with defaults filled in.
    PrintConfig {
        /// Use the reduced desk-scale preset.
        #[arg(long)]
        desk: bool,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn run_dir(cfg: &ExperimentConfig, out: Option<PathBuf>, suffix: &str) -> PathBuf {
    out.unwrap_or_else(|| output_root(cfg).join(format!("{}{suffix}", cfg.experiment.name)))
}

fn dispatch(cmd: Command) -> Result<i32, Failure> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let exp = Experiment::new(cfg.clone())?;
            let rows = exp.run_all()?;
            let dir = run_dir(&cfg, out, "");
            let s2 = exp.lattice.second_moment()?;
            write_run_dir(&dir, &rows, &manifest_for(&cfg, command_line(), None, vec![s2], rows.len()))?;
            println!("wrote {} rows to {}", rows.len(), dir.display());
            Ok(0)
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let p: SweepParam = param.parse()?;
            let res = run_sweep(&cfg, p, &values)?;
            let dir = run_dir(&cfg, out, &format!("-sweep-{p}"));
            let info = SweepInfo {
                param: p.to_string(),
                values,
            };
            let manifest = manifest_for(&cfg, command_line(), Some(info), res.second_moments, res.rows.len());
            write_run_dir(&dir, &res.rows, &manifest)?;
            println!("wrote {} rows to {}", res.rows.len(), dir.display());
            Ok(0)
        }
        Command::Validate { config } => {
            let rho = match &config {
                Some(p) => {
                    let c = ExperimentConfig::load(p)?;
                    println!("config ok: {}", p.display());
                    c.lattice.rho
                }
                None => 1.0,
            };
            let checks = run_checks(rho)?;
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            Ok(if ok { 0 } else { 1 })
        }
        Command::EmitPlotData { inputs, out } => {
            let mut rows = Vec::new();
            for p in &inputs {
                rows.extend(read_rounds(open(p)?)?);
            }
            let series = summarize(&rows);
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(Error::from)?;
            }
            write_series(BufWriter::new(File::create(&out).map_err(Error::from)?), &series)?;
            println!("wrote {} series points to {}", series.len(), out.display());
            Ok(0)
        }
        Command::PrintConfig { desk } => {
            let c = if desk {
                ExperimentConfig::desk()
            } else {
                ExperimentConfig::default()
            };
            print!("{}", c.to_toml_string());
            Ok(0)
        }
    }
}

fn open(p: &Path) -> Result<File, Failure> {
    File::open(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_cli(["fedcpu", "frobnicate"]), 2);
        assert_eq!(run_cli(["fedcpu", "sweep", "--config", "x.toml"]), 2);
    }

    #[test]
    fn missing_config_exits_two() {
        assert_eq!(run_cli(["fedcpu", "run", "--config", "/nonexistent/x.toml"]), 2);
    }

    #[test]
    fn bad_config_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.toml");
        std::fs::write(&p, "[training]\nbatch = 0\n").unwrap();
        assert_eq!(run_cli(["fedcpu".as_ref(), "run".as_ref(), "--config".as_ref(), p.as_os_str()]), 2);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run_cli(["fedcpu", "--help"]), 0);
    }
}
