//! Command-line front end for `rfr-sabr`.
//!
//! Every command reads one JSON [`config::RunConfig`]. Nothing is written
//! until the whole command has succeeded, so a bad config never leaves a
//! partial output file behind.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod csvfmt;
pub mod error;
pub mod quotes;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::CurveSet;
use crate::config::RunConfig;
use crate::error::{CliError, EXIT_NUMERICAL, EXIT_OK};

#[derive(Debug, Parser)]
#[command(
    name = "rfr-sabr",
    version,
    about = "Backward-looking SABR caplet toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Price one caplet (`caplet` section of the config).
    Price(Common),
    /// Effective SABR parameters of the backward-looking caplet.
    EffectiveParams {
        #[command(flatten)]
        common: Common,
        /// Also recompute the parameters by quadrature.
        #[arg(long)]
        oracle: bool,
    },
    /// Analytic smile CSV over the strike grid.
    Smile {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "effective")]
        curves: CurveSet,
    },
    /// Monte-Carlo smile against the analytic one.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        /// Write the first trajectories to this CSV.
        #[arg(long)]
        dump_paths: Option<PathBuf>,
        /// Number of trajectories to dump.
        #[arg(long)]
        dump_count: Option<usize>,
    },
    /// Fit `(α, ρ, ν)` to forward quotes and `q` to a backward ATM quote.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Quote CSV with header strike,style,quote_kind,value,weight.
        #[arg(long)]
        quotes: PathBuf,
    },
    /// Power-law decay against the Hull-White decay on `[τ0, τ1]`.
    HwCompare(Common),
}

/// Everything a command emits, held back until it has succeeded.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    pub files: Vec<(PathBuf, String)>,
    pub exit_code: i32,
}

impl Output {
    fn primary(&mut self, out: &Option<PathBuf>, text: String) {
        match out {
            Some(p) => self.files.push((p.clone(), text)),
            None => self.stdout.push_str(&text),
        }
    }

    /// Writes files, then the streams. Returns the process exit code.
    pub fn emit(self) -> i32 {
        for (path, text) in &self.files {
            if let Err(source) = std::fs::write(path, text) {
                let e = CliError::Io {
                    path: path.clone(),
                    source,
                };
                eprintln!("{}", e.to_json());
                return e.exit_code();
            }
        }
        print!("{}", self.stdout);
        eprint!("{}", self.stderr);
        self.exit_code
    }
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Config(format!("json output: {e}")))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let mut out = Output::default();
    match &cli.command {
        Command::Price(c) => {
            let cfg = RunConfig::load(&c.config)?;
            let report = commands::cmd_price(&cfg)?;
            out.stdout = report.to_text();
            if let Some(p) = &c.out {
                out.files.push((p.clone(), json(&report)?));
            }
        }
        Command::EffectiveParams { common, oracle } => {
            let cfg = RunConfig::load(&common.config)?;
            let report = commands::cmd_effective_params(&cfg, *oracle)?;
            out.stdout = report.to_text();
            if let Some(p) = &common.out {
                out.files.push((p.clone(), json(&report)?));
            }
        }
        Command::Smile { common, curves } => {
            let cfg = RunConfig::load(&common.config)?;
            let csv = commands::cmd_smile(&cfg, *curves)?;
            out.primary(&common.out, csv);
        }
        Command::Simulate {
            common,
            seed,
            paths,
            dump_paths,
            dump_count,
        } => {
            let cfg = RunConfig::load(&common.config)?;
            let mut mc = cfg.mc;
            if let Some(s) = seed {
                mc.seed = *s;
            }
            if let Some(n) = paths {
                mc.n_paths = *n;
            }
            let dump = match (dump_paths, &cfg.path_dump) {
                (Some(file), cfg_dump) => Some((
                    file.clone(),
                    dump_count
                        .or(cfg_dump.as_ref().map(|d| d.count))
                        .unwrap_or_else(config::default_dump_count),
                )),
                (None, Some(d)) => Some((d.file.clone(), dump_count.unwrap_or(d.count))),
                (None, None) => None,
            };
            let sim = commands::cmd_simulate(&cfg, &mc, dump.as_ref().map(|d| d.1))?;
            out.primary(&common.out, sim.csv);
            if let (Some((file, _)), Some(text)) = (dump, sim.paths_csv) {
                out.files.push((file, text));
            }
            out.stderr = sim.summary + "\n";
        }
        Command::Calibrate { common, quotes } => {
            let cfg = RunConfig::load(&common.config)?;
            let text = read(quotes)?;
            let set = quotes::parse_quotes(&text, quotes, commands::quote_context(&cfg))?;
            let report = commands::cmd_calibrate(&cfg, &set)?;
            out.stdout = report.to_text();
            if let Some(p) = &common.out {
                out.files.push((p.clone(), json(&report)?));
            }
            if !report.converged() {
                out.stderr = "calibration did not reach its tolerance\n".into();
                out.exit_code = EXIT_NUMERICAL;
            }
        }
        Command::HwCompare(c) => {
            let cfg = RunConfig::load(&c.config)?;
            let hw = commands::cmd_hw_compare(&cfg)?;
            out.primary(&c.out, hw.csv);
            out.stderr = hw.summary + "\n";
        }
    }
    if out.exit_code == 0 {
        out.exit_code = EXIT_OK;
    }
    Ok(out)
}
