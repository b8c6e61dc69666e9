//! Command-line surface. Every flag can also be set through an environment
//! variable with the `MDIQKD_` prefix (`MDIQKD_CONFIG`, `MDIQKD_SEED`,
//! `MDIQKD_OUT`, `MDIQKD_EPSILON`, `MDIQKD_PAIRS`); flags win over the
//! environment, which wins over the scenario file.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands;
use crate::config::ScenarioConfig;
use crate::counts_csv::{load_counts, save_counts};
use crate::error::{AppError, Result};
use crate::report::{self, Table};

#[derive(Debug, Parser)]
#[command(name = "mdiqkd", version, about = "Misalignment-tolerant MDI-QKD key-rate analysis")]
pub struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true, env = "MDIQKD_CONFIG")]
    pub config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, env = "MDIQKD_SEED")]
    pub seed: Option<u64>,
    /// Output directory for CSV files.
    #[arg(long, global = true, env = "MDIQKD_OUT")]
    pub out: Option<PathBuf>,
    /// Total failure probability of the finite-key estimate.
    #[arg(long, global = true, env = "MDIQKD_EPSILON")]
    pub epsilon: Option<f64>,
    /// Number of pulse pairs.
    #[arg(long, global = true, env = "MDIQKD_PAIRS")]
    pub pairs: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Phase error against test-basis misalignment (single photons, honest relay).
    Figure1,
    /// Asymptotic key rate against fiber length for four misalignment scenarios.
    Figure2,
    /// Key rates from the recorded experimental inputs, and the simulated reference case.
    ReproduceTables,
    /// Finite-key analysis of a counts CSV.
    Estimate {
        /// Counts file with columns l_index, r_index, n, m, N_sent, n_success.
        #[arg(long)]
        counts: PathBuf,
    },
    /// Search the source parameters for the highest finite-key rate.
    Optimize,
    /// Sample a counts CSV for the configured scenario.
    Simulate,
    /// Print the effective scenario as TOML.
    ShowConfig,
}

impl Cli {
    /// Scenario file merged with flag and environment overrides.
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if let Some(e) = self.epsilon {
            cfg.finite.epsilon_total = e;
        }
        if let Some(n) = self.pairs {
            cfg.finite.total_pairs = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_path(cfg: &ScenarioConfig, name: &str) -> Result<PathBuf> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    Ok(dir.join(name))
}

fn write_table(cfg: &ScenarioConfig, name: &str, t: &Table, log: &mut impl Write) -> Result<PathBuf> {
    let p = out_path(cfg, name)?;
    t.write(&p)?;
    say(log, &format!("wrote {}\n", p.display()))?;
    Ok(p)
}

fn say(log: &mut impl Write, text: &str) -> Result<()> {
    log.write_all(text.as_bytes()).map_err(|e| AppError::io("<stdout>", e))
}

/// Runs one command, writing the report to `log`. A finished analysis
/// without key is reported as [`AppError::NoKey`] after its output is written.
pub fn run(cli: &Cli, log: &mut impl Write) -> Result<()> {
    let cfg = cli.scenario()?;
    match &cli.command {
        Command::Figure1 => {
            let rows = commands::figure1(&cfg)?;
            say(log, &report::render_figure1(&rows))?;
            write_table(&cfg, "figure1.csv", &report::figure1_table(&rows), log)?;
        }
        Command::Figure2 => {
            let rows = commands::figure2(&cfg)?;
            say(log, &report::render_figure2(&rows))?;
            write_table(&cfg, "figure2.csv", &report::figure2_table(&rows), log)?;
        }
        Command::ReproduceTables => {
            let rep = commands::reproduce_tables(&cfg)?;
            say(log, &report::render_tables(&rep))?;
            write_table(&cfg, "tables.csv", &report::tables_table(&rep), log)?;
            write_table(&cfg, "tables_model_bounds.csv", &report::bounds_table(&rep.model), log)?;
            write_table(&cfg, "tables_model_summary.csv", &report::summary_table(&rep.model), log)?;
        }
        Command::Estimate { counts } => {
            let tensor = load_counts(counts)?;
            let est = commands::estimate(&tensor, &cfg)?;
            say(log, &report::render_estimate(&est))?;
            write_table(&cfg, "estimate_bounds.csv", &report::bounds_table(&est), log)?;
            write_table(&cfg, "estimate_summary.csv", &report::summary_table(&est), log)?;
            if !est.has_key() {
                return Err(AppError::NoKey { key_rate: est.key_rate });
            }
        }
        Command::Optimize => {
            let res = commands::optimize(&cfg)?;
            say(log, &report::render_optimization(&res))?;
            write_table(&cfg, "optimize_best.csv", &report::best_table(&res), log)?;
            write_table(&cfg, "optimize_trace.csv", &report::trace_table(&res), log)?;
            if res.no_key {
                return Err(AppError::NoKey { key_rate: res.key_rate });
            }
        }
        Command::Simulate => {
            let tensor = commands::simulate(&cfg)?;
            let p = out_path(&cfg, "counts.csv")?;
            save_counts(&tensor, &p)?;
            say(
                log,
                &format!(
                    "sampled {} cells from {} pulse pairs (seed {})\nwrote {}\n",
                    tensor.len(),
                    tensor.total_sent(),
                    cfg.seed,
                    p.display()
                ),
            )?;
        }
        Command::ShowConfig => say(log, &cfg.to_toml()?)?,
    }
    Ok(())
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with<I, T>(args: I, log: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { crate::error::exit::CONFIG } else { crate::error::exit::OK };
        }
    };
    match run(&cli, log) {
        Ok(()) => crate::error::exit::OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
