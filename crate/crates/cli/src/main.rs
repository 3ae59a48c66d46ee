//! `wonderboom`: calibrate, plan, simulate, analyze and compare tree-based
//! vote aggregation.
//!
//! Exit codes: 0 on success, 1 on a configuration or usage error, 2 when a
//! run breaks a protocol invariant.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{CommonFlags, FileConfig, Mode, OracleMode, SimFlags};
use output::OutDir;

#[derive(Debug, Parser)]
#[command(name = "wonderboom", version, about = "Tree-based BLS vote aggregation: calibration, planning, simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Time the crypto primitives and write a cost model.
    Bench {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        sim: SimFlags,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Build an epoch of aggregation trees and summarize their shape.
    Plan {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        sim: SimFlags,
    },
    /// Run slots or whole epochs with real nodes.
    Simulate {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        sim: SimFlags,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Also run the flat baseline at every point.
        #[arg(long)]
        baseline: bool,
    },
    /// Evaluate the closed-form security and resilience figures.
    Analyze {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        analyze: AnalyzeFlags,
    },
    /// Tree against flat baseline at every sweep point.
    Compare {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        sim: SimFlags,
    },
}

#[derive(Debug, Args)]
struct AnalyzeFlags {
    #[arg(long)]
    n: Option<u64>,
    /// Faulty validators; defaults to N/3.
    #[arg(long)]
    f: Option<u64>,
    #[arg(long)]
    m: Option<u64>,
    /// Reward window in slots.
    #[arg(long)]
    k: Option<u32>,
    /// Window lengths for the curve: "a..b" inclusive or a comma list.
    #[arg(long)]
    k_range: Option<String>,
    #[arg(long, value_enum)]
    oracle: Option<OracleMode>,
}

/// A failure before any run started.
#[derive(Debug)]
struct ConfigError(anyhow::Error);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(e: anyhow::Error) -> anyhow::Error {
    ConfigError(e).into()
}

fn load(common: &CommonFlags) -> Result<FileConfig> {
    match &common.config {
        Some(p) => config::load(p).map_err(config_err),
        None => Ok(FileConfig::default()),
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (name, common, mut cfg) = match &cli.command {
        Command::Bench { common, sim, iterations, samples } => {
            let mut cfg = load(common)?;
            config::apply(&mut cfg, common, sim).map_err(config_err)?;
            if let Some(i) = iterations {
                cfg.bench.iterations = *i;
            }
            if let Some(s) = samples {
                cfg.bench.samples = *s;
            }
            ("bench", common, cfg)
        }
        Command::Plan { common, sim } | Command::Compare { common, sim } => {
            let mut cfg = load(common)?;
            config::apply(&mut cfg, common, sim).map_err(config_err)?;
            let name = if matches!(cli.command, Command::Plan { .. }) { "plan" } else { "compare" };
            (name, common, cfg)
        }
        Command::Simulate { common, sim, mode, baseline } => {
            let mut cfg = load(common)?;
            config::apply(&mut cfg, common, sim).map_err(config_err)?;
            if let Some(m) = mode {
                cfg.simulate.mode = *m;
            }
            cfg.simulate.baseline |= baseline;
            ("simulate", common, cfg)
        }
        Command::Analyze { common, analyze } => {
            let mut cfg = load(common)?;
            config::apply(&mut cfg, common, &SimFlags::default()).map_err(config_err)?;
            let a = &mut cfg.analyze;
            if let Some(n) = analyze.n {
                a.n = n;
            }
            if analyze.f.is_some() {
                a.f = analyze.f;
            }
            if let Some(m) = analyze.m {
                a.m = m;
            }
            if let Some(k) = analyze.k {
                a.k = k;
            }
            if let Some(r) = &analyze.k_range {
                a.k_range = r.clone();
            }
            if analyze.oracle.is_some() {
                a.oracle = analyze.oracle;
            }
            config::parse_k_range(&a.k_range).map_err(config_err)?;
            ("analyze", common, cfg)
        }
    };

    if matches!(name, "plan" | "simulate" | "compare") {
        commands::ensure_cost_model(&mut cfg);
        for p in commands::sweep_points(&cfg) {
            p.validate().context("invalid simulation settings").map_err(config_err)?;
        }
    }
    if matches!(name, "simulate" | "compare") {
        let ns: Vec<usize> = commands::sweep_points(&cfg).iter().map(|p| p.n).collect();
        config::check_large(&ns, common.large).map_err(config_err)?;
    }

    let mut out = OutDir::create(&common.out_dir).map_err(config_err)?;
    match name {
        "bench" => commands::bench::run(&cfg, &mut out)?,
        "plan" => commands::plan::run(&cfg, &mut out)?,
        "simulate" => commands::simulate::run(&cfg, &mut out)?,
        "compare" => commands::compare::run(&cfg, &mut out)?,
        _ => commands::analyze::run(&cfg, &mut out)?,
    }
    let manifest = out.finish(name, &cfg, common.large)?;
    eprintln!("wrote {}", manifest.display());
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.chain().any(|c| matches!(c.downcast_ref(), Some(wonderboom_core::Error::Invariant(_)))) {
        return 2;
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariant_violations_exit_two() {
        let inv: anyhow::Error = wonderboom_core::Error::Invariant("x".into()).into();
        assert_eq!(exit_code(&inv), 2);
        assert_eq!(exit_code(&inv.context("while simulating")), 2);
        let arg: anyhow::Error = wonderboom_core::Error::InvalidArgument("x".into()).into();
        assert_eq!(exit_code(&arg), 1);
        let hidden = config_err(wonderboom_core::Error::Invariant("x".into()).into());
        assert_eq!(exit_code(&hidden), 1);
    }
}
