//! Command-line front end.
//!
//! Exit status: 0 when every asserted, non-trivial check passes, 1 when one
//! fails, 2 for usage or configuration errors.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::convolution::convolution_path;
use crate::error::{Error, Result};
use crate::montecarlo::path_rng;
use crate::oracle::{kernel_antiderivative, oracle_poisson_moment};
use crate::prm::sample_prm;
use crate::verify::{run_suite, Suite, SuiteReport, Timing};

#[derive(Debug, Parser)]
#[command(name = "prm-maxreg", version, about = "Poisson stochastic convolutions and moment inequality checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one Poisson random measure realization as JSON lines.
    Sample(SampleArgs),
    /// Export one stochastic convolution path as CSV.
    Convolve(SampleArgs),
    /// Run a check suite and write report.json and manifest.json.
    Verify(VerifyArgs),
    /// Evaluate a reference value.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Run every suite and export a sample and a path.
    All(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of Monte-Carlo paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Worker cap; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value = "all", value_parser = clap::builder::PossibleValuesParser::new(Suite::NAMES))]
    pub suite: String,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Path index whose random stream is used.
    #[arg(long, default_value_t = 0)]
    pub index: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Exact `E|N − λ|^p` for `N ~ Poisson(λ)`.
    PoissonMoment {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        p: f64,
    },
    /// `∫_0^t (t − r + s)^{−α} dr` with `α = pq/(q − p)`.
    Kernel {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckStatus {
    pub id: String,
    pub pass: bool,
    pub trivial: bool,
    pub asserted: bool,
}

/// Run metadata; the only non-deterministic artifact (timings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub paths: usize,
    pub threads: usize,
    pub suite: Suite,
    pub checks: Vec<CheckStatus>,
    pub skipped: Vec<String>,
    pub timings: Vec<Timing>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn new(report: &SuiteReport, threads: usize, timings: Vec<Timing>) -> Self {
        Self {
            config_hash: report.config_hash.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: report.seed,
            paths: report.paths,
            threads,
            suite: report.suite,
            checks: report
                .checks
                .iter()
                .map(|c| CheckStatus {
                    id: c.id.clone(),
                    pass: c.pass,
                    trivial: c.trivial,
                    asserted: c.asserted,
                })
                .collect(),
            skipped: report.skipped.clone(),
            timings,
            outputs: vec!["report.json".into()],
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>, paths: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = paths {
        cfg.paths = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sample(args: &SampleArgs) -> Result<()> {
    let cfg = load_config(&args.config, args.seed, None)?;
    let exp = cfg.build()?;
    let atoms = sample_prm(&exp.nu, cfg.horizon, &mut path_rng(cfg.seed, args.index))?;
    let mut out = output(&args.out)?;
    atoms.write_jsonl(exp.nu.space(), &mut out)?;
    out.flush()?;
    Ok(())
}

fn convolve(args: &SampleArgs) -> Result<()> {
    let cfg = load_config(&args.config, args.seed, None)?;
    let exp = cfg.build()?;
    let atoms = sample_prm(&exp.nu, cfg.horizon, &mut path_rng(cfg.seed, args.index))?;
    let path = convolution_path(&exp.xi, &atoms, &exp.nu, &exp.gen, &exp.grid())?;
    let mut out = output(&args.out)?;
    path.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Runs a suite, writes the artifacts and returns whether a check failed.
fn verify(run: &RunArgs, suite: Suite, extra_outputs: &[String]) -> Result<bool> {
    let cfg = load_config(&run.config, run.seed, run.paths)?;
    let (report, timings) = run_suite(&cfg, suite, run.threads)?;
    fs::create_dir_all(&run.out_dir)?;
    write_json(&run.out_dir.join("report.json"), &report)?;
    let mut manifest = RunManifest::new(&report, run.threads, timings);
    manifest.outputs.extend(extra_outputs.iter().cloned());
    write_json(&run.out_dir.join("manifest.json"), &manifest)?;
    print!("{}", report.table());
    Ok(report.failed())
}

fn all(run: &RunArgs) -> Result<bool> {
    fs::create_dir_all(&run.out_dir)?;
    let sample_args = SampleArgs {
        config: run.config.clone(),
        seed: run.seed,
        index: 0,
        out: Some(run.out_dir.join("atoms.jsonl")),
    };
    sample(&sample_args)?;
    convolve(&SampleArgs {
        out: Some(run.out_dir.join("path.csv")),
        ..sample_args
    })?;
    verify(run, Suite::All, &["atoms.jsonl".into(), "path.csv".into()])
}

fn oracle(cmd: &OracleCommand) -> Result<()> {
    match *cmd {
        OracleCommand::PoissonMoment { lambda, p } => {
            println!("{}", oracle_poisson_moment(lambda, p)?.value);
        }
        OracleCommand::Kernel { t, s, p, q } => {
            if !(q > p && p > 1.0) {
                return Err(Error::Domain(format!("needs q > p > 1, got p={p}, q={q}")));
            }
            println!("{}", kernel_antiderivative(t, s, p * q / (q - p))?.value);
        }
    }
    Ok(())
}

/// Executes a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Sample(a) => sample(a).map(|_| false),
        Command::Convolve(a) => convolve(a).map(|_| false),
        Command::Verify(a) => Suite::parse(&a.suite).and_then(|s| verify(&a.run, s, &[])),
        Command::Oracle(c) => oracle(c).map(|_| false),
        Command::All(a) => all(a),
    };
    match outcome {
        Ok(false) => 0,
        Ok(true) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
