use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gp_precision::experiment::{cmd_bench, cmd_estimate, cmd_scaling_study, cmd_simulate, cmd_verify, CommandOutput, ExperimentConfig};

#[derive(Parser)]
#[command(name = "gp-precision", about = "Precision and Cholesky-factor estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write truth matrices, sites and sample files into --out.
    Simulate(Opts),
    /// Estimate once per (p, n, seed) and emit CSV rows.
    Estimate(Opts),
    /// Estimation grid plus median errors and fitted log-log slopes.
    ScalingStudy(Opts),
    /// Run the property suites; exits nonzero if any fails.
    Verify(Opts),
    /// Estimation grid with wall-clock timings.
    Bench(Opts),
}

#[derive(Args)]
struct Opts {
    /// key=value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// laplacian, green or matern.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    d: Option<String>,
    /// Comma list of lattice sizes (sites per axis with --scattered).
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    s: Option<String>,
    /// Comma list of sample counts.
    #[arg(long)]
    n: Option<String>,
    /// Comma list of distinct seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    c1: Option<String>,
    /// Fixed block width.
    #[arg(long)]
    b: Option<String>,
    /// Condition number for the block-size rule.
    #[arg(long)]
    kappa: Option<String>,
    /// precision, cholesky or cholesky-star.
    #[arg(long)]
    factor: Option<String>,
    #[arg(long)]
    scattered: bool,
    /// Output file (directory for simulate); stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-row estimate and reference matrices.
    #[arg(long)]
    matrices: Option<PathBuf>,
    /// Record wall-clock times in estimate and scaling-study.
    #[arg(long)]
    timing: bool,
    /// Comma list of verification suites.
    #[arg(long)]
    suite: Option<String>,
    /// Negative control for the symmetry suite.
    #[arg(long)]
    inject_asymmetric: bool,
}

impl Opts {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut v = Vec::new();
        let mut put = |k: &str, x: &Option<String>| {
            if let Some(x) = x {
                v.push((k.to_string(), x.clone()));
            }
        };
        put("model", &self.model);
        put("d", &self.d);
        put("p", &self.p);
        put("s", &self.s);
        put("n", &self.n);
        put("seeds", &self.seeds);
        put("c1", &self.c1);
        put("b", &self.b);
        put("kappa", &self.kappa);
        put("factor", &self.factor);
        put("suite", &self.suite);
        for (k, on) in [("scattered", self.scattered), ("timing", self.timing), ("inject_asymmetric", self.inject_asymmetric)] {
            if on {
                v.push((k.to_string(), "true".to_string()));
            }
        }
        for (k, p) in [("out", &self.out), ("matrices", &self.matrices)] {
            if let Some(p) = p {
                v.push((k.to_string(), p.display().to_string()));
            }
        }
        v
    }
}

fn emit(config: &ExperimentConfig, out: &CommandOutput) -> gp_precision::Result<()> {
    match &config.out {
        Some(path) => fs::write(path, &out.text)?,
        None => print!("{}", out.text),
    }
    Ok(())
}

fn run(cli: Cli) -> gp_precision::Result<usize> {
    let (opts, command) = match &cli.command {
        Command::Simulate(o) => (o, "simulate"),
        Command::Estimate(o) => (o, "estimate"),
        Command::ScalingStudy(o) => (o, "scaling-study"),
        Command::Verify(o) => (o, "verify"),
        Command::Bench(o) => (o, "bench"),
    };
    let config = ExperimentConfig::load(opts.config.as_deref(), &opts.overrides())?;
    let out = match command {
        "simulate" => {
            let dir = config
                .out
                .clone()
                .ok_or_else(|| gp_precision::Error::InvalidInput("out: simulate needs an output directory".into()))?;
            for path in cmd_simulate(&config, &dir)? {
                println!("{}", path.display());
            }
            return Ok(0);
        }
        "estimate" => cmd_estimate(&config)?,
        "scaling-study" => cmd_scaling_study(&config)?,
        "verify" => {
            let (reports, out) = cmd_verify(&config)?;
            for r in reports.iter().filter(|r| !r.passed) {
                eprintln!("suite failed: {r}");
            }
            out
        }
        _ => cmd_bench(&config)?,
    };
    emit(&config, &out)?;
    Ok(out.failures)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} failure(s)");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
