//! `capnorm`: content, norms, operators and verification experiments from
//! the command line.
//!
//! Exit codes: 0 success, 1 an experiment verdict failed, 2 usage, config or
//! input error.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use capnorm::choquet::{distribution, lebesgue_distribution, LorentzQ};
use capnorm::content::{dyadic_content, ContentParams};
use capnorm::grid::{CellSet, GridFunction};
use capnorm::interp::{interpolation_norm, InterpPair};
use capnorm::operators::{maximal, riesz, MaximalParams, RieszParams};
use capnorm::verify::{self, ExperimentReport, SelftestConfig};

#[derive(Parser)]
#[command(name = "capnorm", version, about = "Choquet–Lorentz norms on dyadic grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dyadic Hausdorff content of a cell set.
    Content {
        /// CellSet JSON file.
        #[arg(long = "set")]
        set: PathBuf,
        #[arg(long)]
        delta: f64,
        /// Write the optimal cover as JSON.
        #[arg(long)]
        cover_out: Option<PathBuf>,
    },
    /// Choquet–Lorentz quasi-norm of a grid function.
    Norm {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        p: f64,
        /// Second index, a number or `inf`; defaults to `p`.
        #[arg(long)]
        q: Option<LorentzQ>,
        /// Use the dyadic-sum form.
        #[arg(long)]
        dyadic: bool,
        /// Use Lebesgue measure instead of the content.
        #[arg(long)]
        lebesgue: bool,
    },
    /// Fractional maximal function `M_mu f`.
    Maximal {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        mu: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Riesz potential `I_alpha f`.
    Riesz {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// K-functional and interpolation norm for the pair `(L^p0, L^p1)`.
    Interp {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        p0: f64,
        #[arg(long)]
        p1: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Run a named experiment and emit its report.
    Verify {
        /// One of the experiment names listed by `--list`.
        #[arg(required_unless_present = "list")]
        experiment: Option<String>,
        /// TOML config; missing keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config key, e.g. `--set depths=[4,5,6]`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write the series as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Print the experiment names.
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Oracle-equivalence and identity suite.
    Selftest {
        #[arg(long, default_value_t = SelftestConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = SelftestConfig::default().samples)]
        samples: usize,
    },
}

#[derive(Args)]
struct OutArgs {
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Ok,
    VerdictFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerdictFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_function(path: &Path) -> Result<GridFunction> {
    GridFunction::from_json(&read(path)?).with_context(|| format!("invalid grid function {}", path.display()))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n"))
            .with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").context("cannot write to stdout")
        }
    }
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn report_outcome(report: &ExperimentReport) -> Outcome {
    if report.verdict.pass {
        Outcome::Ok
    } else {
        eprintln!("verdict failed: {}", report.verdict.detail);
        Outcome::VerdictFailed
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Content {
            set,
            delta,
            cover_out,
        } => {
            let cells = CellSet::from_json(&read(&set)?)
                .with_context(|| format!("invalid cell set {}", set.display()))?;
            let solution = dyadic_content(&cells, &ContentParams::new(delta))?;
            if let Some(path) = &cover_out {
                emit(&solution.to_json()?, Some(path))?;
            }
            let doc = json!({
                "delta": delta,
                "value": solution.value,
                "cover_size": solution.cover.len(),
            });
            emit(&pretty(&doc)?, None)?;
        }
        Command::Norm {
            function,
            delta,
            p,
            q,
            dyadic,
            lebesgue,
        } => {
            let f = read_function(&function)?;
            let q = q.unwrap_or(LorentzQ::Finite(p));
            let dist = if lebesgue {
                lebesgue_distribution(&f)
            } else {
                distribution(&f, delta)?
            };
            let norm = if dyadic {
                dist.lorentz_dyadic(p, q)?
            } else {
                dist.lorentz(p, q)?
            };
            let doc = json!({
                "inputs": {"delta": delta, "p": p, "q": q, "dyadic": dyadic, "lebesgue": lebesgue},
                "norm": norm,
                "distribution": dist,
            });
            emit(&pretty(&doc)?, None)?;
        }
        Command::Maximal { function, mu, out } => {
            let f = read_function(&function)?;
            let m = maximal(&f, &MaximalParams::new(mu))?;
            emit(&m.to_json()?, out.out.as_deref())?;
        }
        Command::Riesz {
            function,
            alpha,
            out,
        } => {
            let f = read_function(&function)?;
            let params = RieszParams::new(f.grid().dim(), alpha)?;
            emit(&riesz(&f, &params)?.to_json()?, out.out.as_deref())?;
        }
        Command::Interp {
            function,
            p0,
            p1,
            eta,
            q,
            delta,
        } => {
            let f = read_function(&function)?;
            let pair = InterpPair {
                p0,
                p1,
                delta,
                eta,
                q,
            };
            let report = interpolation_norm(&f, &pair)?;
            emit(&pretty(&json!({"inputs": pair, "report": report}))?, None)?;
        }
        Command::Verify {
            experiment,
            config,
            overrides,
            csv,
            list,
            out,
        } => {
            if list {
                emit(&verify::EXPERIMENTS.join("\n"), None)?;
                return Ok(Outcome::Ok);
            }
            let name = experiment.expect("clap requires a name without --list");
            if !verify::EXPERIMENTS.contains(&name.as_str()) {
                anyhow::bail!(
                    "unknown experiment `{name}`; expected one of {}",
                    verify::EXPERIMENTS.join(", ")
                );
            }
            let resolved: Value = config::resolve(&name, config.as_deref(), &overrides)?;
            let report = verify::run_named(&name, resolved)?;
            emit(&report.to_json()?, out.out.as_deref())?;
            if let Some(path) = &csv {
                std::fs::write(path, report.to_csv())
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            return Ok(report_outcome(&report));
        }
        Command::Selftest { seed, samples } => {
            let report = verify::selftest(&SelftestConfig { seed, samples })?;
            emit(&report.to_json()?, None)?;
            return Ok(report_outcome(&report));
        }
    }
    Ok(Outcome::Ok)
}
