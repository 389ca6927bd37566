//! `dichotomy`: divergences, channel synthesis, rate sweeps and resource
//! checks on JSON-encoded quantum states.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input, 3 infinite
//! value (human mode), 4 synthesis precondition violated, 5 near-critical
//! rate refused.

mod output;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dichotomy::asymptotics::{error_exponent_sweep, rate_curve, ExperimentConfig};
use dichotomy::channels::{synthesize_approx, synthesize_exact, verify_transformation};
use dichotomy::divergences::{
    d_max, d_min, petz_renyi, relative_entropy, relative_entropy_variance, sandwiched_renyi, support_contained,
    DivergenceValue,
};
use dichotomy::io::{ChannelJson, DichotomyJson, MatrixJson};
use dichotomy::oneshot::{hypothesis_testing, smooth_dmax};
use dichotomy::resource::{
    athermality_feasible, coherence_distillation_rate, dio_transformation_rate, GibbsSpec, Rate,
};
use dichotomy::states::{DensityMatrix, Dichotomy, Metric};
use dichotomy::Error;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use output::{cell, num, to_pretty, write_file, RunManifest};

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(2, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(1, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Precondition(_) => 4,
            Error::NearCritical { .. } => 5,
            Error::InvalidArgument { .. }
            | Error::InvalidState(_)
            | Error::DimensionMismatch { .. }
            | Error::NotSquare { .. }
            | Error::DimensionCap { .. }
            | Error::Json(_) => 2,
            _ => 1,
        };
        Self::new(code, e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "dichotomy", version, about = "Quantum dichotomies: divergences, synthesis and rates")]
struct Cli {
    /// Seed recorded in run manifests.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one divergence of a pair, in bits.
    Divergence(DivergenceArgs),
    /// Build a test-and-prepare channel mapping one pair to another.
    Synthesize(SynthesizeArgs),
    /// Rate curve, or error-exponent sweep at a fixed rate.
    Sweep(SweepArgs),
    /// Athermality and coherence reports.
    #[command(subcommand)]
    Resource(ResourceCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Relent,
    Petz,
    Sandwiched,
    Dmin,
    Dmax,
    Var,
    Dh,
    SmoothDmax,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Trace,
    Purified,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Trace => Metric::TraceDistance,
            MetricArg::Purified => Metric::PurifiedDistance,
        }
    }
}

#[derive(Args)]
struct DivergenceArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_enum, default_value = "trace")]
    metric: MetricArg,
    /// Dichotomy file {"rho": matrix, "sigma": matrix}.
    #[arg(long)]
    input: PathBuf,
    /// Emit JSON instead of a bare number.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Approx,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    dst: PathBuf,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long, value_enum, default_value = "trace")]
    metric: MetricArg,
    /// Channel file to write; the verification report goes to stdout.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    dst: PathBuf,
    /// Total error ε₁ + ε₂ of the rate curve.
    #[arg(long)]
    eps: f64,
    /// Fraction of the error assigned to the source test.
    #[arg(long, default_value_t = 0.5)]
    split: f64,
    /// Fixed rate m/n: switches to the error-exponent sweep.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, default_value_t = 1)]
    n_min: usize,
    #[arg(long)]
    n_max: usize,
    /// Number of sampled n (geometric for rate curves, linear for sweeps).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_enum, default_value = "trace")]
    metric: MetricArg,
    /// Use the commuting-pair log-domain path when both pairs are diagonal.
    #[arg(long)]
    classical: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ResourceCommand {
    /// Feasibility of ρ₁ → ρ₂ under Gibbs-preserving maps.
    Athermality {
        #[arg(long)]
        rho1: PathBuf,
        #[arg(long)]
        rho2: PathBuf,
        /// Hamiltonian matrix file.
        #[arg(long)]
        hamiltonian: PathBuf,
        #[arg(long)]
        beta: f64,
    },
    /// Distillable coherence of ρ, and the DIO rate to σ if given.
    Coherence {
        #[arg(long)]
        rho: PathBuf,
        #[arg(long)]
        sigma: Option<PathBuf>,
    },
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: dichotomy::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| {
        let mut c = CliError::from(e);
        c.message = format!("{}: {}", path.display(), c.message);
        c
    })
}

fn read_pair(path: &Path) -> Result<Dichotomy, CliError> {
    with_path(path, read_json::<DichotomyJson>(path)?.to_dichotomy())
}

fn read_state(path: &Path) -> Result<DensityMatrix, CliError> {
    with_path(path, read_json::<MatrixJson>(path)?.to_state())
}

fn require(name: &str, v: Option<f64>) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::invalid(format!("--{name} is required for this kind")))
}

fn divergence(args: &DivergenceArgs) -> Result<(), CliError> {
    let d = read_pair(&args.input)?;
    let metric = Metric::from(args.metric);
    let mut params = serde_json::Map::new();
    let value = match args.kind {
        Kind::Relent => relative_entropy(&d)?,
        Kind::Petz | Kind::Sandwiched => {
            let alpha = require("alpha", args.alpha)?;
            params.insert("alpha".into(), num(alpha));
            if matches!(args.kind, Kind::Petz) {
                petz_renyi(&d, alpha)?
            } else {
                sandwiched_renyi(&d, alpha)?
            }
        }
        Kind::Dmin => d_min(&d)?,
        Kind::Dmax => d_max(&d)?,
        Kind::Var => {
            if support_contained(&d)? {
                DivergenceValue::Finite(relative_entropy_variance(&d)?)
            } else {
                DivergenceValue::Infinite
            }
        }
        Kind::Dh => {
            let eps = require("eps", args.eps)?;
            params.insert("eps".into(), num(eps));
            DivergenceValue::Finite(hypothesis_testing(&d, eps)?.value_bits)
        }
        Kind::SmoothDmax => {
            let eps = require("eps", args.eps)?;
            params.insert("eps".into(), num(eps));
            params.insert("metric".into(), Value::from(metric.name()));
            DivergenceValue::Finite(smooth_dmax(&d, eps, metric)?.value_bits)
        }
    };
    let kind = args.kind.to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default();
    if args.json {
        print!("{}", to_pretty(&json!({ "kind": kind, "bits": num(value.bits()), "params": params }))?);
        return Ok(());
    }
    match value {
        DivergenceValue::Finite(v) => {
            println!("{v:.6}");
            Ok(())
        }
        DivergenceValue::Infinite => {
            println!("inf");
            Err(CliError::new(3, format!("{kind} is infinite: the support condition fails")))
        }
    }
}

fn synthesize(args: &SynthesizeArgs, seed: u64) -> Result<(), CliError> {
    let src = read_pair(&args.src)?;
    let dst = read_pair(&args.dst)?;
    let metric = Metric::from(args.metric);
    let mut params = vec![
        ("mode", args.mode.to_possible_value().unwrap().get_name().to_owned()),
        ("metric", metric.name().to_owned()),
    ];
    let (synthesis, bound) = match args.mode {
        Mode::Exact => (synthesize_exact(&src, &dst)?, 0.0),
        Mode::Approx => {
            let eps1 = require("eps1", args.eps1)?;
            let eps2 = require("eps2", args.eps2)?;
            params.push(("eps1", eps1.to_string()));
            params.push(("eps2", eps2.to_string()));
            let bound = match metric {
                Metric::TraceDistance => eps1 + eps2,
                Metric::PurifiedDistance => eps1.sqrt() + eps2,
            };
            (synthesize_approx(&src, &dst, eps1, eps2, metric)?, bound)
        }
    };
    let rep = verify_transformation(&synthesis.channel, &src, &dst, metric)?;
    write_file(&args.out, &to_pretty(&ChannelJson::from_test_and_prepare(&synthesis.channel))?)?;
    RunManifest::new("synthesize", &[&args.src, &args.dst], &params, seed).write_next_to(&args.out)?;
    if synthesis.borderline {
        eprintln!("warning: condition holds only within the numerical slack ({:e})", synthesis.slack);
    }
    print!(
        "{}",
        to_pretty(&json!({
            "mode": params[0].1,
            "metric": metric.name(),
            "sigma_error": num(rep.sigma_error),
            "rho_error": num(rep.rho_error),
            "certified_bound": num(bound),
            "condition_slack": num(synthesis.slack),
            "borderline": synthesis.borderline,
            "channel": args.out.display().to_string(),
        }))?
    );
    Ok(())
}

fn sweep(args: &SweepArgs, seed: u64) -> Result<(), CliError> {
    let src = read_pair(&args.src)?;
    let dst = read_pair(&args.dst)?;
    let mut cfg = ExperimentConfig::new(src, dst, args.metric.into(), args.eps, args.n_max)?;
    cfg.eps_split = args.split;
    cfg.n_min = args.n_min;
    cfg.samples = args.samples;
    cfg.classical_fast_path = args.classical;
    cfg.validate()?;
    let mut params = vec![
        ("eps", args.eps.to_string()),
        ("split", args.split.to_string()),
        ("n_min", args.n_min.to_string()),
        ("n_max", args.n_max.to_string()),
        ("metric", cfg.metric.name().to_owned()),
        ("classical", args.classical.to_string()),
    ];
    if let Some(k) = args.samples {
        params.push(("samples", k.to_string()));
    }
    let mut csv = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::io(e.to_string());
    match args.rate {
        None => {
            let recs = rate_curve(&cfg)?;
            csv.write_record([
                "n",
                "m",
                "rate",
                "eps1",
                "eps2",
                "achieved_error",
                "certified",
                "dh_bits",
                "dmax_bits",
            ])
            .map_err(csv_err)?;
            for r in &recs {
                csv.write_record([
                    r.n.to_string(),
                    r.m.map_or("unbounded".into(), |m| m.to_string()),
                    cell(r.rate),
                    cell(r.eps1),
                    cell(r.eps2),
                    cell(r.achieved_error),
                    r.certified.to_string(),
                    cell(r.dh_value),
                    cell(r.dmax_value),
                ])
                .map_err(csv_err)?;
            }
            if let Some(last) = recs.last() {
                println!("n={} m={} rate={}", last.n, last.m.map_or("unbounded".into(), |m| m.to_string()), cell(last.rate));
            }
        }
        Some(rate) => {
            params.push(("rate", rate.to_string()));
            let s = error_exponent_sweep(&cfg, rate)?;
            csv.write_record(["n", "m", "log2_eps", "log2_one_minus_eps", "at_floor"])
                .map_err(csv_err)?;
            for p in &s.points {
                csv.write_record([
                    p.n.to_string(),
                    p.m.to_string(),
                    cell(p.log2_eps),
                    cell(p.log2_one_minus_eps),
                    p.at_floor.to_string(),
                ])
                .map_err(csv_err)?;
            }
            let fit = json!({
                "rate": num(s.rate),
                "lambda1": num(s.lambda1),
                "lambda2": num(s.lambda2),
                "critical_rate": num(s.lambda1 / s.lambda2),
                "regime": s.fit.regime,
                "slope_bits_per_n": num(s.fit.slope_bits_per_n),
                "intercept": num(s.fit.intercept),
                "r_squared": num(s.fit.r_squared),
                "n0": s.fit.n0,
                "units": "bits",
            });
            write_file(&output::sidecar(&args.out, "fit.json"), &to_pretty(&fit)?)?;
            print!("{}", to_pretty(&fit)?);
        }
    }
    let bytes = csv.into_inner().map_err(|e| CliError::io(e.to_string()))?;
    write_file(&args.out, &String::from_utf8_lossy(&bytes))?;
    RunManifest::new("sweep", &[&args.src, &args.dst], &params, seed).write_next_to(&args.out)?;
    Ok(())
}

fn resource(cmd: &ResourceCommand) -> Result<(), CliError> {
    let report = match cmd {
        ResourceCommand::Athermality {
            rho1,
            rho2,
            hamiltonian,
            beta,
        } => {
            let h = with_path(hamiltonian, read_json::<MatrixJson>(hamiltonian)?.to_hermitian())?;
            let g = GibbsSpec::new(h, *beta)?;
            let r = athermality_feasible(&read_state(rho1)?, &read_state(rho2)?, &g)?;
            json!({
                "lambda1": num(r.lambda1),
                "lambda2": num(r.lambda2),
                "free_energy1": num(r.free_energy1),
                "free_energy2": num(r.free_energy2),
                "verdict": r.verdict,
                "units": r.units,
            })
        }
        ResourceCommand::Coherence { rho, sigma } => {
            let r = read_state(rho)?;
            let mut out = json!({ "rate": num(coherence_distillation_rate(&r)?), "units": "bits" });
            if let Some(path) = sigma {
                let s = read_state(path)?;
                out["sigma_rate"] = num(coherence_distillation_rate(&s)?);
                out["dio_transformation_rate"] = match dio_transformation_rate(&r, &s)? {
                    Rate::Finite(v) => num(v),
                    Rate::Unbounded => Value::from("unbounded"),
                };
            }
            out
        }
    };
    print!("{}", to_pretty(&report)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Divergence(a) => divergence(a),
        Command::Synthesize(a) => synthesize(a, cli.seed),
        Command::Sweep(a) => sweep(a, cli.seed),
        Command::Resource(c) => resource(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
