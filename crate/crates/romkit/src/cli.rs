//! The `romkit` command line.
//!
//! Progress goes to standard error through `log`; each command prints one
//! JSON summary to standard output (`online` prints text unless `--json`).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use romkit_core::certify::certificate;
use romkit_core::greedy::{GreedyOptions, DEFAULT_TRAINING_SEED};
use romkit_core::pod::PodCriterion;
use romkit_core::problem::{make_thermal_block, SamplingStrategy};
use romkit_core::truth::solve_fom;
use romkit_core::{AffineProblem, BasisProvenance, Certificate, ParameterPoint};
use serde_json::{json, Value};

use crate::archive::{load_model, load_online, save_model, write_matrix_payload, ArchiveReader};
use crate::external::load_external;
use crate::offline::{greedy_archive, parse_strategy, pod_archive};
use crate::report::{decay_svg, histogram_svg};
use crate::validate::{summarize, validate, write_table, INDETERMINATE};
use crate::WorkbenchError;

#[derive(Debug, Parser)]
#[command(name = "romkit", version, about = "Certified reduced-basis models: build offline, evaluate online")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a reduced model and write it as an archive.
    Offline(OfflineArgs),
    /// Evaluate an archived model and its error bounds at one parameter.
    Online(OnlineArgs),
    /// Compare an archived model against truth solves on random parameters.
    Validate(ValidateArgs),
    /// Tabulate the reduced output and its bound over a parameter grid.
    Sweep(SweepArgs),
    /// Draw an estimator-decay curve or an effectivity histogram as SVG.
    Report(ReportArgs),
    /// Solve the full-order problem once (debugging).
    Fom(FomArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    Thermal,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Greedy,
    Pod,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    #[arg(long, value_enum, default_value = "thermal")]
    pub problem: ProblemKind,
    /// Blocks per side of the thermal block.
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    /// Cells per side of the mesh.
    #[arg(long = "mesh-n", default_value_t = 32)]
    pub mesh_n: usize,
    #[arg(long = "mu-lo", default_value_t = 0.1)]
    pub mu_lo: f64,
    #[arg(long = "mu-hi", default_value_t = 10.0)]
    pub mu_hi: f64,
    /// Problem manifest for `--problem external`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OfflineArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "greedy")]
    pub method: Method,
    /// Greedy tolerance on the relative energy estimator.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long = "n-max", default_value_t = 40)]
    pub n_max: usize,
    /// Greedy training set size (random, log-uniform on log axes).
    #[arg(long, default_value_t = 500)]
    pub train: usize,
    /// POD snapshot count.
    #[arg(long, default_value_t = 49)]
    pub snapshots: usize,
    /// POD snapshot sampling: grid or random.
    #[arg(long, default_value = "grid")]
    pub sampling: String,
    /// POD: keep the smallest N whose neglected energy fraction is at most this.
    #[arg(long)]
    pub energy: Option<f64>,
    /// POD: keep exactly this many modes.
    #[arg(long = "n")]
    pub n_fixed: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TRAINING_SEED)]
    pub seed: u64,
    /// First greedy parameter; the domain midpoint by default.
    #[arg(long = "mu-1")]
    pub mu_1: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OnlineArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated parameter components.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: String,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 25)]
    pub points: usize,
    #[arg(long, default_value = "grid")]
    pub sampling: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Archive whose greedy history (or POD spectrum) to plot.
    #[arg(long, conflicts_with = "csv", required_unless_present = "csv")]
    pub model: Option<PathBuf>,
    /// Validation table whose `eff_en` column to histogram.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FomArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: String,
    /// Write `u_δ` as an `N_δ × 1` RBM1 payload.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_mu(text: &str) -> Result<ParameterPoint, WorkbenchError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| WorkbenchError::Usage(format!("bad parameter component '{s}': {e}")))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(ParameterPoint)
}

fn build_problem(args: &ProblemArgs) -> Result<AffineProblem, WorkbenchError> {
    match args.problem {
        ProblemKind::Thermal => Ok(make_thermal_block(args.mesh_n, args.blocks, args.mu_lo, args.mu_hi)?),
        ProblemKind::External => {
            let path = args
                .manifest
                .as_deref()
                .ok_or_else(|| WorkbenchError::Usage("--problem external needs --manifest".into()))?;
            load_external(path)
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), WorkbenchError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| WorkbenchError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| WorkbenchError::io(path, e))
}

fn certificate_json(c: &Certificate, seconds: f64) -> Value {
    json!({
        "mu": c.mu.values(),
        "n": c.coefficients.len(),
        "s_rb": c.s_rb,
        "eta_en": c.eta_en,
        "eta_s": c.eta_s,
        "eta_s_rel": c.eta_s_rel.map_or(json!(INDETERMINATE), |v| json!(v)),
        "eta_v": c.eta_v,
        "eta_v_rel": c.eta_v_rel,
        "eta_v_rel_valid": c.eta_v_rel_valid,
        "alpha_lb": c.alpha_lb,
        "gamma_ub": c.gamma_ub,
        "u_rb_norm": c.u_rb_norm,
        "flags": flags(c),
        "online_seconds": seconds,
    })
}

fn flags(c: &Certificate) -> Vec<&'static str> {
    let mut f = Vec::new();
    if c.out_of_domain {
        f.push("extrapolation");
    }
    if !c.rigorous {
        f.push("heuristic");
    }
    if c.dual_norm.below_floor {
        f.push("below_floor");
    }
    if c.dual_norm.cancellation {
        f.push("cancellation");
    }
    if !c.eta_v_rel_valid {
        f.push("eta_v_rel_unclaimed");
    }
    f
}

fn offline(args: &OfflineArgs) -> Result<Value, WorkbenchError> {
    let problem = build_problem(&args.problem)?;
    log::info!("problem: N_delta = {}, Q_a = {}, p = {}", problem.dim(), problem.q_a(), problem.p());
    let start = Instant::now();
    let archive = match args.method {
        Method::Greedy => {
            if args.train == 0 {
                return Err(WorkbenchError::Usage("--train must be at least 1".into()));
            }
            let training = problem.domain().sample(args.train, SamplingStrategy::Random, args.seed);
            let options = GreedyOptions {
                tol: args.tol,
                n_max: args.n_max,
                mu_1: args.mu_1.as_deref().map(parse_mu).transpose()?,
            };
            greedy_archive(problem, &training, &options)?
        }
        Method::Pod => {
            if args.snapshots == 0 {
                return Err(WorkbenchError::Usage("--snapshots must be at least 1".into()));
            }
            let criterion = match (args.energy, args.n_fixed) {
                (Some(_), Some(_)) => return Err(WorkbenchError::Usage("give either --energy or --n, not both".into())),
                (_, Some(n)) => PodCriterion::Fixed(n),
                (e, None) => PodCriterion::RetainedEnergy(e.unwrap_or(1e-8)),
            };
            let params = problem.domain().sample(args.snapshots, parse_strategy(&args.sampling)?, args.seed);
            pod_archive(problem, &params, criterion)?
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let manifest = save_model(&archive, &args.out)?;
    log::info!("wrote {} (N = {})", args.out.display(), manifest.n);
    let mut summary = json!({
        "command": "offline",
        "out": args.out,
        "n": manifest.n,
        "n_delta": manifest.n_delta,
        "offline_seconds": seconds,
        "provenance": manifest.provenance,
    });
    if let BasisProvenance::Greedy(h) = &archive.basis.provenance {
        summary["stopping_reason"] = json!(h.stopping_reason.as_str());
    }
    Ok(summary)
}

fn online(args: &OnlineArgs) -> Result<Option<Value>, WorkbenchError> {
    let mu = parse_mu(&args.mu)?;
    let load = Instant::now();
    let online = load_online(&args.model)?;
    let load_seconds = load.elapsed().as_secs_f64();
    let start = Instant::now();
    let cert = certificate(&online.model, &online.residual, &mu)?;
    let seconds = start.elapsed().as_secs_f64();
    let mut value = certificate_json(&cert, seconds);
    value["load_seconds"] = json!(load_seconds);
    value["payloads_read"] = json!(online.access_log.iter().map(|a| &a.name).collect::<Vec<_>>());
    if args.json {
        return Ok(Some(value));
    }
    let eta_s_rel = cert.eta_s_rel.map_or_else(|| INDETERMINATE.to_string(), |v| format!("{v:.6e}"));
    println!("mu         {}", cert.mu);
    println!("N          {}", cert.coefficients.len());
    println!("s_rb       {:.12e}", cert.s_rb);
    println!("eta_en     {:.6e}", cert.eta_en);
    println!("eta_s      {:.6e}", cert.eta_s);
    println!("eta_s_rel  {eta_s_rel}");
    println!("eta_v      {:.6e}", cert.eta_v);
    println!(
        "eta_v_rel  {:.6e}{}",
        cert.eta_v_rel,
        if cert.eta_v_rel_valid { "" } else { " (no bound claimed)" }
    );
    println!("alpha_lb   {:.6e}", cert.alpha_lb);
    println!("flags      {}", flags(&cert).join(","));
    println!("online     {:.3} us", seconds * 1e6);
    Ok(None)
}

fn validate_cmd(args: &ValidateArgs) -> Result<Value, WorkbenchError> {
    if args.samples == 0 {
        return Err(WorkbenchError::Usage("--samples must be at least 1".into()));
    }
    let archive = load_model(&args.model)?;
    let params = archive.problem.domain().sample(args.samples, SamplingStrategy::Random, args.seed);
    log::info!("validating {} samples", params.len());
    let reports = validate(&archive.problem, &archive.basis, &archive.model, &archive.residual, &params)?;
    let mut buf = Vec::new();
    write_table(&mut buf, archive.problem.p(), &reports)?;
    write_file(&args.out, buf)?;
    let summary = summarize(&reports);
    for (name, ok) in [
        ("rigor", summary.rigor_failures == 0),
        ("ceilings", summary.ceiling_failures == 0),
        ("effectivity >= 1", summary.effectivity_below_one == 0),
        ("s_delta >= s_rb", summary.monotonicity_failures == 0),
    ] {
        log::info!("{}: {name}", if ok { "PASS" } else { "FAIL" });
    }
    Ok(json!({ "command": "validate", "out": args.out, "summary": summary }))
}

fn sweep(args: &SweepArgs) -> Result<Value, WorkbenchError> {
    if args.points == 0 {
        return Err(WorkbenchError::Usage("--points must be at least 1".into()));
    }
    let online = load_online(&args.model)?;
    let params = online
        .model
        .domain()
        .sample(args.points, parse_strategy(&args.sampling)?, args.seed);
    let certs = {
        use rayon::prelude::*;
        params
            .par_iter()
            .map(|mu| certificate(&online.model, &online.residual, mu))
            .collect::<Result<Vec<_>, _>>()?
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let p = online.model.p();
    let header: Vec<String> = (0..p)
        .map(|i| format!("mu_{i}"))
        .chain(["s_rb", "eta_s", "eta_en"].map(String::from))
        .collect();
    w.write_record(&header)?;
    for c in &certs {
        let mut row: Vec<String> = c.mu.values().iter().map(|v| format!("{v:e}")).collect();
        row.extend([format!("{:e}", c.s_rb), format!("{:e}", c.eta_s), format!("{:e}", c.eta_en)]);
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| WorkbenchError::Usage(e.to_string()))?;
    write_file(&args.out, bytes)?;
    Ok(json!({ "command": "sweep", "out": args.out, "points": certs.len() }))
}

fn report(args: &ReportArgs) -> Result<Value, WorkbenchError> {
    let svg = if let Some(dir) = &args.model {
        let reader = ArchiveReader::open(dir)?;
        match reader.provenance()? {
            BasisProvenance::Greedy(h) => decay_svg("Greedy: maximum relative estimator", &h.max_estimator_per_iteration),
            BasisProvenance::Pod(s) => {
                let tails: Vec<f64> = (1..=s.eigenvalues.len()).map(|n| s.tail(n)).collect();
                decay_svg("POD: neglected eigenvalue sum", &tails)
            }
            BasisProvenance::Manual => return Err(WorkbenchError::Usage("archive has no history to plot".into())),
        }
    } else {
        let path = args.csv.as_deref().expect("clap enforces --model or --csv");
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let col = headers
            .iter()
            .position(|h| h == "eff_en")
            .ok_or_else(|| WorkbenchError::Usage(format!("{}: no eff_en column", path.display())))?;
        let mut values = Vec::new();
        let mut rows = 0;
        for record in reader.records() {
            rows += 1;
            if let Ok(v) = record?[col].parse::<f64>() {
                values.push(v);
            }
        }
        if rows == 0 {
            return Err(WorkbenchError::Usage(format!("{}: no data rows", path.display())));
        }
        histogram_svg("Energy-norm effectivity", &values, args.bins)
    };
    write_file(&args.out, svg)?;
    Ok(json!({ "command": "report", "out": args.out }))
}

fn fom(args: &FomArgs) -> Result<Value, WorkbenchError> {
    let problem = build_problem(&args.problem)?;
    let mu = parse_mu(&args.mu)?;
    problem.check_arity(&mu)?;
    let start = Instant::now();
    let sol = solve_fom(&problem, &mu)?;
    let seconds = start.elapsed().as_secs_f64();
    if let Some(out) = &args.out {
        write_matrix_payload(out, &DMatrix::from_column_slice(sol.u.len(), 1, sol.u.as_slice()))?;
    }
    Ok(json!({
        "command": "fom",
        "mu": mu.values(),
        "n_delta": problem.dim(),
        "s_delta": sol.s,
        "solve_residual": sol.solve_residual,
        "iterations": sol.iterations,
        "seconds": seconds,
    }))
}

/// Runs one command; returns the JSON summary to print, if any.
pub fn run(cli: &Cli) -> Result<Option<Value>, WorkbenchError> {
    match &cli.command {
        Command::Offline(a) => offline(a).map(Some),
        Command::Online(a) => online(a),
        Command::Validate(a) => validate_cmd(a).map(Some),
        Command::Sweep(a) => sweep(a).map(Some),
        Command::Report(a) => report(a).map(Some),
        Command::Fom(a) => fom(a).map(Some),
    }
}
