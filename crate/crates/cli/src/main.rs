//! `jetcone` command-line front end: cone oracles, Gårding eigenvalues,
//! fiberegularity certificates, comparison experiments, the
//! standard-condition counterexample and manifest runs.
//!
//! Exit codes: 0 on success (every experiment passed), 1 when a check or
//! experiment fails, 2 on invalid input.

mod manifest;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jetcone::cones::{strict_approximator, ApproximatorMode, ConeDescriptor, MonotonicityCone};
use jetcone::garding::{garding_eigenvalues, HyperbolicPolynomial};
use jetcone::potential::BoxDomain;
use serde_json::{json, Value};
use thiserror::Error;

use manifest::{ExperimentSpec, Kind};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] jetcone::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Parser)]
#[command(name = "jetcone", version, about = "Jet cones, duality, fiberegularity and comparison experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify jets against a cone or its dual, or build a strict approximator.
    Cones {
        #[command(subcommand)]
        action: ConesAction,
    },
    /// Gårding eigenvalues and cone membership of a gradient.
    Garding(GardingArgs),
    /// Fiberegularity certificate of an operator's correspondence subequation.
    Fibereg(FiberegArgs),
    /// One comparison experiment family.
    Compare(CompareArgs),
    /// Sequence demonstrating the failure of the standard structural condition.
    Counterexample(CounterexampleArgs),
    /// Run every experiment of a manifest.
    Run(RunArgs),
}

#[derive(Args)]
struct ConeArgs {
    /// Comma-separated generator labels: P, N, Q, D, Dn, Pn, gamma=<g>, R=<radius>.
    #[arg(long)]
    family: Option<String>,
    /// Adds `r <= -gamma |p|`.
    #[arg(long)]
    gamma: Option<f64>,
    /// Adds `A >= (|p| / R) I`.
    #[arg(long)]
    radius: Option<f64>,
    /// Cone descriptor JSON file.
    #[arg(long)]
    descriptor: Option<PathBuf>,
    /// Dimension when it cannot be read off the jet.
    #[arg(long, default_value_t = 2)]
    dim: usize,
}

#[derive(Subcommand)]
enum ConesAction {
    /// Inside/Boundary/Outside for the Dirichlet dual.
    Dual {
        #[command(flatten)]
        cone: ConeArgs,
        /// Jet `r,(p_1,..,p_n),A`; `A` is a number or a row list.
        #[arg(long, allow_hyphen_values = true)]
        jet: String,
    },
    /// Inside/Boundary/Outside for the cone itself.
    Classify {
        #[command(flatten)]
        cone: ConeArgs,
        #[arg(long, allow_hyphen_values = true)]
        jet: String,
    },
    /// Strict approximator parameters on a box.
    Approximator {
        #[command(flatten)]
        cone: ConeArgs,
        /// Blow down on the top face `t = T`.
        #[arg(long)]
        parabolic: bool,
        /// Final time of the default parabolic box.
        #[arg(long = "T", default_value_t = 1.0)]
        t_end: f64,
        /// Box as JSON `{lower, upper, counts}`.
        #[arg(long)]
        domain: Option<String>,
    },
}

#[derive(Args)]
struct GardingArgs {
    /// `lorentz`, `det2`, `sigma:<n>:<k>` or a polynomial JSON file.
    #[arg(long)]
    poly: String,
    /// Gradient `p`.
    #[arg(long, allow_hyphen_values = true)]
    p: Option<String>,
    /// Certify hyperbolicity on this many random restrictions instead.
    #[arg(long)]
    certify: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FiberegArgs {
    /// Operator descriptor JSON file.
    #[arg(long)]
    operator: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 200)]
    window: usize,
    #[arg(long, default_value_t = 4000)]
    pairs: usize,
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// `ot`, `krylov` or `garding`.
    #[arg(long)]
    operator: String,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    /// Space-time lattice of the Krylov run, e.g. `61,61,41`.
    #[arg(long)]
    counts: Option<String>,
    /// `full` or `reduced` (Krylov only).
    #[arg(long)]
    mode: Option<String>,
    /// Add a pair whose boundary condition fails at one cell (OT only).
    #[arg(long)]
    corrupt: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct CounterexampleArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    gamma_z: f64,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    direction: Option<String>,
    #[arg(long, default_value_t = 30)]
    n_max: usize,
    /// Write the `(n, LHS_n, m_n)` trace here.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct RunArgs {
    manifest: PathBuf,
    #[arg(long, default_value = "jetcone-out")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Leave wall-clock fields out of the reports.
    #[arg(long)]
    no_timestamp: bool,
}

fn seed_override() -> Result<Option<u64>, CliError> {
    match std::env::var("JETCONE_SEED") {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| CliError::Usage(format!("JETCONE_SEED={s:?} is not a u64"))),
        Err(_) => Ok(None),
    }
}

fn build_cone(args: &ConeArgs, n: usize) -> Result<MonotonicityCone, CliError> {
    let mut cone: Option<MonotonicityCone> = None;
    let mut meet = |c: MonotonicityCone| -> Result<(), CliError> {
        cone = Some(match cone.take() {
            Some(prev) => prev.intersect(&c)?,
            None => c,
        });
        Ok(())
    };
    if let Some(f) = &args.family {
        meet(parse::parse_family(f, n)?)?;
    }
    if let Some(g) = args.gamma {
        meet(parse::parse_family(&format!("gamma={g}"), n)?)?;
    }
    if let Some(r) = args.radius {
        meet(parse::parse_family(&format!("R={r}"), n)?)?;
    }
    if let Some(path) = &args.descriptor {
        let desc: ConeDescriptor = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if desc.n != n {
            return Err(CliError::Usage(format!("descriptor has n = {}, the jet has n = {n}", desc.n)));
        }
        meet(MonotonicityCone::from_descriptor(&desc)?)?;
    }
    cone.ok_or_else(|| CliError::Usage("give --family, --gamma, --radius or --descriptor".into()))
}

fn cmd_cones(action: ConesAction) -> Result<bool, CliError> {
    match action {
        ConesAction::Dual { cone, jet } => {
            let j = parse::parse_jet(&jet, cone.dim)?;
            println!("{}", build_cone(&cone, j.dim())?.dual_classify(&j)?);
        }
        ConesAction::Classify { cone, jet } => {
            let j = parse::parse_jet(&jet, cone.dim)?;
            println!("{}", build_cone(&cone, j.dim())?.try_classify(&j)?);
        }
        ConesAction::Approximator { cone, parabolic, t_end, domain } => {
            let n = cone.dim;
            let c = build_cone(&cone, n)?;
            let dom = match domain {
                Some(s) => serde_json::from_str(&s).map_err(|e| CliError::Usage(format!("domain: {e}")))?,
                None if parabolic => {
                    if !(t_end > 0.0 && t_end.is_finite()) {
                        return Err(CliError::Usage(format!("T = {t_end} must be positive")));
                    }
                    let mut lower = vec![-1.0; n];
                    let mut upper = vec![1.0; n];
                    lower[n - 1] = 0.0;
                    upper[n - 1] = t_end;
                    BoxDomain::new(lower, upper, vec![11; n])?
                }
                None => BoxDomain::unit_cube(n, 11)?,
            };
            let mode = if parabolic { ApproximatorMode::Parabolic } else { ApproximatorMode::Elliptic };
            let psi = strict_approximator(&c, &dom, mode)?;
            print!("{}", manifest::to_pretty(&psi)?);
        }
    }
    Ok(true)
}

fn polynomial(spec: &str) -> Result<HyperbolicPolynomial, CliError> {
    match spec {
        "lorentz" => Ok(HyperbolicPolynomial::lorentz_2d()),
        "det2" => Ok(HyperbolicPolynomial::determinant_2x2()),
        s if s.starts_with("sigma:") => {
            let parts: Vec<&str> = s.split(':').collect();
            let (Some(n), Some(k)) = (parts.get(1).and_then(|v| v.parse().ok()), parts.get(2).and_then(|v| v.parse().ok()))
            else {
                return Err(CliError::Usage(format!("{s:?} is not sigma:<n>:<k>")));
            };
            Ok(HyperbolicPolynomial::elementary_symmetric(n, k)?)
        }
        path => serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| CliError::Usage(format!("{path}: {e}"))),
    }
}

fn cmd_garding(args: GardingArgs) -> Result<bool, CliError> {
    let g = polynomial(&args.poly)?;
    if let Some(samples) = args.certify {
        let rep = g.certify(samples, seed_override()?.unwrap_or(args.seed));
        print!("{}", manifest::to_pretty(&rep)?);
        return Ok(rep.pass);
    }
    let p = parse::parse_vector(args.p.as_deref().ok_or_else(|| CliError::Usage("give --p or --certify".into()))?)?;
    if p.len() != g.dim() {
        return Err(CliError::Usage(format!("p has {} entries, the polynomial has {} variables", p.len(), g.dim())));
    }
    let ev = garding_eigenvalues(&g, &p)?;
    let out = json!({
        "p": p,
        "g": g.evaluate(&p),
        "eigenvalues": ev.values,
        "cone": g.cone_contains(&p)?.to_string(),
    });
    print!("{}", manifest::to_pretty(&out)?);
    Ok(true)
}

fn run_single(kind: Kind, operator: Option<Value>, params: Value, seed: u64, timestamps: bool) -> Result<bool, CliError> {
    let spec = ExperimentSpec { kind, name: None, operator, domain: None, params, seed };
    let prepared = manifest::prepare(0, &spec, seed_override()?)?;
    let report = manifest::execute(&prepared, timestamps);
    print!("{}", manifest::to_pretty(&report)?);
    Ok(report.pass)
}

fn cmd_fibereg(a: FiberegArgs) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(&a.operator)?;
    let op: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", a.operator.display())))?;
    let params = json!({ "eta": a.eta, "window": a.window, "pairs": a.pairs, "iterations": a.iterations });
    run_single(Kind::Fibereg, Some(op), params, a.seed, !a.no_timestamp)
}

fn cmd_compare(a: CompareArgs) -> Result<bool, CliError> {
    let mut params = serde_json::Map::new();
    if let Some(c) = a.count {
        params.insert("count".into(), json!(c));
    }
    if let Some(g) = a.grid {
        params.insert("grid".into(), json!(g));
    }
    if let Some(c) = &a.counts {
        let v: Vec<usize> = parse::parse_vector(c)?.into_iter().map(|x| x as usize).collect();
        params.insert("counts".into(), json!(v));
    }
    if let Some(m) = &a.mode {
        params.insert("mode".into(), json!(m));
    }
    if a.corrupt {
        params.insert("corrupt".into(), json!(true));
    }
    run_single(Kind::Comparison, Some(json!(a.operator)), Value::Object(params), a.seed, !a.no_timestamp)
}

fn cmd_counterexample(a: CounterexampleArgs) -> Result<bool, CliError> {
    let mut params = json!({ "beta": a.beta, "gamma_z": a.gamma_z, "n_max": a.n_max });
    if let Some(x0) = &a.x0 {
        params["x0"] = json!(parse::parse_vector(x0)?);
    }
    if let Some(d) = &a.direction {
        params["direction"] = json!(parse::parse_vector(d)?);
    }
    let spec = ExperimentSpec { kind: Kind::Counterexample, name: None, operator: None, domain: None, params, seed: 0 };
    let prepared = manifest::prepare(0, &spec, None)?;
    let report = manifest::execute(&prepared, !a.no_timestamp);
    if let (Some(path), Some(csv)) = (&a.csv, &report.trace_csv) {
        std::fs::write(path, csv)?;
    }
    print!("{}", manifest::to_pretty(&report)?);
    Ok(report.pass)
}

fn cmd_run(a: RunArgs) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(&a.manifest)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.manifest.display())))?;
    let exps = manifest::load(&text, seed_override()?)?;
    let reports = manifest::run_all(&exps, a.jobs, !a.no_timestamp)?;
    let pass = manifest::write_reports(&a.out, &reports, !a.no_timestamp)?;
    for r in &reports {
        let verdict = if r.pass { "pass" } else { "FAIL" };
        match &r.error {
            Some(e) => println!("{verdict} {}: {e}", r.experiment),
            None => println!("{verdict} {}", r.experiment),
        }
    }
    println!("summary: {}", if pass { "pass" } else { "FAIL" });
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cones { action } => cmd_cones(action),
        Command::Garding(a) => cmd_garding(a),
        Command::Fibereg(a) => cmd_fibereg(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Counterexample(a) => cmd_counterexample(a),
        Command::Run(a) => cmd_run(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
