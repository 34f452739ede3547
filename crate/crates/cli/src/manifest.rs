//! Experiment manifests: schema validation, typed jobs and the parallel job
//! runner with a deterministic merge.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use jetcone::comparison::{
    corrupt_boundary, garding_battery, krylov_experiments, ot_battery, run_comparisons, run_standard_condition_failure,
    run_zmp, write_trace_csv, zmp_pairs, ComparisonReport, CounterexampleRun, CounterexampleTrace, ZmpSubject,
};
use jetcone::cones::MonotonicityCone;
use jetcone::fibermap::{certify_with, verify_certificate, FiberegOptions, JetWindow};
use jetcone::operators::{build_correspondence, run_prechecks, OperatorDescriptor, OperatorPair};
use jetcone::potential::{BoundaryMode, BoxDomain};
use jetcone::DirectionalCone;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::sync::Arc;

use crate::CliError;

pub const MANIFEST_SCHEMA: &str = include_str!("../../../schemas/manifest.schema.json");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub experiments: Vec<ExperimentSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Comparison,
    Zmp,
    Counterexample,
    Fibereg,
    Prechecks,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: Kind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub operator: Option<Value>,
    #[serde(default)]
    pub domain: Option<Value>,
    #[serde(default = "empty_object")]
    pub params: Value,
    #[serde(default)]
    pub seed: u64,
}

fn empty_object() -> Value {
    json!({})
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OtParams {
    #[serde(default = "default_count")]
    count: usize,
    #[serde(default = "default_grid")]
    grid: usize,
    #[serde(default)]
    corrupt: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KrylovParams {
    #[serde(default = "default_krylov_counts")]
    counts: [usize; 3],
    #[serde(default = "default_reduced")]
    mode: BoundaryMode,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GardingParams {
    #[serde(default = "default_garding_count")]
    count: usize,
    #[serde(default = "default_garding_grid")]
    grid: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ZmpParams {
    #[serde(default = "default_zmp_count")]
    count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleParams {
    pub beta: f64,
    pub gamma_z: f64,
    #[serde(default = "origin")]
    pub x0: Vec<f64>,
    #[serde(default = "minus_e1")]
    pub direction: Vec<f64>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiberegParams {
    #[serde(default = "default_eta")]
    eta: f64,
    #[serde(default = "default_window")]
    window: usize,
    #[serde(default = "default_pairs")]
    pairs: usize,
    #[serde(default = "default_iterations")]
    iterations: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

fn default_count() -> usize {
    20
}
fn default_grid() -> usize {
    101
}
fn default_krylov_counts() -> [usize; 3] {
    [61, 61, 41]
}
fn default_reduced() -> BoundaryMode {
    BoundaryMode::Reduced
}
fn default_garding_count() -> usize {
    10
}
fn default_garding_grid() -> usize {
    81
}
fn default_zmp_count() -> usize {
    100
}
fn origin() -> Vec<f64> {
    vec![0.0, 0.0]
}
fn minus_e1() -> Vec<f64> {
    vec![-1.0, 0.0]
}
fn default_n_max() -> usize {
    30
}
fn default_eta() -> f64 {
    0.1
}
fn default_window() -> usize {
    200
}
fn default_pairs() -> usize {
    4000
}
fn default_iterations() -> usize {
    20
}

/// Validated, executable form of one manifest entry.
#[derive(Clone)]
pub enum Job {
    Ot { count: usize, grid: usize, corrupt: bool },
    Krylov { counts: [usize; 3], mode: BoundaryMode },
    Garding { count: usize, grid: usize },
    Zmp { count: usize, domain: BoxDomain },
    Counterexample { run: CounterexampleRun, n_max: usize },
    Fibereg { pair: OperatorPair, domain: BoxDomain, eta: f64, window: usize, pairs: usize, iterations: usize },
    Prechecks { pair: OperatorPair, domain: BoxDomain },
}

#[derive(Clone)]
pub struct PreparedExperiment {
    pub name: String,
    pub kind: Kind,
    pub seed: u64,
    pub params: Value,
    pub job: Job,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub kind: Kind,
    pub seed: u64,
    pub params: Value,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
    #[serde(skip)]
    pub trace_csv: Option<Vec<u8>>,
}

fn params<T: DeserializeOwned>(v: &Value, what: &str) -> Result<T, CliError> {
    serde_json::from_value(v.clone()).map_err(|e| CliError::Usage(format!("{what} params: {e}")))
}

fn descriptor(v: &Option<Value>, what: &str) -> Result<OperatorDescriptor, CliError> {
    let v = v.as_ref().ok_or_else(|| CliError::Usage(format!("{what} needs an operator descriptor")))?;
    serde_json::from_value(v.clone()).map_err(|e| CliError::Usage(format!("{what} operator: {e}")))
}

fn domain(v: &Option<Value>) -> Result<Option<BoxDomain>, CliError> {
    v.as_ref()
        .map(|d| serde_json::from_value(d.clone()).map_err(|e| CliError::Usage(format!("domain: {e}"))))
        .transpose()
}

/// Parses and validates a manifest; any problem is a usage error (exit 2).
pub fn load(text: &str, seed_override: Option<u64>) -> Result<Vec<PreparedExperiment>, CliError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("manifest is not JSON: {e}")))?;
    let schema: Value = serde_json::from_str(MANIFEST_SCHEMA).expect("bundled schema is valid JSON");
    let validator = jsonschema::validator_for(&schema).expect("bundled schema compiles");
    let errors: Vec<String> = validator.iter_errors(&raw).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    if !errors.is_empty() {
        return Err(CliError::Usage(format!("manifest fails the schema: {}", errors.join("; "))));
    }
    let m: Manifest = serde_json::from_value(raw).map_err(|e| CliError::Usage(format!("manifest: {e}")))?;
    if m.version != 1 {
        return Err(CliError::Usage(format!("manifest version {} is not supported", m.version)));
    }
    let mut out = Vec::with_capacity(m.experiments.len());
    let mut names = std::collections::BTreeSet::new();
    for (i, e) in m.experiments.iter().enumerate() {
        let p = prepare(i, e, seed_override)?;
        if !names.insert(p.name.clone()) {
            return Err(CliError::Usage(format!("duplicate experiment name {:?}", p.name)));
        }
        out.push(p);
    }
    Ok(out)
}

pub fn prepare(index: usize, e: &ExperimentSpec, seed_override: Option<u64>) -> Result<PreparedExperiment, CliError> {
    let kind_label = serde_json::to_value(e.kind).expect("kind serializes");
    let kind_label = kind_label.as_str().expect("kind is a string");
    let job = match e.kind {
        Kind::Comparison => {
            let family = e.operator.as_ref().and_then(Value::as_str).unwrap_or_default();
            match family {
                "ot" => {
                    let p: OtParams = params(&e.params, "ot comparison")?;
                    Job::Ot { count: p.count, grid: p.grid, corrupt: p.corrupt }
                }
                "krylov" => {
                    let p: KrylovParams = params(&e.params, "krylov comparison")?;
                    Job::Krylov { counts: p.counts, mode: p.mode }
                }
                "garding" => {
                    let p: GardingParams = params(&e.params, "garding comparison")?;
                    Job::Garding { count: p.count, grid: p.grid }
                }
                other => return Err(CliError::Usage(format!("unknown comparison operator {other:?}"))),
            }
        }
        Kind::Zmp => {
            let p: ZmpParams = params(&e.params, "zmp")?;
            let domain = domain(&e.domain)?.map_or_else(|| BoxDomain::unit_cube(2, 101), Ok)?;
            if domain.dim() != 2 {
                return Err(CliError::Usage("zmp pairs are generated on two-dimensional boxes".into()));
            }
            Job::Zmp { count: p.count, domain }
        }
        Kind::Counterexample => {
            let p: CounterexampleParams = params(&e.params, "counterexample")?;
            Job::Counterexample { run: CounterexampleRun::new(p.beta, p.gamma_z, p.x0, p.direction)?, n_max: p.n_max }
        }
        Kind::Fibereg => {
            let d = descriptor(&e.operator, "fibereg")?;
            let p: FiberegParams = params(&e.params, "fibereg")?;
            let domain = domain(&e.domain)?.unwrap_or_else(|| d.domain.clone());
            Job::Fibereg { pair: d.build()?, domain, eta: p.eta, window: p.window, pairs: p.pairs, iterations: p.iterations }
        }
        Kind::Prechecks => {
            let d = descriptor(&e.operator, "prechecks")?;
            let _: NoParams = params(&e.params, "prechecks")?;
            let domain = domain(&e.domain)?.unwrap_or_else(|| d.domain.clone());
            Job::Prechecks { pair: d.build()?, domain }
        }
    };
    Ok(PreparedExperiment {
        name: e.name.clone().unwrap_or_else(|| format!("{index:03}-{kind_label}")),
        kind: e.kind,
        seed: seed_override.unwrap_or(e.seed),
        params: e.params.clone(),
        job,
    })
}

fn comparison_summary(reports: &[ComparisonReport]) -> Value {
    json!({
        "pairs": reports.len(),
        "passing": reports.iter().filter(|r| r.pass).count(),
        "comparisons": reports,
    })
}

fn execute_job(e: &PreparedExperiment) -> jetcone::Result<(bool, Value, Option<Vec<u8>>)> {
    let seed = e.seed;
    Ok(match &e.job {
        Job::Ot { count, grid, corrupt } => {
            let battery = ot_battery(*count, *grid, seed)?;
            let mut exps = battery.clone();
            if *corrupt {
                exps.push(corrupt_boundary(&battery[0], 1e-3)?);
            }
            let reports = run_comparisons(&exps, seed)?;
            let clean = reports[..battery.len()].iter().all(|r| r.pass);
            let detected = reports.get(battery.len()).map(|r| !r.pass);
            let mut v = comparison_summary(&reports);
            if let Some(d) = detected {
                v["corruption_detected"] = json!(d);
            }
            (clean && detected.unwrap_or(true), v, None)
        }
        Job::Krylov { counts, mode } => {
            let (reduced, full) = krylov_experiments(*counts)?;
            let exp = if *mode == BoundaryMode::Reduced { reduced } else { full };
            let reports = run_comparisons(&[exp], seed)?;
            (reports[0].pass, comparison_summary(&reports), None)
        }
        Job::Garding { count, grid } => {
            let reports = run_comparisons(&garding_battery(*count, *grid, seed)?, seed)?;
            (reports.iter().all(|r| r.pass), comparison_summary(&reports), None)
        }
        Job::Zmp { count, domain } => {
            let cone = MonotonicityCone::d_p(DirectionalCone::orthant(2)?)?;
            let mut reports = Vec::new();
            for (phi, chi) in zmp_pairs(domain, *count, seed)? {
                let z = ZmpSubject::Pieces(vec![Arc::new(phi), Arc::new(chi)]);
                reports.push(run_zmp(&cone, domain, &z, BoundaryMode::Full)?);
            }
            let pass = reports.len() == *count && reports.iter().all(|r| r.pass);
            (pass, json!({ "pairs": reports.len(), "passing": reports.iter().filter(|r| r.pass).count(), "reports": reports }), None)
        }
        Job::Counterexample { run, n_max } => {
            let trace: CounterexampleTrace = run_standard_condition_failure(run, *n_max)?;
            let mut csv = Vec::new();
            write_trace_csv(&trace, &mut csv)?;
            (trace.report.pass, serde_json::to_value(&trace)?, Some(csv))
        }
        Job::Fibereg { pair, domain, eta, window, pairs, iterations } => {
            let c = build_correspondence(pair)?;
            let w = JetWindow::new(pair.dim(), 2.0, *window, seed)?;
            let opts = FiberegOptions { pairs: *pairs, iterations: *iterations, seed };
            let cert = certify_with(&c.oracle, domain, *eta, &w, opts)?;
            let dual = verify_certificate(&c.oracle.dual(), &cert, &w, opts)?;
            (cert.pass && dual.pass, json!({ "certificate": cert, "dual": dual }), None)
        }
        Job::Prechecks { pair, domain } => {
            let pre = run_prechecks(pair, domain, seed)?;
            (pre.pass(), serde_json::to_value(&pre)?, None)
        }
    })
}

pub fn execute(e: &PreparedExperiment, timestamps: bool) -> ExperimentReport {
    let start = Instant::now();
    let (pass, error, result, trace_csv) = match execute_job(e) {
        Ok((pass, result, csv)) => (pass, None, result, csv),
        Err(err) => (false, Some(err.to_string()), Value::Null, None),
    };
    ExperimentReport {
        experiment: e.name.clone(),
        kind: e.kind,
        seed: e.seed,
        params: e.params.clone(),
        pass,
        error,
        result,
        timestamp: timestamps.then(now),
        elapsed_ms: timestamps.then(|| start.elapsed().as_millis() as u64),
        trace_csv,
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Runs every experiment on a pool of `jobs` threads; reports come back in
/// manifest order.
pub fn run_all(exps: &[PreparedExperiment], jobs: usize, timestamps: bool) -> Result<Vec<ExperimentReport>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    Ok(pool.install(|| exps.par_iter().map(|e| execute(e, timestamps)).collect()))
}

/// Writes `<name>.json` (and `<name>.csv` for traces) per report and
/// `summary.json`; returns whether every experiment passed.
pub fn write_reports(out: &Path, reports: &[ExperimentReport], timestamps: bool) -> Result<bool, CliError> {
    std::fs::create_dir_all(out)?;
    let mut entries = Vec::new();
    for r in reports {
        let file = format!("{}.json", r.experiment);
        std::fs::write(out.join(&file), to_pretty(r)?)?;
        if let Some(csv) = &r.trace_csv {
            std::fs::write(out.join(format!("{}.csv", r.experiment)), csv)?;
        }
        entries.push(json!({ "experiment": r.experiment, "kind": r.kind, "pass": r.pass, "file": file }));
    }
    let pass = reports.iter().all(|r| r.pass);
    let mut summary = json!({ "version": 1, "pass": pass, "experiments": entries });
    if timestamps {
        summary["timestamp"] = json!(now());
    }
    std::fs::write(out.join("summary.json"), to_pretty(&summary)?)?;
    Ok(pass)
}

pub fn to_pretty<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(jetcone::Error::from)?;
    s.push('\n');
    Ok(s)
}
