//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code.
//!
//! Every option can also come from a JSON file given with `--config`, whose
//! keys are the long flag names in snake case. Flags win over the file,
//! which wins over built-in defaults.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::dataset::{matrix_from_json, matrix_to_json, pauli_setting, JsonMatrix, MeasurementSetting};
use crate::likelihood::{lambda, MleOptions};
use crate::region::RegionSpec;
use crate::sampling::{linspace_unit, qubit_state_grid};
use crate::state::{pauli_matrices, BlochVector, CMatrix, DensityMatrix};
use crate::studies::{
    always_everything, coverage_mc, lr_assignment, perturbed_pr_challenger, pr_assignment, pr_optimality_check,
    random_challenger, DiscreteModel, ExhaustiveEnsemble, DEFAULT_CAP,
};
use crate::threshold::{check_alpha, degrees_of_freedom, solve_threshold, CcdfCurve, Provenance, RuleKind, ThresholdRule};
use crate::{Error, Povm, Result, TomographyDataset};

/// Exit code for invalid input or configuration.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code when a numerical solve did not converge.
pub const EXIT_NON_CONVERGENCE: i32 = 3;
/// Exit code when an enumeration would exceed its cap.
pub const EXIT_CAP: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "lrtomo", version, about = "Likelihood-ratio confidence regions for quantum state tomography")]
struct Cli {
    /// JSON file with default values for the subcommand's options.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Confidence region for a dataset file: cutoff, support intervals, enclosure, boundary points.
    Analyze(AnalyzeArgs),
    /// Table of cutoffs λ_α as CSV.
    Threshold(ThresholdArgs),
    /// Simulate a dataset file from a true state.
    Simulate(SimulateArgs),
    /// Monte Carlo coverage of the region estimator at one true state.
    Coverage(CoverageArgs),
    /// Exact CCDF of λ(true state) by enumerating every dataset.
    Ccdf(CcdfArgs),
    /// Exact state-dependent cutoff along the σ_z axis.
    Cutoff(CutoffArgs),
    /// Probability-ratio estimator on a discrete coin model, checked against challengers.
    Propt(ProptArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct SolverArgs {
    /// Stopping tolerance on the maximum-likelihood optimality gap.
    #[arg(long)]
    gap_tolerance: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
}

impl SolverArgs {
    fn options(&self) -> Result<MleOptions> {
        let mut o = MleOptions::default();
        if let Some(g) = self.gap_tolerance {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::arg("gap_tolerance", "must be positive and finite"));
            }
            o.gap_tolerance = g;
        }
        if let Some(m) = self.max_iterations {
            if m == 0 {
                return Err(Error::arg("max_iterations", "must be ≥ 1"));
            }
            o.max_iterations = m;
        }
        Ok(o)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct AnalyzeArgs {
    /// Dataset file (JSON).
    dataset: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    /// chi2, eq9 or lemma1.
    #[arg(long)]
    rule: Option<String>,
    /// Use this cutoff instead of a rule (`inf` allowed).
    #[arg(long)]
    lambda: Option<f64>,
    /// `x`, `y`, `z` (qubits) or a JSON matrix file; repeatable.
    #[arg(long)]
    observable: Vec<String>,
    /// States to test for membership: Bloch components `a,b,c` or a JSON matrix file.
    #[arg(long, allow_hyphen_values = true)]
    contains: Vec<String>,
    /// Number of boundary directions.
    #[arg(long)]
    samples: Option<usize>,
    /// ellipsoid, ball or none.
    #[arg(long)]
    enclosure: Option<String>,
    /// Accuracy parameter of the ellipsoid solver.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Report file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Boundary CSV (qubits); defaults to `<out>_boundary.csv` when `--out` is set.
    #[arg(long)]
    boundary: Option<PathBuf>,
    #[arg(long)]
    no_timestamp: bool,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct ThresholdArgs {
    /// Comma-separated confidence levels.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// chi2, eq9 or lemma1; every rule whose parameters are known if absent.
    #[arg(long)]
    rule: Option<String>,
    /// Degrees of freedom.
    #[arg(long)]
    k: Option<u32>,
    /// Total number of copies.
    #[arg(long = "n", visible_alias = "copies")]
    #[serde(rename = "n")]
    copies: Option<u64>,
    /// Hilbert-space dimension.
    #[arg(long = "d", visible_alias = "dim")]
    #[serde(rename = "d")]
    dim: Option<usize>,
    /// Take k, N and d from this dataset file.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct SimulateArgs {
    /// Bloch components `a,b,c,...` or a JSON matrix file.
    #[arg(long, allow_hyphen_values = true)]
    state: Option<String>,
    /// Comma-separated Pauli axes, or a dataset file whose measurements are reused.
    #[arg(long)]
    settings: Option<String>,
    /// Shots per setting.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct CoverageArgs {
    #[arg(long, allow_hyphen_values = true)]
    state: Option<String>,
    #[arg(long)]
    settings: Option<String>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_timestamp: bool,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct CcdfArgs {
    /// True state; exclusive with `--grid`.
    #[arg(long, allow_hyphen_values = true)]
    state: Option<String>,
    /// Maximum over the qubit study grid with this many interior points.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    settings: Option<String>,
    #[arg(long)]
    shots: Option<u64>,
    /// Largest number of datasets to enumerate.
    #[arg(long)]
    cap: Option<u128>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct CutoffArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    settings: Option<String>,
    #[arg(long)]
    shots: Option<u64>,
    /// Number of ⟨σ_z⟩ values on [-1, 1].
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    cap: Option<u128>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct ProptArgs {
    /// Number of coin states, evenly spaced in ⟨σ_z⟩.
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    flips: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of random challengers.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// uniform or random.
    #[arg(long)]
    volume: Option<String>,
    /// prior or lr.
    #[arg(long)]
    marginal: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_timestamp: bool,
}

/// Runs the command line `args` (program name first) and returns the exit
/// code. Primary output goes to `stdout` unless redirected with `--out`;
/// failures are reported on `stderr` as one JSON object.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let _ = writeln!(stderr, "{}", json!({ "error": "usage", "message": e.to_string().trim_end() }));
            return EXIT_VALIDATION;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_json(&e));
            exit_code(&e)
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence(_) => EXIT_NON_CONVERGENCE,
        Error::CapExceeded { .. } => EXIT_CAP,
        _ => EXIT_VALIDATION,
    }
}

fn error_json(e: &Error) -> Value {
    let kind = match e {
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::InvalidState(_) => "invalid_state",
        Error::InvalidEffect(_) => "invalid_effect",
        Error::InvalidSetting { .. } => "invalid_setting",
        Error::InvalidDataset(_) => "invalid_dataset",
        Error::InvalidArgument { .. } => "invalid_argument",
        Error::Domain(_) => "domain",
        Error::NonConvergence(_) => "non_convergence",
        Error::CapExceeded { .. } => "cap_exceeded",
        Error::Parse(_) => "parse",
        Error::Io(_) => "io",
    };
    let mut v = json!({ "error": kind, "message": e.to_string(), "exit_code": exit_code(e) });
    if let Error::InvalidArgument { field, .. } = e {
        v["field"] = json!(field);
    }
    v
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let config = cli.config.as_deref().map(load_config).transpose()?;
    let config = config.as_ref();
    match cli.command {
        Command::Analyze(a) => analyze(layered(&a, config)?, stdout),
        Command::Threshold(a) => threshold(layered(&a, config)?, stdout),
        Command::Simulate(a) => simulate(layered(&a, config)?, stdout),
        Command::Coverage(a) => coverage(layered(&a, config)?, stdout),
        Command::Ccdf(a) => ccdf(layered(&a, config)?, stdout),
        Command::Cutoff(a) => cutoff(layered(&a, config)?, stdout),
        Command::Propt(a) => propt(layered(&a, config)?, stdout),
    }
}

fn load_config(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("config: {e}")))?;
    let Value::Object(map) = value else {
        return Err(Error::arg("config", "must be a JSON object"));
    };
    Ok(map.into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect())
}

/// Overlays the flags that were given on top of the config file.
fn layered<T: Serialize + DeserializeOwned + Default>(flags: &T, config: Option<&Map<String, Value>>) -> Result<T> {
    let mut merged = config.cloned().unwrap_or_default();
    if let Ok(Value::Object(known)) = serde_json::to_value(T::default()) {
        if let Some(k) = merged.keys().find(|k| !known.contains_key(*k)) {
            return Err(Error::arg(k, "unknown option in config file"));
        }
    }
    if let Ok(Value::Object(given)) = serde_json::to_value(flags) {
        for (k, v) in given {
            let unset = v.is_null() || v == Value::Bool(false) || v.as_array().is_some_and(|a| a.is_empty());
            if !unset {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::arg("config", e.to_string()))
}

fn alpha_or_default(alpha: Option<f64>) -> Result<f64> {
    let a = alpha.unwrap_or(0.9);
    check_alpha(a)?;
    Ok(a)
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn with_timestamp(mut report: Value, suppress: bool) -> Value {
    if !suppress {
        report["timestamp"] = json!(timestamp());
    }
    report
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, v: &Value, stdout: &mut dyn Write) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    emit(out, &text, stdout)
}

fn read_matrix_file(path: &Path) -> Result<CMatrix> {
    let text = std::fs::read_to_string(path)?;
    let rows: JsonMatrix = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    matrix_from_json(&rows)
}

/// A state given as comma-separated Bloch components or a matrix file.
fn parse_state(spec: &str) -> Result<DensityMatrix> {
    let parts: std::result::Result<Vec<f64>, _> = spec.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match parts {
        Ok(v) => DensityMatrix::from_bloch(&BlochVector::new(v)),
        Err(_) => DensityMatrix::new(read_matrix_file(Path::new(spec))?),
    }
}

fn parse_rule_kind(rule: Option<&str>, default: RuleKind) -> Result<RuleKind> {
    rule.map(RuleKind::parse).transpose().map(|r| r.unwrap_or(default))
}

/// Measurements as Pauli axes or taken from an existing dataset file.
fn parse_settings(spec: &str) -> Result<Vec<Povm>> {
    let path = Path::new(spec);
    if path.is_file() {
        let ds = TomographyDataset::load(path)?;
        return Ok(ds.settings().iter().map(|s| s.povm().clone()).collect());
    }
    spec.split(',').map(pauli_setting).collect()
}

fn plan_from(settings: Option<&str>, default: &str, shots: u64) -> Result<Vec<(Povm, u64)>> {
    if shots < 1 {
        return Err(Error::arg("shots", "must be ≥ 1"));
    }
    Ok(parse_settings(settings.unwrap_or(default))?
        .into_iter()
        .map(|p| (p, shots))
        .collect())
}

/// A dataset with the plan's measurements and shot numbers, for deriving
/// rule parameters.
fn plan_dataset(plan: &[(Povm, u64)]) -> Result<TomographyDataset> {
    let dim = plan.first().ok_or_else(|| Error::arg("settings", "need at least one setting"))?.0.dim();
    let settings = plan
        .iter()
        .map(|(p, shots)| {
            let mut counts = vec![0; p.outcomes()];
            counts[0] = *shots;
            MeasurementSetting::new(p.clone(), counts)
        })
        .collect::<Result<Vec<_>>>()?;
    TomographyDataset::new(dim, settings)
}

fn rule_for(rule: Option<&str>, fixed: Option<f64>, default: RuleKind, ds: &TomographyDataset) -> Result<ThresholdRule> {
    let r = match fixed {
        Some(lambda) => ThresholdRule::Fixed { lambda },
        None => ThresholdRule::for_dataset(parse_rule_kind(rule, default)?, ds)?,
    };
    r.validate()?;
    Ok(r)
}

fn named_observable(spec: &str, dim: usize) -> Result<(String, CMatrix)> {
    let pauli = match spec.trim().to_ascii_lowercase().as_str() {
        "x" | "sx" | "sigma_x" => Some(0),
        "y" | "sy" | "sigma_y" => Some(1),
        "z" | "sz" | "sigma_z" => Some(2),
        _ => None,
    };
    match pauli {
        Some(i) if dim == 2 => Ok((format!("sigma_{}", ["x", "y", "z"][i]), pauli_matrices()[i].clone())),
        Some(_) => Err(Error::arg("observable", format!("Pauli name `{spec}` needs a qubit dataset"))),
        None => {
            let path = Path::new(spec);
            let m = read_matrix_file(path)?;
            if m.nrows() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.nrows(),
                });
            }
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| spec.into());
            Ok((name, m))
        }
    }
}

fn boundary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_boundary.csv"))
}

fn analyze(a: AnalyzeArgs, stdout: &mut dyn Write) -> Result<()> {
    let path = a.dataset.clone().ok_or_else(|| Error::arg("dataset", "a dataset file is required"))?;
    let alpha = alpha_or_default(a.alpha)?;
    let options = a.solver.options()?;
    let samples = a.samples.unwrap_or(200);
    let enclosure = a.enclosure.as_deref().unwrap_or("ellipsoid").to_ascii_lowercase();
    if !matches!(enclosure.as_str(), "ellipsoid" | "ball" | "none") {
        return Err(Error::arg("enclosure", "must be ellipsoid, ball or none"));
    }
    let epsilon = a.epsilon.unwrap_or(1e-4);
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::arg("epsilon", "must be positive"));
    }

    let ds = TomographyDataset::load(&path)?;
    let dim = ds.dim();
    if enclosure != "none" && samples < dim * dim {
        return Err(Error::arg("samples", format!("need at least {} directions for an enclosure", dim * dim)));
    }
    let rule = rule_for(a.rule.as_deref(), a.lambda, RuleKind::Chi2, &ds)?;
    let observables: Vec<(String, CMatrix)> = if a.observable.is_empty() && dim == 2 {
        ["x", "y", "z"].iter().map(|s| named_observable(s, 2)).collect::<Result<_>>()?
    } else {
        a.observable.iter().map(|s| named_observable(s, dim)).collect::<Result<_>>()?
    };
    let probes: Vec<(String, DensityMatrix)> = a
        .contains
        .iter()
        .map(|s| Ok((s.clone(), parse_state(s)?)))
        .collect::<Result<_>>()?;

    let region = RegionSpec::new(ds.clone(), alpha, rule, &options)?;
    let mle = region.mle();
    let intervals = observables
        .iter()
        .map(|(name, x)| {
            let s = region.support_interval(x)?;
            let mut v = serde_json::to_value(s).expect("serializable");
            v["observable"] = json!(name);
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let membership = probes
        .iter()
        .map(|(spec, rho)| {
            let l = region.lambda(rho)?;
            Ok(json!({ "state": spec, "lambda": l, "inside": l <= region.lambda_alpha() }))
        })
        .collect::<Result<Vec<_>>>()?;

    let (enclosure_value, boundary) = match enclosure.as_str() {
        "ellipsoid" => {
            let (e, b) = region.bounding_ellipsoid(samples, epsilon)?;
            (serde_json::to_value(e).expect("serializable"), b)
        }
        "ball" => {
            let (e, b) = region.bounding_ball(samples)?;
            (serde_json::to_value(e).expect("serializable"), b)
        }
        _ => (Value::Null, region.boundary_samples(samples, &[])?),
    };

    let csv_path = if dim == 2 {
        a.boundary.clone().or_else(|| a.out.as_deref().map(boundary_path))
    } else {
        None
    };
    if let Some(p) = &csv_path {
        let mut csv = String::from("direction_x,direction_y,direction_z,bx,by,bz,clipped\n");
        for b in &boundary {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                b.direction[0], b.direction[1], b.direction[2], b.point[0], b.point[1], b.point[2], b.clipped
            ));
        }
        std::fs::write(p, csv)?;
    }

    let mixed = lambda(&ds, &DensityMatrix::maximally_mixed(dim), Some(mle))?;
    let report = json!({
        "command": "analyze",
        "dataset": path.display().to_string(),
        "dimension": dim,
        "total_copies": ds.total_copies(),
        "degrees_of_freedom": degrees_of_freedom(&ds)?,
        "alpha": alpha,
        "rule": rule,
        "lambda_alpha": region.lambda_alpha(),
        "mle": {
            "bloch": mle.rho_mle.bloch().components(),
            "matrix": matrix_to_json(mle.rho_mle.matrix()),
            "loglik_max": mle.loglik_max,
            "iterations": mle.iterations,
            "gradient_residual": mle.gradient_residual,
        },
        "lambda_maximally_mixed": mixed,
        "intervals": intervals,
        "membership": membership,
        "enclosure": enclosure_value,
        "boundary_samples": boundary.len(),
        "boundary_clipped": boundary.iter().filter(|b| b.clipped).count(),
        "boundary_csv": csv_path.map(|p| p.display().to_string()),
    });
    emit_json(a.out.as_deref(), &with_timestamp(report, a.no_timestamp), stdout)
}

fn threshold(a: ThresholdArgs, stdout: &mut dyn Write) -> Result<()> {
    let alphas = if a.alpha.is_empty() { vec![0.9] } else { a.alpha.clone() };
    for &al in &alphas {
        check_alpha(al)?;
    }
    let (mut k, mut copies, mut dim) = (a.k, a.copies, a.dim);
    if let Some(p) = &a.dataset {
        let ds = TomographyDataset::load(p)?;
        k = k.or(Some(degrees_of_freedom(&ds)?));
        copies = copies.or(Some(ds.total_copies()));
        dim = dim.or(Some(ds.dim()));
    }
    let kinds = match a.rule.as_deref() {
        Some(r) => vec![RuleKind::parse(r)?],
        None => {
            let mut v = Vec::new();
            if k.is_some() {
                v.extend([RuleKind::Chi2, RuleKind::Eq9]);
            }
            if copies.is_some() && dim.is_some() {
                v.push(RuleKind::Lemma1);
            }
            if v.is_empty() {
                return Err(Error::arg("k", "give --k, or --n and --d, or --dataset"));
            }
            v
        }
    };
    let mut csv = String::from("rule,k,N,d,alpha,lambda_alpha\n");
    for kind in kinds {
        let rule = match kind {
            RuleKind::Chi2 => ThresholdRule::ChiSquare {
                k: k.ok_or_else(|| Error::arg("k", "required for chi2"))?,
            },
            RuleKind::Eq9 => ThresholdRule::Eq9Bound {
                k: k.ok_or_else(|| Error::arg("k", "required for eq9"))?,
            },
            RuleKind::Lemma1 => ThresholdRule::Lemma1 {
                copies: copies.ok_or_else(|| Error::arg("n", "required for lemma1"))?,
                dim: dim.ok_or_else(|| Error::arg("d", "required for lemma1"))?,
            },
        };
        rule.validate()?;
        let (kc, nc, dc) = match rule {
            ThresholdRule::Lemma1 { copies, dim } => (String::new(), copies.to_string(), dim.to_string()),
            ThresholdRule::ChiSquare { k } | ThresholdRule::Eq9Bound { k } => (k.to_string(), String::new(), String::new()),
            ThresholdRule::Fixed { .. } => unreachable!("not selectable by name"),
        };
        for &al in &alphas {
            let l = solve_threshold(&rule, al)?;
            csv.push_str(&format!("{},{kc},{nc},{dc},{al},{l}\n", rule.name()));
        }
    }
    emit(a.out.as_deref(), &csv, stdout)
}

fn simulate(a: SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let rho = parse_state(a.state.as_deref().ok_or_else(|| Error::arg("state", "a true state is required"))?)?;
    let plan = plan_from(a.settings.as_deref(), "x,y,z", a.shots.unwrap_or(20))?;
    let ds = crate::simulate_dataset(&rho, &plan, a.seed.unwrap_or(0))?;
    let mut text = ds.to_json_string();
    text.push('\n');
    emit(a.out.as_deref(), &text, stdout)
}

fn coverage(a: CoverageArgs, stdout: &mut dyn Write) -> Result<()> {
    let alpha = alpha_or_default(a.alpha)?;
    let options = a.solver.options()?;
    let rho = parse_state(a.state.as_deref().ok_or_else(|| Error::arg("state", "a true state is required"))?)?;
    let plan = plan_from(a.settings.as_deref(), "x,y,z", a.shots.unwrap_or(20))?;
    let rule = rule_for(a.rule.as_deref(), a.lambda, RuleKind::Eq9, &plan_dataset(&plan)?)?;
    let trials = a.trials.unwrap_or(1000);
    let seed = a.seed.unwrap_or(0);
    let r = coverage_mc(&rho, &plan, &rule, alpha, trials, seed, &options)?;
    let mut report = serde_json::to_value(&r).expect("serializable");
    report["command"] = json!("coverage");
    report["shots"] = json!(plan.iter().map(|p| p.1).collect::<Vec<_>>());
    report["settings"] = json!(plan.iter().map(|p| p.0.name().to_string()).collect::<Vec<_>>());
    report["half_width"] = json!(r.half_width());
    emit_json(a.out.as_deref(), &with_timestamp(report, a.no_timestamp), stdout)
}

fn ccdf(a: CcdfArgs, stdout: &mut dyn Write) -> Result<()> {
    let options = a.solver.options()?;
    let states: Vec<DensityMatrix> = match (&a.state, a.grid) {
        (Some(s), None) => vec![parse_state(s)?],
        (None, Some(n)) => qubit_state_grid(n),
        _ => return Err(Error::arg("state", "give exactly one of --state and --grid")),
    };
    let plan = plan_from(a.settings.as_deref(), "x,y,z", a.shots.unwrap_or(10))?;
    let ensemble = ExhaustiveEnsemble::new(&plan, a.cap.unwrap_or(DEFAULT_CAP), &options)?;
    let curves = states.iter().map(|s| ensemble.ccdf(s)).collect::<Result<Vec<_>>>()?;
    let curve = if curves.len() == 1 {
        curves.into_iter().next().expect("one curve")
    } else {
        let mut xs: Vec<f64> = curves.iter().flat_map(|c| c.points().iter().map(|p| p.0)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let points = xs
            .iter()
            .map(|&x| (x, curves.iter().map(|c| c.evaluate(x)).fold(0.0, f64::max)))
            .collect();
        CcdfCurve::new(points, Provenance::Exhaustive)?
    };
    emit(a.out.as_deref(), &curve.to_csv(), stdout)
}

fn cutoff(a: CutoffArgs, stdout: &mut dyn Write) -> Result<()> {
    let alpha = alpha_or_default(a.alpha)?;
    let options = a.solver.options()?;
    let points = a.points.unwrap_or(21);
    if points < 1 {
        return Err(Error::arg("points", "must be ≥ 1"));
    }
    let plan = plan_from(a.settings.as_deref(), "z", a.shots.unwrap_or(60))?;
    if plan.iter().any(|p| p.0.dim() != 2) {
        return Err(Error::arg("settings", "the ⟨σ_z⟩ scan needs qubit measurements"));
    }
    let ensemble = ExhaustiveEnsemble::new(&plan, a.cap.unwrap_or(DEFAULT_CAP), &options)?;
    let mut csv = String::from("expectation_z,cutoff\n");
    for z in linspace_unit(points) {
        let rho = DensityMatrix::from_bloch(&BlochVector::new(vec![0.0, 0.0, z]))?;
        csv.push_str(&format!("{z},{}\n", ensemble.cutoff(&rho, alpha)?));
    }
    emit(a.out.as_deref(), &csv, stdout)
}

fn propt(a: ProptArgs, stdout: &mut dyn Write) -> Result<()> {
    let alpha = alpha_or_default(a.alpha)?;
    let n = a.states.unwrap_or(21);
    if n < 2 {
        return Err(Error::arg("states", "must be ≥ 2"));
    }
    let flips = a.flips.unwrap_or(10);
    if flips < 1 {
        return Err(Error::arg("flips", "must be ≥ 1"));
    }
    let challengers = a.trials.unwrap_or(50);
    let seed = a.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = DiscreteModel::coin(n, flips)?;
    match a.volume.as_deref().unwrap_or("uniform") {
        "uniform" => {}
        "random" => {
            let v = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
            model = model.with_volume(v)?;
        }
        other => return Err(Error::arg("volume", format!("unknown weighting `{other}` (uniform|random)"))),
    }
    match a.marginal.as_deref().unwrap_or("prior") {
        "prior" => {}
        "lr" => model = model.clone().with_marginal(model.lr_marginal())?,
        other => return Err(Error::arg("marginal", format!("unknown measure `{other}` (prior|lr)"))),
    }

    let pr = pr_assignment(&model, alpha)?;
    let regions: Vec<Value> = (0..model.datasets())
        .map(|j| {
            let idx = pr.region(j);
            json!({
                "dataset": j,
                "heads": j,
                "marginal": model.marginal()[j],
                "state_indices": idx,
                "states": idx.iter().map(|&i| model.states()[i]).collect::<Vec<_>>(),
            })
        })
        .collect();
    let coverage: Vec<f64> = (0..n).map(|i| pr.coverage(&model, i)).collect();

    let compare = |label: &str, c: &crate::studies::Assignment| -> Result<Value> {
        let cmp = pr_optimality_check(&model, alpha, c)?;
        Ok(json!({ "challenger": label, "comparison": cmp }))
    };
    let mut results = vec![compare("always_everything", &always_everything(&model))?];
    let (lr, lr_cutoff) = lr_assignment(&model, alpha)?;
    results.push(compare("likelihood_ratio", &lr)?);
    for k in 0..challengers {
        let (label, c) = if k % 2 == 0 {
            ("random_order", random_challenger(&model, alpha, &mut rng))
        } else {
            ("perturbed_ratio", perturbed_pr_challenger(&model, alpha, 0.5, &mut rng))
        };
        results.push(compare(label, &c)?);
    }
    let beaten: Vec<&Value> = results
        .iter()
        .filter(|r| r["comparison"]["pr_not_worse"] == Value::Bool(false))
        .collect();
    let report = json!({
        "command": "propt",
        "alpha": alpha,
        "states": model.states(),
        "flips": flips,
        "seed": seed,
        "volume": model.volume(),
        "marginal_override": model.has_marginal_override(),
        "regions": regions,
        "coverage": coverage,
        "coverage_ok": pr.check_coverage(&model, alpha).is_ok(),
        "pr_volume": pr.average_volume(&model),
        "lr_cutoff": lr_cutoff,
        "challengers": results.len(),
        "beaten_by": beaten.len(),
        "comparisons": results,
    });
    emit_json(a.out.as_deref(), &with_timestamp(report, a.no_timestamp), stdout)
}
