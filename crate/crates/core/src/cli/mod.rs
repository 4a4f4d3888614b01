//! Command-line front end.

mod manifest;

pub use manifest::RunManifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::case::{load_case, PowerCase};
use crate::config::{load_config, LpBackendKind, SigmaSMode, StudyConfig};
use crate::error::{Error, Result};
use crate::model::SafetyRule;
use crate::risk::Family;
use crate::study::{
    compare, default_workers, num, run_dispatch, run_sweep, sweep_csv, sweep_timing_csv, validate,
    validate_dispatch, Formulation, MomentProtocol, SweepOptions, SweepSpec, ValidationOptions, Variant,
};

#[derive(Debug, Parser)]
#[command(name = "grcc", version, about = "Robust chance-constrained real-time dispatch")]
pub struct Cli {
    /// Worker threads for sampling and sweeps.
    #[arg(long, global = true, env = "GRCC_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one dispatch and certify it.
    Solve(SolveArgs),
    /// Solve the RLT relaxation and the cone model side by side.
    Compare(Common),
    /// Grid over γ₁, γ₂ or the number of wind farms.
    Sweep(SweepArgs),
    /// Monte Carlo violation probabilities of the benchmark variants.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SigmaSFlag {
    /// Σ_s = trace(Σ₀)
    #[value(name = "paper")]
    Trace,
    Full,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub case: PathBuf,
    /// Study config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub backend: Option<LpBackendKind>,
    #[arg(long, value_enum)]
    pub sigma_s_mode: Option<SigmaSFlag>,
    /// Output directory; the JSON report goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = Formulation::Rlt)]
    pub formulation: Formulation,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exit with the certification code unless the dispatch certifies.
    #[arg(long)]
    pub require_certified: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// `gamma1=0,0.1,0.2;gamma2=1.1` or `wind=3..15:3`.
    #[arg(long)]
    pub sweep: String,
    #[arg(long, value_enum, default_value_t = Formulation::Rlt)]
    pub formulation: Formulation,
    /// Monte Carlo samples per point; 0 skips risk estimation.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = Family::Gaussian)]
    pub family: Family,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Repeat for several families; all three when omitted.
    #[arg(long, value_enum)]
    pub family: Vec<Family>,
    /// Repeat for several variants; all five when omitted.
    #[arg(long, value_enum)]
    pub variant: Vec<Variant>,
    #[arg(long, value_enum, default_value_t = MomentProtocol::Nominal)]
    pub protocol: MomentProtocol,
    #[arg(long, value_enum, default_value_t = Formulation::Cone)]
    pub formulation: Formulation,
    /// Evaluate this dispatch (a solve report or `{"p": [...], "alpha": [...]}`)
    /// instead of solving the variants.
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let workers = cli.workers.filter(|&n| n > 0).unwrap_or_else(default_workers);
    // Fails only if a pool already exists, e.g. under a test harness.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(&cli.command, workers, &argv) {
        Ok(code) => code,
        Err(e) => {
            let cat = e.category();
            eprintln!("error [{}]: {e}", cat.as_str());
            cat.exit_code()
        }
    }
}

fn load_inputs(c: &Common) -> Result<(PowerCase, StudyConfig)> {
    let case = load_case(&c.case)?;
    let mut cfg = match &c.config {
        Some(p) => load_config(p, &case)?,
        None => StudyConfig::defaults_for(&case),
    };
    if let Some(b) = c.backend {
        cfg.solver.backend = b;
    }
    if let Some(m) = c.sigma_s_mode {
        cfg.sigma_s_mode = match m {
            SigmaSFlag::Trace => SigmaSMode::Trace,
            SigmaSFlag::Full => SigmaSMode::FullCovariance,
        };
    }
    Ok((case, cfg))
}

fn backend_id(cfg: &StudyConfig, f: Formulation) -> String {
    match f {
        Formulation::Cone => "cone".into(),
        Formulation::Rlt => match cfg.solver.backend {
            LpBackendKind::Highs => "highs".into(),
            LpBackendKind::Clarabel => "clarabel".into(),
        },
    }
}

pub fn run(cmd: &Command, workers: usize, argv: &[String]) -> Result<i32> {
    match cmd {
        Command::Solve(a) => cmd_solve(a, argv),
        Command::Compare(c) => cmd_compare(c, argv),
        Command::Sweep(a) => cmd_sweep(a, workers, argv),
        Command::Validate(a) => cmd_validate(a, argv),
    }
}

fn cmd_solve(a: &SolveArgs, argv: &[String]) -> Result<i32> {
    let mut m = RunManifest::start("solve", &a.common, Some(a.seed), argv);
    let (case, cfg) = load_inputs(&a.common)?;
    m.backend = backend_id(&cfg, a.formulation);
    let (prep, d) = run_dispatch(&case, &cfg, SafetyRule::Robust, a.formulation)?;
    m.finish();
    let report = json!({
        "manifest": m,
        "dispatch": d,
        "warnings": prep.ann.warnings,
    });
    let files = if d.is_optimal() {
        vec![("dispatch.csv", dispatch_csv(&prep.case, &d.p, &d.alpha)?)]
    } else {
        Vec::new()
    };
    emit(&a.common.out, &report, &files)?;
    d.require_optimal()?;
    if a.require_certified {
        if let Some(c) = d.certification.as_ref().filter(|c| !c.passed) {
            return Err(Error::Certification {
                max_violation: c.max_violation,
                worst: c.worst.clone().unwrap_or_default(),
            });
        }
    }
    Ok(0)
}

fn cmd_compare(c: &Common, argv: &[String]) -> Result<i32> {
    let mut m = RunManifest::start("compare", c, None, argv);
    let (case, cfg) = load_inputs(c)?;
    m.backend = format!("{}+cone", backend_id(&cfg, Formulation::Rlt));
    let cmp = compare(&case, &cfg)?;
    m.finish();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "cost", "time"]).map_err(csv_err)?;
    for row in &cmp.table {
        w.write_record([row.model.clone(), num(row.cost), num(Some(row.time))])
            .map_err(csv_err)?;
    }
    let table = into_string(w)?;
    emit(&c.out, &json!({ "manifest": m, "comparison": cmp }), &[("compare.csv", table)])?;
    cmp.lp.require_optimal()?;
    cmp.cone.require_optimal()?;
    Ok(0)
}

fn cmd_sweep(a: &SweepArgs, workers: usize, argv: &[String]) -> Result<i32> {
    let mut m = RunManifest::start("sweep", &a.common, Some(a.seed), argv);
    let (case, cfg) = load_inputs(&a.common)?;
    let spec = SweepSpec::parse(&a.sweep, (cfg.gamma1, cfg.gamma2))?;
    m.backend = backend_id(&cfg, a.formulation);
    let opts = SweepOptions {
        formulation: a.formulation,
        family: a.family,
        samples: a.samples,
        seed: a.seed,
        workers,
    };
    let points = run_sweep(&case, &cfg, &spec, &opts)?;
    m.finish();
    let files = [("sweep.csv", sweep_csv(&points)?), ("sweep_timing.csv", sweep_timing_csv(&points)?)];
    emit(&a.common.out, &json!({ "manifest": m, "spec": spec, "points": points }), &files)?;
    Ok(0)
}

fn cmd_validate(a: &ValidateArgs, argv: &[String]) -> Result<i32> {
    let mut m = RunManifest::start("validate", &a.common, Some(a.seed), argv);
    let (case, cfg) = load_inputs(&a.common)?;
    m.backend = backend_id(&cfg, a.formulation);
    let opts = ValidationOptions {
        variants: if a.variant.is_empty() { Variant::ALL.to_vec() } else { a.variant.clone() },
        families: if a.family.is_empty() { Family::ALL.to_vec() } else { a.family.clone() },
        samples: a.samples,
        seed: a.seed,
        protocol: a.protocol,
        formulation: a.formulation,
    };
    if let Some(path) = &a.solution {
        let x = read_solution(path)?;
        let reports = validate_dispatch(&case, &cfg, &x, &opts)?;
        m.finish();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["family", "constraint", "violations", "probability", "std_error"])
            .map_err(csv_err)?;
        for r in &reports {
            for c in &r.constraints {
                w.write_record([
                    r.family.to_string(),
                    c.constraint.clone(),
                    c.violations.to_string(),
                    num(Some(c.probability)),
                    num(Some(c.std_error)),
                ])
                .map_err(csv_err)?;
            }
        }
        let csv = into_string(w)?;
        emit(&a.common.out, &json!({ "manifest": m, "reports": reports }), &[("risk_constraints.csv", csv)])?;
        return Ok(0);
    }
    let grid = validate(&case, &cfg, &opts)?;
    m.finish();
    let files = [("risk_grid.csv", grid.to_csv()?), ("risk_constraints.csv", grid.constraints_csv()?)];
    emit(&a.common.out, &json!({ "manifest": m, "grid": grid }), &files)?;
    Ok(0)
}

fn read_solution(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Syntax {
        line: e.line(),
        message: e.to_string(),
    })?;
    let root = v.get("dispatch").unwrap_or(&v);
    let list = |key: &str| -> Result<Vec<f64>> {
        root.get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| Error::semantic(format!("solution.{key}"), "missing numeric array"))?
            .iter()
            .enumerate()
            .map(|(i, x)| x.as_f64().ok_or_else(|| Error::semantic(format!("solution.{key}[{i}]"), "not a number")))
            .collect()
    };
    let mut x = list("p")?;
    x.extend(list("alpha")?);
    Ok(x)
}

fn dispatch_csv(case: &PowerCase, p: &[f64], alpha: &[f64]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["generator", "bus", "p", "alpha"]).map_err(csv_err)?;
    for (i, g) in case.generators.iter().enumerate() {
        w.write_record([
            i.to_string(),
            g.bus.to_string(),
            num(p.get(i).copied()),
            num(alpha.get(i).copied()),
        ])
        .map_err(csv_err)?;
    }
    into_string(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Solver(format!("csv: {e}"))
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Solver(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Write `report.json` and the CSV tables under `out`, or print the report.
fn emit(out: &Option<PathBuf>, report: &impl Serialize, files: &[(&str, String)]) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Solver(format!("json: {e}")))?;
    let Some(dir) = out else {
        println!("{text}");
        return Ok(());
    };
    let io = |path: &Path, source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = dir.join("report.json");
    std::fs::write(&path, text + "\n").map_err(|e| io(&path, e))?;
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
    }
    Ok(())
}
