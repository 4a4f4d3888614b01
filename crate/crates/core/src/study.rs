//! End-to-end studies: one dispatch, LP-versus-cone comparison, benchmark
//! variants under Monte Carlo validation, and parameter sweeps.

use std::fmt;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::case::PowerCase;
use crate::config::{SolverSettings, StudyConfig};
use crate::error::{Error, Result};
use crate::model::{assemble_with, AssemblyOptions, ModelAnnotations, QcqpModel, SafetyRule};
use crate::network::{build_shift_factors, ShiftFactors};
use crate::risk::{estimate_risk, perturb_moments, sample_scenarios, Family, RiskReport, ShiftDirection};
use crate::rlt::{lift, LiftOptions};
use crate::solver::{
    backend_for, certify, deterministic_dc_dispatch, solve_cone_reference, solve_lifted,
    CertifyReport, SolveOptions, SolveResult, SolveStatus,
};

/// Tolerance used when certifying an extracted dispatch.
pub const CERTIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// RLT linear relaxation of the squared line rows.
    Rlt,
    /// Line rows kept as second-order cones.
    Cone,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Rlt => "rlt",
            Formulation::Cone => "cone",
        })
    }
}

/// A case with its config applied, shift factors, and the assembled model.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub case: PowerCase,
    pub cfg: StudyConfig,
    pub sf: ShiftFactors,
    pub model: QcqpModel,
    pub ann: ModelAnnotations,
    pub assemble_time: f64,
}

pub fn prepare(case: &PowerCase, cfg: &StudyConfig, safety: SafetyRule) -> Result<Prepared> {
    let start = Instant::now();
    cfg.validate(case)?;
    let case = cfg.apply_to(case);
    case.validate()?;
    let slack = cfg
        .slack_for(&case)
        .ok_or_else(|| Error::semantic("slack_bus", "the case has no slack bus and none is configured"))?;
    let sf = build_shift_factors(&case, slack)?;
    let opts = AssemblyOptions {
        safety,
        side_cuts: cfg.solver.side_cuts,
    };
    let (model, ann) = assemble_with(&case, &sf, cfg, &opts)?;
    Ok(Prepared {
        case,
        cfg: cfg.clone(),
        sf,
        model,
        ann,
        assemble_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpSize {
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Timings {
    pub assemble: f64,
    pub lift: f64,
    pub solve: f64,
    pub certify: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dispatch {
    pub formulation: Formulation,
    pub backend: String,
    pub status: SolveStatus,
    pub detail: String,
    /// Z: the LP bound on the RLT path, the model objective on the cone path.
    pub objective: Option<f64>,
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
    pub rank1_gap: Option<f64>,
    pub lp_size: Option<LpSize>,
    pub certification: Option<CertifyReport>,
    pub timings: Timings,
    pub notes: Vec<String>,
}

impl Dispatch {
    pub fn x(&self) -> Vec<f64> {
        self.p.iter().chain(&self.alpha).copied().collect()
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn certified(&self) -> bool {
        self.certification.as_ref().is_some_and(|c| c.passed)
    }

    /// Error out unless the solve reached optimality.
    pub fn require_optimal(&self) -> Result<()> {
        if self.is_optimal() {
            Ok(())
        } else {
            Err(Error::Solver(format!(
                "{} returned {:?} ({})",
                self.backend, self.status, self.detail
            )))
        }
    }
}

pub fn solve_prepared(prep: &Prepared, formulation: Formulation, settings: &SolverSettings) -> Result<Dispatch> {
    let opts = SolveOptions::from(settings);
    let ng = prep.model.n_gen;
    let mut timings = Timings {
        assemble: prep.assemble_time,
        ..Timings::default()
    };
    let (res, rank1_gap, lp_size, notes): (SolveResult, _, _, Vec<String>) = match formulation {
        Formulation::Rlt => {
            let t = Instant::now();
            let lifted = lift(
                &prep.model,
                &LiftOptions {
                    dedup_diagonal: settings.dedup_diagonal,
                },
            )?;
            timings.lift = t.elapsed().as_secs_f64();
            let size = LpSize {
                rows: lifted.lp.n_rows(),
                cols: lifted.lp.n_cols(),
                nnz: lifted.lp.nnz(),
            };
            let backend = backend_for(settings.backend);
            let (mut res, sol) = solve_lifted(&lifted, backend.as_ref(), &opts)?;
            let gap = sol.as_ref().map(|s| s.rank1_gap);
            if let Some(sol) = sol {
                res.x = Some(sol.x);
                res.objective = Some(sol.objective);
            }
            (res, gap, Some(size), Vec::new())
        }
        Formulation::Cone => {
            let sol = solve_cone_reference(&prep.model, &prep.ann, &opts)?;
            (sol.result, None, None, sol.notes)
        }
    };
    timings.solve = res.solve_time;

    let (p, alpha, certification) = match &res.x {
        Some(x) => {
            let t = Instant::now();
            let rep = certify(x, &prep.model, &prep.ann, CERTIFY_TOL);
            timings.certify = t.elapsed().as_secs_f64();
            (x[..ng].to_vec(), x[ng..].to_vec(), Some(rep))
        }
        None => (Vec::new(), Vec::new(), None),
    };
    timings.total = timings.assemble + timings.lift + timings.solve + timings.certify;
    let mut notes = notes;
    notes.extend(prep.ann.warnings.iter().cloned());
    Ok(Dispatch {
        formulation,
        backend: res.backend,
        status: res.status,
        detail: res.detail,
        objective: res.objective,
        p,
        alpha,
        rank1_gap,
        lp_size,
        certification,
        timings,
        notes,
    })
}

/// Prepare and solve in one call, with the config's own solver settings.
pub fn run_dispatch(
    case: &PowerCase,
    cfg: &StudyConfig,
    safety: SafetyRule,
    formulation: Formulation,
) -> Result<(Prepared, Dispatch)> {
    let prep = prepare(case, cfg, safety)?;
    let d = solve_prepared(&prep, formulation, &cfg.solver)?;
    Ok((prep, d))
}

/// The config with the forecast-error moments zeroed.
pub fn without_uncertainty(cfg: &StudyConfig) -> StudyConfig {
    let nw = cfg.mu0.len();
    StudyConfig {
        mu0: vec![0.0; nw],
        sigma0: DMatrix::zeros(nw, nw),
        ..cfg.clone()
    }
}

/// Deterministic DC dispatch of the case with the config applied.
pub fn dc_reference(case: &PowerCase, cfg: &StudyConfig) -> Result<SolveResult> {
    let prep = prepare(case, &without_uncertainty(cfg), SafetyRule::Robust)?;
    deterministic_dc_dispatch(&prep.case, &prep.sf, &SolveOptions::from(&cfg.solver))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostTimeRow {
    pub model: String,
    pub cost: Option<f64>,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub lp: Dispatch,
    pub cone: Dispatch,
    /// Z_cone − Z_LP.
    pub gap_abs: Option<f64>,
    pub gap_rel: Option<f64>,
    /// Z_LP ≤ Z_cone + 1e-6.
    pub relaxation_holds: Option<bool>,
    pub lp_certified: bool,
    /// Two rows, cost and computation time per formulation.
    pub table: Vec<CostTimeRow>,
}

pub fn compare(case: &PowerCase, cfg: &StudyConfig) -> Result<Comparison> {
    let prep = prepare(case, cfg, SafetyRule::Robust)?;
    let lp = solve_prepared(&prep, Formulation::Rlt, &cfg.solver)?;
    let cone = solve_prepared(&prep, Formulation::Cone, &cfg.solver)?;
    let (gap_abs, gap_rel, holds) = match (lp.objective, cone.objective) {
        (Some(zl), Some(zc)) => (
            Some(zc - zl),
            Some((zc - zl) / zc.abs()),
            Some(zl <= zc + 1e-6),
        ),
        _ => (None, None, None),
    };
    let table = vec![
        CostTimeRow {
            model: "rlt-lp".into(),
            cost: lp.objective,
            time: lp.timings.total,
        },
        CostTimeRow {
            model: "cone".into(),
            cost: cone.objective,
            time: cone.timings.total,
        },
    ];
    Ok(Comparison {
        lp_certified: lp.certified(),
        lp,
        cone,
        gap_abs,
        gap_rel,
        relaxation_holds: holds,
        table,
    })
}

/// Benchmark models of the validation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Uncertainty ignored: μ₀ = 0, Σ₀ = 0 in the model.
    RiskNeutral,
    /// k = Φ⁻¹(1−ε) in place of the moment-robust factor.
    GaussianAssumption,
    /// γ₁ = 0, γ₂ = 1.
    Grcc1,
    /// γ₁ = 0.1, γ₂ = 1.1.
    Grcc2,
    /// γ₁ = 0.2, γ₂ = 1.1.
    Grcc3,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::RiskNeutral,
        Variant::GaussianAssumption,
        Variant::Grcc1,
        Variant::Grcc2,
        Variant::Grcc3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::RiskNeutral => "risk_neutral",
            Variant::GaussianAssumption => "gaussian_assumption",
            Variant::Grcc1 => "grcc1",
            Variant::Grcc2 => "grcc2",
            Variant::Grcc3 => "grcc3",
        }
    }

    /// The model config and safety rule for this variant.
    pub fn configure(self, base: &StudyConfig) -> (StudyConfig, SafetyRule) {
        match self {
            Variant::RiskNeutral => (without_uncertainty(base), SafetyRule::Robust),
            Variant::GaussianAssumption => (base.with_gammas(0.1, 1.1), SafetyRule::Gaussian),
            Variant::Grcc1 => (base.with_gammas(0.0, 1.0), SafetyRule::Robust),
            Variant::Grcc2 => (base.with_gammas(0.1, 1.1), SafetyRule::Robust),
            Variant::Grcc3 => (base.with_gammas(0.2, 1.1), SafetyRule::Robust),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which moments the validation scenarios are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MomentProtocol {
    /// μ = μ₀, Σ = Σ₀.
    #[default]
    Nominal,
    /// A random boundary point of the base config's ambiguity set.
    Perturbed,
}

/// True moments of the validation scenarios.
pub fn true_moments(
    cfg: &StudyConfig,
    protocol: MomentProtocol,
    seed: u64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    match protocol {
        MomentProtocol::Nominal => Ok((DVector::from_column_slice(&cfg.mu0), cfg.sigma0.clone())),
        MomentProtocol::Perturbed => {
            let amb = cfg.ambiguity();
            let dir = if amb.gamma1 > 0.0 {
                ShiftDirection::Random
            } else {
                ShiftDirection::Zero
            };
            perturb_moments(&amb, &dir, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    pub variants: Vec<Variant>,
    pub families: Vec<Family>,
    pub samples: usize,
    pub seed: u64,
    pub protocol: MomentProtocol,
    pub formulation: Formulation,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            variants: Variant::ALL.to_vec(),
            families: Family::ALL.to_vec(),
            samples: 10_000,
            seed: 0,
            protocol: MomentProtocol::Nominal,
            formulation: Formulation::Cone,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantRun {
    pub variant: String,
    pub dispatch: Dispatch,
    /// One report per family, in `families` order.
    pub risk: Vec<RiskReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationGrid {
    pub protocol: MomentProtocol,
    pub families: Vec<Family>,
    pub true_mu: Vec<f64>,
    pub true_sigma: Vec<Vec<f64>>,
    pub runs: Vec<VariantRun>,
}

impl ValidationGrid {
    pub fn cell(&self, variant: Variant, family: Family) -> Option<&RiskReport> {
        let f = self.families.iter().position(|&g| g == family)?;
        self.runs
            .iter()
            .find(|r| r.variant == variant.as_str())
            .and_then(|r| r.risk.get(f))
    }

    /// Rows = families, columns = variants, cells = max violation
    /// probability; a final `cost` row holds each variant's Z.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["family".to_string()];
        header.extend(self.runs.iter().map(|r| r.variant.clone()));
        w.write_record(&header).map_err(csv_err)?;
        for (f, family) in self.families.iter().enumerate() {
            let mut row = vec![family.to_string()];
            row.extend(self.runs.iter().map(|r| num(r.risk.get(f).map(|x| x.max_violation))));
            w.write_record(&row).map_err(csv_err)?;
        }
        let mut cost = vec!["cost".to_string()];
        cost.extend(self.runs.iter().map(|r| num(r.dispatch.objective)));
        w.write_record(&cost).map_err(csv_err)?;
        finish_csv(w)
    }

    /// Long format: every constraint of every cell.
    pub fn constraints_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["variant", "family", "constraint", "violations", "probability", "std_error"])
            .map_err(csv_err)?;
        for run in &self.runs {
            for rep in &run.risk {
                for c in &rep.constraints {
                    w.write_record([
                        run.variant.clone(),
                        rep.family.to_string(),
                        c.constraint.clone(),
                        c.violations.to_string(),
                        num(Some(c.probability)),
                        num(Some(c.std_error)),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        finish_csv(w)
    }
}

pub(crate) fn num(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:?}"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Solver(format!("csv: {e}"))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Solver(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Solve every variant and evaluate it under every family. Scenario sets
/// are shared across variants, so the columns are compared on common
/// random numbers.
pub fn validate(case: &PowerCase, cfg: &StudyConfig, opts: &ValidationOptions) -> Result<ValidationGrid> {
    let (mu, sigma) = true_moments(cfg, opts.protocol, opts.seed)?;
    let sets = opts
        .families
        .iter()
        .map(|&f| sample_scenarios(f, &mu, &sigma, opts.samples, opts.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::new();
    for &variant in &opts.variants {
        let (vcfg, safety) = variant.configure(cfg);
        let (prep, dispatch) = run_dispatch(case, &vcfg, safety, opts.formulation)?;
        dispatch.require_optimal()?;
        let x = dispatch.x();
        let risk = sets
            .iter()
            .map(|s| estimate_risk(&x, s, &prep.case, &prep.sf))
            .collect::<Result<Vec<_>>>()?;
        runs.push(VariantRun {
            variant: variant.as_str().to_string(),
            dispatch,
            risk,
        });
    }
    Ok(ValidationGrid {
        protocol: opts.protocol,
        families: opts.families.clone(),
        true_mu: mu.iter().copied().collect(),
        true_sigma: sigma.row_iter().map(|r| r.iter().copied().collect()).collect(),
        runs,
    })
}

/// Evaluate a given dispatch (p, α) under the chosen families.
pub fn validate_dispatch(
    case: &PowerCase,
    cfg: &StudyConfig,
    x: &[f64],
    opts: &ValidationOptions,
) -> Result<Vec<RiskReport>> {
    let prep = prepare(case, cfg, SafetyRule::Robust)?;
    let (mu, sigma) = true_moments(cfg, opts.protocol, opts.seed)?;
    opts.families
        .iter()
        .map(|&f| {
            let set = sample_scenarios(f, &mu, &sigma, opts.samples, opts.seed)?;
            estimate_risk(x, &set, &prep.case, &prep.sf)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepSpec {
    /// Every (γ₁, γ₂) pair of the two lists.
    Gammas { gamma1: Vec<f64>, gamma2: Vec<f64> },
    /// Wind-farm counts, farms taken in order from the scaling bus list.
    Wind { counts: Vec<usize> },
}

impl SweepSpec {
    /// `gamma1=0,0.1,0.2;gamma2=1.1` or `wind=3,6,9` or `wind=3..15` (step
    /// with `wind=3..15:3`). An unset γ list falls back to `defaults`.
    pub fn parse(text: &str, defaults: (f64, f64)) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::Usage("empty sweep".into()));
        }
        let mut gamma1 = None;
        let mut gamma2 = None;
        let mut wind = None;
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, values) = part
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("sweep term `{part}` is not key=values")))?;
            match key.trim() {
                "gamma1" => gamma1 = Some(float_list(values)?),
                "gamma2" => gamma2 = Some(float_list(values)?),
                "wind" => wind = Some(count_list(values)?),
                other => return Err(Error::Usage(format!("unknown sweep parameter `{other}`"))),
            }
        }
        match (wind, gamma1, gamma2) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(Error::Usage(
                "sweep either γ or wind farms, not both".into(),
            )),
            (Some(counts), None, None) => Ok(SweepSpec::Wind { counts }),
            (None, None, None) => Err(Error::Usage("empty sweep".into())),
            (None, g1, g2) => Ok(SweepSpec::Gammas {
                gamma1: g1.unwrap_or_else(|| vec![defaults.0]),
                gamma2: g2.unwrap_or_else(|| vec![defaults.1]),
            }),
        }
    }
}

fn float_list(s: &str) -> Result<Vec<f64>> {
    let v = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("`{t}` is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(Error::Usage("empty value list".into()));
    }
    Ok(v)
}

fn count_list(s: &str) -> Result<Vec<usize>> {
    let bad = |t: &str| Error::Usage(format!("`{t}` is not a wind-farm count"));
    let s = s.trim();
    if let Some((a, rest)) = s.split_once("..") {
        let (b, step) = rest.split_once(':').unwrap_or((rest, "1"));
        let a: usize = a.trim().parse().map_err(|_| bad(a))?;
        let b: usize = b.trim().parse().map_err(|_| bad(b))?;
        let step: usize = step.trim().parse().map_err(|_| bad(step))?;
        if step == 0 || b < a {
            return Err(Error::Usage(format!("bad range `{s}`")));
        }
        return Ok((a..=b).step_by(step).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| bad(t)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub formulation: Formulation,
    /// Evaluate each point's dispatch under this family when `samples > 0`.
    pub family: Family,
    pub samples: usize,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub label: String,
    pub gamma1: f64,
    pub gamma2: f64,
    pub n_wind: usize,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub certified: bool,
    pub max_violation: Option<f64>,
    pub max_std_error: Option<f64>,
    pub solve_time: f64,
    pub total_time: f64,
}

pub fn sweep_configs(cfg: &StudyConfig, spec: &SweepSpec) -> Result<Vec<(String, StudyConfig)>> {
    match spec {
        SweepSpec::Gammas { gamma1, gamma2 } => Ok(gamma2
            .iter()
            .flat_map(|&g2| {
                gamma1
                    .iter()
                    .map(move |&g1| (format!("gamma1={g1:?};gamma2={g2:?}"), cfg.with_gammas(g1, g2)))
            })
            .collect()),
        SweepSpec::Wind { counts } => {
            let ws = cfg
                .wind_scaling
                .as_ref()
                .ok_or_else(|| Error::Usage("wind sweep needs a [wind_scaling] section in the config".into()))?;
            counts
                .iter()
                .map(|&n| {
                    let (farms, mu, sigma) = ws.farms(n)?;
                    Ok((format!("wind={n}"), cfg.with_wind(farms, mu, sigma)))
                })
                .collect()
        }
    }
}

/// Run every sweep point, at most `opts.workers` at a time. Points are
/// reported in input order.
pub fn run_sweep(case: &PowerCase, cfg: &StudyConfig, spec: &SweepSpec, opts: &SweepOptions) -> Result<Vec<SweepPoint>> {
    let points = sweep_configs(cfg, spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("worker pool: {e}")))?;
    pool.install(|| {
        points
            .par_iter()
            .map(|(label, pcfg)| sweep_point(case, label, pcfg, opts))
            .collect()
    })
}

fn sweep_point(case: &PowerCase, label: &str, cfg: &StudyConfig, opts: &SweepOptions) -> Result<SweepPoint> {
    let start = Instant::now();
    let (prep, d) = run_dispatch(case, cfg, SafetyRule::Robust, opts.formulation)?;
    let total_time = start.elapsed().as_secs_f64();
    let risk = if opts.samples > 0 && d.is_optimal() {
        let (mu, sigma) = true_moments(cfg, MomentProtocol::Nominal, opts.seed)?;
        let set = sample_scenarios(opts.family, &mu, &sigma, opts.samples, opts.seed)?;
        Some(estimate_risk(&d.x(), &set, &prep.case, &prep.sf)?)
    } else {
        None
    };
    Ok(SweepPoint {
        label: label.to_string(),
        gamma1: cfg.gamma1,
        gamma2: cfg.gamma2,
        n_wind: prep.case.wind_farms.len(),
        status: d.status,
        objective: d.objective,
        certified: d.certified(),
        max_violation: risk.as_ref().map(|r| r.max_violation),
        max_std_error: risk.as_ref().map(|r| r.max_std_error),
        solve_time: d.timings.solve,
        total_time,
    })
}

/// Deterministic columns only; timings go to [`sweep_timing_csv`].
pub fn sweep_csv(points: &[SweepPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "label", "gamma1", "gamma2", "n_wind", "status", "objective", "certified", "max_violation", "max_std_error",
    ])
    .map_err(csv_err)?;
    for p in points {
        w.write_record([
            p.label.clone(),
            num(Some(p.gamma1)),
            num(Some(p.gamma2)),
            p.n_wind.to_string(),
            format!("{:?}", p.status).to_lowercase(),
            num(p.objective),
            p.certified.to_string(),
            num(p.max_violation),
            num(p.max_std_error),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

pub fn sweep_timing_csv(points: &[SweepPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "solve_time", "total_time"]).map_err(csv_err)?;
    for p in points {
        w.write_record([p.label.clone(), num(Some(p.solve_time)), num(Some(p.total_time))])
            .map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Worker count from `GRCC_WORKERS`, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var("GRCC_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::parse_case;
    use crate::config::parse_config;

    fn three_bus() -> (PowerCase, StudyConfig) {
        let case = parse_case(crate::case::tests::THREE_BUS).unwrap();
        let cfg = parse_config("mu0 = [0.0]\nsigma0 = [[0.0025]]\n", &case).unwrap();
        (case, cfg)
    }

    #[test]
    fn both_formulations_solve_three_bus() {
        let (case, cfg) = three_bus();
        let cmp = compare(&case, &cfg).unwrap();
        assert!(cmp.lp.is_optimal() && cmp.cone.is_optimal());
        assert_eq!(cmp.relaxation_holds, Some(true));
        assert!(cmp.cone.certified());
        assert_eq!(cmp.table.len(), 2);
    }

    #[test]
    fn zero_uncertainty_cone_matches_dc() {
        let (case, cfg) = three_bus();
        let zero = without_uncertainty(&cfg);
        let (_, d) = run_dispatch(&case, &zero, SafetyRule::Robust, Formulation::Cone).unwrap();
        let dc = dc_reference(&case, &cfg).unwrap();
        let (z, zdc) = (d.objective.unwrap(), dc.objective.unwrap());
        assert!((z - zdc).abs() <= 1e-8 * zdc.abs(), "{z} vs {zdc}");
    }

    #[test]
    fn sweep_spec_parsing() {
        let g = SweepSpec::parse("gamma1=0,0.1,0.2;gamma2=1.1", (0.1, 1.1)).unwrap();
        assert_eq!(
            g,
            SweepSpec::Gammas {
                gamma1: vec![0.0, 0.1, 0.2],
                gamma2: vec![1.1]
            }
        );
        assert_eq!(
            SweepSpec::parse("wind=3..15:3", (0.1, 1.1)).unwrap(),
            SweepSpec::Wind {
                counts: vec![3, 6, 9, 12, 15]
            }
        );
        assert_eq!(
            SweepSpec::parse("gamma2=1,1.2", (0.1, 1.1)).unwrap(),
            SweepSpec::Gammas {
                gamma1: vec![0.1],
                gamma2: vec![1.0, 1.2]
            }
        );
        for bad in ["", " ; ", "gamma1=", "wind=3;gamma1=0", "wind=5..3", "beta=1", "gamma1"] {
            let e = SweepSpec::parse(bad, (0.1, 1.1)).unwrap_err();
            assert_eq!(e.category(), crate::error::ErrorCategory::Usage, "{bad}");
        }
    }

    #[test]
    fn wind_sweep_needs_scaling_section() {
        let (_, cfg) = three_bus();
        let err = sweep_configs(&cfg, &SweepSpec::Wind { counts: vec![1] }).unwrap_err();
        assert!(err.to_string().contains("wind_scaling"));
    }

    #[test]
    fn gamma_sweep_is_ordered_and_worker_independent() {
        let (case, cfg) = three_bus();
        let spec = SweepSpec::parse("gamma1=0,0.1,0.2", (0.1, 1.1)).unwrap();
        let mut opts = SweepOptions {
            formulation: Formulation::Cone,
            family: Family::Gaussian,
            samples: 2000,
            seed: 3,
            workers: 1,
        };
        let a = run_sweep(&case, &cfg, &spec, &opts).unwrap();
        opts.workers = 3;
        let b = run_sweep(&case, &cfg, &spec, &opts).unwrap();
        assert_eq!(sweep_csv(&a).unwrap(), sweep_csv(&b).unwrap());
        let z: Vec<f64> = a.iter().map(|p| p.objective.unwrap()).collect();
        assert!(z.windows(2).all(|w| w[0] <= w[1] + 1e-9), "{z:?}");
    }

    #[test]
    fn variants_follow_gamma_table() {
        let (_, cfg) = three_bus();
        let g = |v: Variant| {
            let (c, _) = v.configure(&cfg);
            (c.gamma1, c.gamma2)
        };
        assert_eq!(g(Variant::Grcc1), (0.0, 1.0));
        assert_eq!(g(Variant::Grcc2), (0.1, 1.1));
        assert_eq!(g(Variant::Grcc3), (0.2, 1.1));
        let (rn, _) = Variant::RiskNeutral.configure(&cfg);
        assert!(rn.sigma0.iter().all(|&v| v == 0.0));
        assert_eq!(Variant::GaussianAssumption.configure(&cfg).1, SafetyRule::Gaussian);
    }

    #[test]
    fn validation_grid_shape_and_determinism() {
        let (case, cfg) = three_bus();
        let opts = ValidationOptions {
            samples: 2000,
            seed: 17,
            ..ValidationOptions::default()
        };
        let a = validate(&case, &cfg, &opts).unwrap();
        let b = validate(&case, &cfg, &opts).unwrap();
        let csv = a.to_csv().unwrap();
        assert_eq!(csv, b.to_csv().unwrap());
        assert_eq!(a.constraints_csv().unwrap(), b.constraints_csv().unwrap());
        // header, three families, cost row
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("family,risk_neutral,gaussian_assumption,grcc1,grcc2,grcc3\n"));
        for f in Family::ALL {
            assert!(a.cell(Variant::Grcc2, f).unwrap().max_violation <= 0.2);
        }
    }

    #[test]
    fn perturbed_protocol_moves_the_mean() {
        let (_, cfg) = three_bus();
        let (mu, sigma) = true_moments(&cfg, MomentProtocol::Perturbed, 1).unwrap();
        let shift = (mu[0] - cfg.mu0[0]).abs();
        assert!((shift - (0.1f64 * 0.0025).sqrt()).abs() < 1e-12);
        assert!((sigma[(0, 0)] - 0.0025).abs() < 1e-15);
    }
}
