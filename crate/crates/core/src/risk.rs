//! Out-of-sample Monte Carlo estimation of constraint-violation
//! probabilities.
//!
//! Scenarios are drawn with i.i.d. zero-mean, unit-variance marginals,
//! correlated through the symmetric square root of Σ and shifted by μ.
//! Sampling runs in fixed chunks, each with its own ChaCha stream, so the
//! samples do not depend on the rayon worker count.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Gumbel, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::case::PowerCase;
use crate::config::check_covariance;
use crate::drcc::{sym_sqrt, AmbiguitySet};
use crate::error::{Error, Result};
use crate::model::{ConstraintKind, Tag};
use crate::network::ShiftFactors;

/// Samples per RNG stream.
const CHUNK: usize = 1024;

/// Laplace scale with unit variance (Var = 2b²).
pub const LAPLACE_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Logistic scale with unit variance (Var = s²π²/3).
pub fn logistic_scale() -> f64 {
    3f64.sqrt() / std::f64::consts::PI
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Laplace,
    Logistic,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Gaussian, Family::Laplace, Family::Logistic];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Laplace => "laplace",
            Family::Logistic => "logistic",
        }
    }

    /// One standardized draw.
    fn draw(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Family::Gaussian => rng.sample(StandardNormal),
            Family::Laplace => {
                let (a, b): (f64, f64) = (rng.sample(Exp1), rng.sample(Exp1));
                LAPLACE_SCALE * (a - b)
            }
            Family::Logistic => {
                // The difference of two standard Gumbels is standard logistic.
                let g = Gumbel::new(0.0, 1.0).expect("valid scale");
                let (a, b): (f64, f64) = (rng.sample(g), rng.sample(g));
                logistic_scale() * (a - b)
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown family `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub family: Family,
    pub true_mu: DVector<f64>,
    pub true_sigma: DMatrix<f64>,
    /// N × wind farms.
    pub samples: DMatrix<f64>,
    pub seed: u64,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn sample_mean(&self) -> DVector<f64> {
        self.samples.row_mean().transpose()
    }

    pub fn sample_covariance(&self) -> DMatrix<f64> {
        let n = self.len() as f64;
        let mean = self.samples.row_mean();
        let mut centered = self.samples.clone();
        for mut r in centered.row_iter_mut() {
            r -= &mean;
        }
        centered.transpose() * centered / (n - 1.0)
    }
}

pub fn sample_scenarios(
    family: Family,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    n: usize,
    seed: u64,
) -> Result<ScenarioSet> {
    let nw = mu.len();
    if sigma.nrows() != nw || sigma.ncols() != nw {
        return Err(Error::dimension("sigma", nw, sigma.nrows()));
    }
    if n == 0 {
        return Err(Error::range("samples", 0.0, "N ≥ 1"));
    }
    check_covariance("sigma", sigma)?;
    let factor = sym_sqrt(sigma);

    let n_chunks = n.div_ceil(CHUNK);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let rows = CHUNK.min(n - c * CHUNK);
            let mut out = Vec::with_capacity(rows * nw);
            let mut z = DVector::zeros(nw);
            for _ in 0..rows {
                for v in z.iter_mut() {
                    *v = family.draw(&mut rng);
                }
                let w = mu + &factor * &z;
                out.extend(w.iter());
            }
            out
        })
        .collect();
    let flat: Vec<f64> = chunks.into_iter().flatten().collect();
    Ok(ScenarioSet {
        family,
        true_mu: mu.clone(),
        true_sigma: sigma.clone(),
        samples: DMatrix::from_row_slice(n, nw, &flat),
        seed,
    })
}

/// Direction of the mean shift used by [`perturb_moments`].
#[derive(Debug, Clone, PartialEq)]
pub enum ShiftDirection {
    /// No shift: μ = μ₀, Σ = γ₂·Σ₀.
    Zero,
    /// A uniformly random unit direction drawn from the seed.
    Random,
    Unit(Vec<f64>),
}

/// A moment pair inside the ambiguity set, on the boundary of the mean
/// ellipsoid: μ = μ₀ + Σ₀^½·t with tᵀt = γ₁, and Σ = (γ₂ − γ₁)·Σ₀ so that
/// Σ + (μ − μ₀)(μ − μ₀)ᵀ ⪯ γ₂·Σ₀.
pub fn perturb_moments(
    amb: &AmbiguitySet,
    direction: &ShiftDirection,
    seed: u64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    amb.validate()?;
    let nw = amb.dim();
    let d = match direction {
        ShiftDirection::Zero => return Ok((amb.mu0.clone(), &amb.sigma0 * amb.gamma2)),
        ShiftDirection::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut d = DVector::from_fn(nw, |_, _| rng.sample::<f64, _>(StandardNormal));
            while d.norm() == 0.0 {
                d = DVector::from_fn(nw, |_, _| rng.sample::<f64, _>(StandardNormal));
            }
            d.normalize()
        }
        ShiftDirection::Unit(v) => {
            if v.len() != nw {
                return Err(Error::dimension("direction", nw, v.len()));
            }
            let d = DVector::from_column_slice(v);
            if (d.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::range("direction norm", d.norm(), "unit vector"));
            }
            d
        }
    };
    if amb.gamma1 == 0.0 {
        return Err(Error::Usage(
            "γ₁ = 0: the mean set is a single point, no shift is possible".into(),
        ));
    }
    if amb.gamma1 > amb.gamma2 {
        return Err(Error::range("gamma1", amb.gamma1, "γ₁ ≤ γ₂ for a boundary shift"));
    }
    let t = d * amb.gamma1.sqrt();
    let mu = &amb.mu0 + sym_sqrt(&amb.sigma0) * t;
    Ok((mu, &amb.sigma0 * (amb.gamma2 - amb.gamma1)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintRisk {
    pub constraint: String,
    pub violations: u64,
    pub probability: f64,
    /// Binomial standard error √(p(1−p)/N).
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub family: Family,
    pub n_samples: usize,
    pub seed: u64,
    pub constraints: Vec<ConstraintRisk>,
    /// Largest per-constraint violation frequency.
    pub max_violation: f64,
    pub worst: Option<String>,
    pub max_std_error: f64,
}

impl RiskReport {
    pub fn probability(&self, tag: Tag) -> Option<f64> {
        let name = tag.to_string();
        self.constraints
            .iter()
            .find(|c| c.constraint == name)
            .map(|c| c.probability)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.constraints {
            w.serialize(c).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Solver(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Solver(format!("csv: {e}"))
}

/// Constraint margins of one dispatch under a forecast error `w`. A
/// positive margin is a violation.
#[derive(Debug, Clone)]
pub struct RiskEvaluator {
    tags: Vec<Tag>,
    p: Vec<f64>,
    alpha: Vec<f64>,
    p_min: Vec<f64>,
    p_max: Vec<f64>,
    adj_up: Vec<f64>,
    adj_down: Vec<f64>,
    /// (line, nominal flow, limit, flow change per unit of w)
    lines: Vec<(usize, f64, f64, Vec<f64>)>,
}

impl RiskEvaluator {
    pub fn new(x: &[f64], case: &PowerCase, sf: &ShiftFactors) -> Result<Self> {
        let ng = case.generators.len();
        if x.len() != 2 * ng {
            return Err(Error::dimension("dispatch", 2 * ng, x.len()));
        }
        let nw = case.wind_farms.len();
        if sf.m_w.ncols() != nw || sf.m_g.ncols() != ng {
            return Err(Error::dimension("shift factors", nw, sf.m_w.ncols()));
        }
        let (p, alpha) = x.split_at(ng);
        let mut tags = Vec::new();
        for i in 0..ng {
            tags.push(Tag { kind: ConstraintKind::GenLo, index: i });
            tags.push(Tag { kind: ConstraintKind::GenHi, index: i });
        }
        for i in 0..ng {
            tags.push(Tag { kind: ConstraintKind::AdjUp, index: i });
            tags.push(Tag { kind: ConstraintKind::AdjDn, index: i });
        }
        let forecast: Vec<f64> = case.wind_farms.iter().map(|w| w.forecast).collect();
        let mut lines = Vec::new();
        for (l, br) in case.branches.iter().enumerate() {
            if !br.flow_limit.is_finite() {
                continue;
            }
            let mg = sf.m_g.row(l);
            let s: f64 = mg.iter().zip(alpha).map(|(m, a)| m * a).sum();
            let f0 = mg.iter().zip(p).map(|(m, v)| m * v).sum::<f64>()
                + sf.m_w.row(l).iter().zip(&forecast).map(|(m, v)| m * v).sum::<f64>()
                + sf.m_d.row(l).iter().zip(&case.loads).map(|(m, d)| m * d).sum::<f64>();
            let g: Vec<f64> = sf.m_w.row(l).iter().map(|m| m - s).collect();
            tags.push(Tag { kind: ConstraintKind::LinePos, index: l });
            tags.push(Tag { kind: ConstraintKind::LineNeg, index: l });
            lines.push((l, f0, br.flow_limit, g));
        }
        Ok(Self {
            tags,
            p: p.to_vec(),
            alpha: alpha.to_vec(),
            p_min: case.generators.iter().map(|g| g.p_min).collect(),
            p_max: case.generators.iter().map(|g| g.p_max).collect(),
            adj_up: case.generators.iter().map(|g| g.adj_up).collect(),
            adj_down: case.generators.iter().map(|g| g.adj_down).collect(),
            lines,
        })
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    /// Margins in the order of [`RiskEvaluator::tags`].
    pub fn margins(&self, w: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let total: f64 = w.iter().sum();
        for i in 0..self.p.len() {
            let gen = self.p[i] - self.alpha[i] * total;
            out.push(self.p_min[i] - gen);
            out.push(gen - self.p_max[i]);
        }
        for i in 0..self.p.len() {
            let adj = self.alpha[i] * total;
            out.push(adj - self.adj_up[i]);
            out.push(self.adj_down[i] - adj);
        }
        for (_, f0, limit, g) in &self.lines {
            let flow = f0 + g.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            out.push(flow - limit);
            out.push(-flow - limit);
        }
    }
}

/// Per-constraint violation frequencies of dispatch `x` over `set`.
///
/// `case` must already carry the wind farms the samples refer to.
pub fn estimate_risk(
    x: &[f64],
    set: &ScenarioSet,
    case: &PowerCase,
    sf: &ShiftFactors,
) -> Result<RiskReport> {
    let eval = RiskEvaluator::new(x, case, sf)?;
    if set.samples.ncols() != case.wind_farms.len() {
        return Err(Error::dimension("scenario columns", case.wind_farms.len(), set.samples.ncols()));
    }
    let n = set.len();
    let m = eval.tags().len();
    // Integer counts per fixed chunk keep the reduction order-free.
    let counts = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u64; m];
            let mut margins = Vec::with_capacity(m);
            let mut w = vec![0.0; set.samples.ncols()];
            for r in c * CHUNK..((c + 1) * CHUNK).min(n) {
                for (j, v) in w.iter_mut().enumerate() {
                    *v = set.samples[(r, j)];
                }
                eval.margins(&w, &mut margins);
                for (k, &g) in margins.iter().enumerate() {
                    if g > 0.0 {
                        counts[k] += 1;
                    }
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; m],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    let constraints: Vec<ConstraintRisk> = eval
        .tags()
        .iter()
        .zip(&counts)
        .map(|(tag, &v)| {
            let p = v as f64 / n as f64;
            ConstraintRisk {
                constraint: tag.to_string(),
                violations: v,
                probability: p,
                std_error: binomial_se(p, n),
            }
        })
        .collect();
    let worst = constraints
        .iter()
        .fold(None::<&ConstraintRisk>, |best, c| match best {
            Some(b) if b.probability >= c.probability => Some(b),
            _ => Some(c),
        });
    let max_violation = worst.map_or(0.0, |c| c.probability);
    Ok(RiskReport {
        family: set.family,
        n_samples: n,
        seed: set.seed,
        max_violation,
        worst: worst.filter(|c| c.violations > 0).map(|c| c.constraint.clone()),
        max_std_error: binomial_se(max_violation, n),
        constraints,
    })
}

pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}
