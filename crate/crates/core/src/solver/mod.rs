//! LP backends, the second-order-cone reference path, the deterministic
//! DC dispatch, and certification of dispatch points.

mod certify;
mod clarabel_backend;
mod cone;
mod dc;
mod highs_backend;
mod lp;

pub use certify::{certify, CertifyReport, Violation};
pub use clarabel_backend::ClarabelLp;
pub use cone::{solve_cone_reference, ConeSolution};
pub use dc::deterministic_dc_dispatch;
pub use highs_backend::HighsLp;
pub use lp::{LinearProgram, LpBuilder};

use std::time::Instant;

use serde::Serialize;

use crate::config::{LpBackendKind, SolverSettings};
use crate::error::{Error, Result};
use crate::rlt::{extract, LiftedLp, LiftedSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    TimeLimit,
    /// Anything else the backend reports (numerical trouble, load errors).
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Column values; `Some` iff `status` is optimal.
    pub x: Option<Vec<f64>>,
    /// Objective including constant terms; `Some` iff optimal.
    pub objective: Option<f64>,
    /// Wall time of the backend call alone, in seconds.
    pub solve_time: f64,
    pub backend: String,
    /// Backend's own status text.
    pub detail: String,
}

impl SolveResult {
    pub(crate) fn failed(status: SolveStatus, backend: &str, detail: String, solve_time: f64) -> Self {
        Self {
            status,
            x: None,
            objective: None,
            solve_time,
            backend: backend.to_string(),
            detail,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Turn a non-optimal status into a solver error.
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

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub feasibility_tol: f64,
    pub gap_tol: f64,
    pub max_iterations: u32,
    pub time_limit: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions::from(&SolverSettings::default())
    }
}

impl From<&SolverSettings> for SolveOptions {
    fn from(s: &SolverSettings) -> Self {
        Self {
            feasibility_tol: s.feasibility_tol,
            gap_tol: s.gap_tol,
            max_iterations: s.max_iterations,
            time_limit: s.time_limit,
        }
    }
}

/// A linear-programming solver. Implementations must be deterministic
/// for identical inputs and options.
pub trait LpBackend: Send + Sync {
    fn id(&self) -> &'static str;
    fn solve(&self, lp: &LinearProgram, opts: &SolveOptions) -> Result<SolveResult>;
}

pub fn backend_for(kind: LpBackendKind) -> Box<dyn LpBackend> {
    match kind {
        LpBackendKind::Highs => Box::new(HighsLp),
        LpBackendKind::Clarabel => Box::new(ClarabelLp),
    }
}

/// Solve a lifted LP and unpack (x, X) when optimal.
pub fn solve_lifted(
    lifted: &LiftedLp,
    backend: &dyn LpBackend,
    opts: &SolveOptions,
) -> Result<(SolveResult, Option<LiftedSolution>)> {
    let res = backend.solve(&lifted.lp, opts)?;
    let sol = match (&res.x, res.objective) {
        (Some(cols), Some(z)) => Some(extract(lifted, cols, z)?),
        _ => None,
    };
    Ok((res, sol))
}

pub(crate) fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}
