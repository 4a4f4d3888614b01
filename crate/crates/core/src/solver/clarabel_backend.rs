use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{timed, LinearProgram, LpBackend, SolveOptions, SolveResult, SolveStatus};
use crate::error::{Error, Result};

/// Clarabel's interior-point method applied to an LP (no cones beyond
/// zero and nonnegative).
#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelLp;

pub(crate) fn settings(opts: &SolveOptions) -> DefaultSettings<f64> {
    DefaultSettings {
        verbose: false,
        max_iter: opts.max_iterations.min(10_000),
        time_limit: opts.time_limit,
        tol_feas: opts.feasibility_tol,
        tol_gap_abs: opts.gap_tol,
        tol_gap_rel: opts.gap_tol,
        max_threads: 1,
        ..DefaultSettings::default()
    }
}

pub(crate) fn map_status(status: SolverStatus) -> SolveStatus {
    match status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxIterations => SolveStatus::IterationLimit,
        SolverStatus::MaxTime => SolveStatus::TimeLimit,
        _ => SolveStatus::Failed,
    }
}

/// Rows `Ax + s = b` collected block by block, then compressed.
#[derive(Default)]
pub(crate) struct ConicRows {
    pub triplets: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<SupportedConeT<f64>>,
}

impl ConicRows {
    pub fn push_row(&mut self, coefs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) {
        let r = self.b.len();
        for (c, v) in coefs {
            if v != 0.0 {
                self.triplets.push((r, c, v));
            }
        }
        self.b.push(rhs);
    }

    pub fn matrix(&self, n: usize) -> CscMatrix<f64> {
        let (mut i, mut j, mut v) = (Vec::new(), Vec::new(), Vec::new());
        for &(r, c, x) in &self.triplets {
            i.push(r);
            j.push(c);
            v.push(x);
        }
        CscMatrix::new_from_triplets(self.b.len(), n, i, j, v)
    }
}

pub(crate) fn run(
    p: &CscMatrix<f64>,
    q: &[f64],
    rows: &ConicRows,
    n: usize,
    opts: &SolveOptions,
) -> Result<(SolverStatus, Vec<f64>, f64)> {
    let a = rows.matrix(n);
    let mut solver = DefaultSolver::new(p, q, &a, &rows.b, &rows.cones, settings(opts))
        .map_err(|e| Error::Solver(format!("clarabel setup: {e}")))?;
    let ((), secs) = timed(|| solver.solve());
    Ok((solver.solution.status, solver.solution.x.clone(), secs))
}

impl LpBackend for ClarabelLp {
    fn id(&self) -> &'static str {
        "clarabel"
    }

    fn solve(&self, lp: &LinearProgram, opts: &SolveOptions) -> Result<SolveResult> {
        let n = lp.n_cols();
        let lp_rows = lp.rows();
        let mut rows = ConicRows::default();
        let mut n_zero = 0;
        for (i, row) in lp_rows.iter().enumerate() {
            if lp.row_lower[i] == lp.row_upper[i] {
                rows.push_row(row.iter().copied(), lp.row_upper[i]);
                n_zero += 1;
            }
        }
        let mut n_pos = 0;
        for (i, row) in lp_rows.iter().enumerate() {
            let (lo, hi) = (lp.row_lower[i], lp.row_upper[i]);
            if lo == hi {
                continue;
            }
            if hi.is_finite() {
                rows.push_row(row.iter().copied(), hi);
                n_pos += 1;
            }
            if lo.is_finite() {
                rows.push_row(row.iter().map(|&(c, v)| (c, -v)), -lo);
                n_pos += 1;
            }
        }
        for j in 0..n {
            if lp.col_upper[j].is_finite() {
                rows.push_row([(j, 1.0)], lp.col_upper[j]);
                n_pos += 1;
            }
            if lp.col_lower[j].is_finite() {
                rows.push_row([(j, -1.0)], -lp.col_lower[j]);
                n_pos += 1;
            }
        }
        if n_zero > 0 {
            rows.cones.push(SupportedConeT::ZeroConeT(n_zero));
        }
        if n_pos > 0 {
            rows.cones.push(SupportedConeT::NonnegativeConeT(n_pos));
        }
        let p = CscMatrix::zeros((n, n));
        let (status, x, secs) = run(&p, &lp.cost, &rows, n, opts)?;
        let mapped = map_status(status);
        if mapped != SolveStatus::Optimal {
            return Ok(SolveResult::failed(mapped, self.id(), format!("{status:?}"), secs));
        }
        Ok(SolveResult {
            status: mapped,
            objective: Some(lp.objective(&x)),
            x: Some(x),
            solve_time: secs,
            backend: self.id().to_string(),
            detail: format!("{status:?}"),
        })
    }
}
