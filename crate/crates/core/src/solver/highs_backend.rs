use std::num::NonZeroU32;

use highs::{ColProblem, HighsModelStatus, Model, Sense};

use super::{timed, LinearProgram, LpBackend, SolveOptions, SolveResult, SolveStatus};
use crate::error::Result;

/// HiGHS, single-threaded so repeated runs take identical paths.
#[derive(Debug, Clone, Copy, Default)]
pub struct HighsLp;

pub(crate) fn configure(model: &mut Model, opts: &SolveOptions) {
    model.make_quiet();
    model.set_threads(NonZeroU32::MIN);
    model.set_option("primal_feasibility_tolerance", opts.feasibility_tol);
    model.set_option("dual_feasibility_tolerance", opts.feasibility_tol);
    model.set_option("time_limit", opts.time_limit);
    let iters = opts.max_iterations.min(i32::MAX as u32) as i32;
    model.set_option("simplex_iteration_limit", iters);
    model.set_option("ipm_iteration_limit", iters);
    model.set_option("random_seed", 0);
}

pub(crate) fn map_status(status: HighsModelStatus) -> SolveStatus {
    match status {
        HighsModelStatus::Optimal => SolveStatus::Optimal,
        HighsModelStatus::Infeasible => SolveStatus::Infeasible,
        HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => SolveStatus::Unbounded,
        HighsModelStatus::ReachedIterationLimit => SolveStatus::IterationLimit,
        HighsModelStatus::ReachedTimeLimit => SolveStatus::TimeLimit,
        _ => SolveStatus::Failed,
    }
}

pub(crate) fn to_problem(lp: &LinearProgram) -> ColProblem {
    let mut pb = ColProblem::default();
    let rows: Vec<_> = lp
        .row_lower
        .iter()
        .zip(&lp.row_upper)
        .map(|(&lo, &hi)| pb.add_row(lo..=hi))
        .collect();
    for j in 0..lp.n_cols() {
        let entries: Vec<_> = (lp.col_starts[j]..lp.col_starts[j + 1])
            .map(|k| (rows[lp.row_indices[k]], lp.values[k]))
            .collect();
        pb.add_column(lp.cost[j], lp.col_lower[j]..=lp.col_upper[j], &entries);
    }
    pb
}

impl LpBackend for HighsLp {
    fn id(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, lp: &LinearProgram, opts: &SolveOptions) -> Result<SolveResult> {
        let mut model = Model::new(to_problem(lp));
        model.set_sense(Sense::Minimise);
        configure(&mut model, opts);
        let (solved, secs) = timed(|| model.solve());
        let status = map_status(solved.status());
        if status != SolveStatus::Optimal {
            return Ok(SolveResult::failed(
                status,
                self.id(),
                format!("{:?}", solved.status()),
                secs,
            ));
        }
        let x = solved.get_solution().columns().to_vec();
        Ok(SolveResult {
            status,
            objective: Some(lp.objective(&x)),
            x: Some(x),
            solve_time: secs,
            backend: self.id().to_string(),
            detail: format!("{:?}", solved.status()),
        })
    }
}
