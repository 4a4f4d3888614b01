//! Deterministic DC economic dispatch, built straight from the case and
//! shift factors (no dispatch model involved). Used as the zero-uncertainty
//! reference.

use highs::{HessianFormat, Model, RowProblem, Sense};

use super::highs_backend::{configure, map_status};
use super::{timed, SolveOptions, SolveResult, SolveStatus};
use crate::case::PowerCase;
use crate::error::Result;
use crate::network::ShiftFactors;

/// `min Σ cᵢ(pᵢ)` over generator outputs subject to power balance, output
/// limits and |flow| ≤ T̄ on every line, as a convex QP in HiGHS.
pub fn deterministic_dc_dispatch(
    case: &PowerCase,
    sf: &ShiftFactors,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let ng = case.generators.len();
    let mut pb = RowProblem::default();
    let cols: Vec<_> = case
        .generators
        .iter()
        .map(|g| pb.add_column(g.cost_linear, g.p_min..=g.p_max))
        .collect();
    let net = case.total_load() - case.total_forecast();
    pb.add_row(net..=net, cols.iter().map(|&c| (c, 1.0)));

    // Flow = H·(injections); generators inject, wind injects, loads withdraw.
    let mut base = vec![0.0; sf.n_lines()];
    let index = case.bus_index_map();
    for w in &case.wind_farms {
        let b = index[&w.bus];
        for (l, f) in base.iter_mut().enumerate() {
            *f += sf.bus[(l, b)] * w.forecast;
        }
    }
    for (b, d) in case.loads.iter().enumerate() {
        for (l, f) in base.iter_mut().enumerate() {
            *f -= sf.bus[(l, b)] * d;
        }
    }
    for (l, br) in case.branches.iter().enumerate() {
        if !br.flow_limit.is_finite() {
            continue;
        }
        let terms: Vec<_> = case
            .generators
            .iter()
            .zip(&cols)
            .map(|(g, &c)| (c, sf.bus[(l, index[&g.bus])]))
            .filter(|t| t.1 != 0.0)
            .collect();
        pb.add_row(-br.flow_limit - base[l]..=br.flow_limit - base[l], terms);
    }

    let mut model = Model::new(pb);
    model.set_sense(Sense::Minimise);
    configure(&mut model, opts);
    let hessian: Vec<Vec<(usize, f64)>> = case
        .generators
        .iter()
        .enumerate()
        .map(|(i, g)| {
            if g.cost_quadratic != 0.0 {
                vec![(i, 2.0 * g.cost_quadratic)]
            } else {
                vec![]
            }
        })
        .collect();
    model.pass_hessian(HessianFormat::Triangular, hessian);
    let (solved, secs) = timed(|| model.solve());
    let status = map_status(solved.status());
    if status != SolveStatus::Optimal {
        return Ok(SolveResult::failed(status, "dc-qp", format!("{:?}", solved.status()), secs));
    }
    let p = solved.get_solution().columns()[..ng].to_vec();
    let cost: f64 = case.generators.iter().zip(&p).map(|(g, &v)| g.cost(v)).sum();
    Ok(SolveResult {
        status,
        x: Some(p),
        objective: Some(cost),
        solve_time: secs,
        backend: "dc-qp".into(),
        detail: format!("{:?}", solved.status()),
    })
}
