//! Convex reference path: each line counterpart kept in its unsquared form
//! `k·‖F(m_w − e·s)‖ ≤ T₁ − m_gᵀp + μ_s·s`, a second-order cone.

use clarabel::algebra::CscMatrix;
use clarabel::solver::SupportedConeT;

use super::clarabel_backend::{map_status, run, ConicRows};
use super::{SolveOptions, SolveResult, SolveStatus};
use crate::error::{Error, Result};
use crate::model::{ConstraintKind, ModelAnnotations, QcqpModel, SymMatrix};

/// A right side below this counts as a binding sign row.
const SIGN_BINDING_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct ConeSolution {
    pub result: SolveResult,
    /// Lines whose unsquared right side is (numerically) zero at the optimum.
    pub binding_sign_rows: Vec<usize>,
    pub notes: Vec<String>,
}

pub fn solve_cone_reference(
    model: &QcqpModel,
    ann: &ModelAnnotations,
    opts: &SolveOptions,
) -> Result<ConeSolution> {
    let n = model.n();
    let ng = model.n_gen;
    let nw = ann.mu0.len();
    if ann.sigma_factor.nrows() != nw {
        return Err(Error::Assembly("annotations carry no Σ₀ factor".into()));
    }

    let mut rows = ConicRows::default();
    for eq in &model.eqs {
        rows.push_row(eq.b.iter().copied().enumerate(), eq.c);
    }
    let n_zero = model.eqs.len();

    let mut n_pos = 0;
    for (tag, ineq) in ann.ineq_tags.iter().zip(&model.ineqs) {
        if matches!(tag.kind, ConstraintKind::LinePos | ConstraintKind::LineNeg) {
            continue;
        }
        if !ineq.q.is_zero() {
            return Err(Error::Assembly(format!("unexpected quadratic row {tag}")));
        }
        rows.push_row(ineq.b.iter().copied().enumerate(), ineq.c);
        n_pos += 1;
    }
    for j in 0..n {
        rows.push_row([(j, 1.0)], model.upper[j]);
        rows.push_row([(j, -1.0)], -model.lower[j]);
        n_pos += 2;
    }
    if n_zero > 0 {
        rows.cones.push(SupportedConeT::ZeroConeT(n_zero));
    }
    if n_pos > 0 {
        rows.cones.push(SupportedConeT::NonnegativeConeT(n_pos));
    }

    let f = &ann.sigma_factor;
    let fe: Vec<f64> = (0..nw).map(|r| f.row(r).sum()).collect();
    // Row index of each cone's t entry, for the binding check.
    let mut t_rows = Vec::new();
    for ld in &ann.lines {
        let fm: Vec<f64> = (0..nw)
            .map(|r| (0..nw).map(|c| f[(r, c)] * ld.m_w[c]).sum())
            .collect();
        for sign in [1.0, -1.0] {
            // t = T − sign·(m_gᵀp − μ_s·m_gᵀα) ≥ 0
            let t = if sign > 0.0 { ld.t1 } else { ld.t2 };
            t_rows.push((ld.line, rows.b.len()));
            rows.push_row(
                (0..ng).flat_map(|i| {
                    [(i, sign * ld.m_g[i]), (ng + i, -sign * ann.mu_s * ld.m_g[i])]
                }),
                t,
            );
            if nw == 0 {
                rows.cones.push(SupportedConeT::NonnegativeConeT(1));
                continue;
            }
            // v = k·F(m_w − e·s); its sign is irrelevant inside the norm.
            for r in 0..nw {
                rows.push_row(
                    (0..ng).map(|i| (ng + i, ld.k * fe[r] * ld.m_g[i])),
                    ld.k * fm[r],
                );
            }
            rows.cones.push(SupportedConeT::SecondOrderConeT(1 + nw));
        }
    }

    let p = objective_hessian(&model.q0, n);
    let (status, x, secs) = run(&p, &model.b0, &rows, n, opts)?;
    let mapped = map_status(status);
    if mapped != SolveStatus::Optimal {
        return Ok(ConeSolution {
            result: SolveResult::failed(mapped, "cone", format!("{status:?}"), secs),
            binding_sign_rows: Vec::new(),
            notes: Vec::new(),
        });
    }

    let mut binding = Vec::new();
    let a = rows.matrix(n);
    let ax = {
        let mut out = vec![0.0; rows.b.len()];
        for j in 0..n {
            for k in a.colptr[j]..a.colptr[j + 1] {
                out[a.rowval[k]] += a.nzval[k] * x[j];
            }
        }
        out
    };
    for &(line, r) in &t_rows {
        if rows.b[r] - ax[r] <= SIGN_BINDING_TOL && !binding.contains(&line) {
            binding.push(line);
        }
    }
    let notes = binding
        .iter()
        .map(|l| format!("line {l}: nonnegativity side-cut binds; cone optimum may differ from the squared form"))
        .collect();
    Ok(ConeSolution {
        result: SolveResult {
            status: mapped,
            objective: Some(model.objective(&x)),
            x: Some(x),
            solve_time: secs,
            backend: "cone".into(),
            detail: format!("{status:?}"),
        },
        binding_sign_rows: binding,
        notes,
    })
}

/// Clarabel minimizes ½xᵀPx, so P = 2·Q₀, upper triangle.
fn objective_hessian(q0: &SymMatrix, n: usize) -> CscMatrix<f64> {
    let (mut i, mut j, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for (r, c, x) in q0.upper_entries(n) {
        i.push(r);
        j.push(c);
        v.push(2.0 * x);
    }
    CscMatrix::new_from_triplets(n, n, i, j, v)
}
