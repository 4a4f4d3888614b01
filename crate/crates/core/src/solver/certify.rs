use serde::Serialize;

use crate::drcc::guarded_sqrt;
use crate::model::{dot, ConstraintKind, ModelAnnotations, QcqpModel, Tag};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Constraint tag, or `bound[i]` for variable bounds.
    pub constraint: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    pub max_violation: f64,
    pub worst: Option<String>,
    /// Every constraint violated by more than `tol`.
    pub violations: Vec<Violation>,
    pub tol: f64,
    pub passed: bool,
}

/// Evaluate every dispatch constraint at `x`.
///
/// Line counterparts are checked in their unsquared form
/// `k·√Var(s) − (T − ±m_gᵀp ± μ_s·s) ≤ 0`, which is what the squared rows
/// and their sign rows encode together.
pub fn certify(x: &[f64], model: &QcqpModel, ann: &ModelAnnotations, tol: f64) -> CertifyReport {
    let ng = model.n_gen;
    let mut all: Vec<(String, f64)> = Vec::new();
    for (tag, ineq) in ann.ineq_tags.iter().zip(&model.ineqs) {
        let amount = match tag.kind {
            ConstraintKind::LinePosSign | ConstraintKind::LineNegSign => continue,
            ConstraintKind::LinePos | ConstraintKind::LineNeg => {
                let Some(ld) = ann.line(tag.index) else { continue };
                let p = dot(&ld.m_g, &x[..ng]);
                let s = dot(&ld.m_g, &x[ng..2 * ng]);
                let sd = guarded_sqrt(ld.variance(s, ann.sum_sigma));
                let rhs = if tag.kind == ConstraintKind::LinePos {
                    ld.t1 - p + ann.mu_s * s
                } else {
                    ld.t2 + p - ann.mu_s * s
                };
                ld.k * sd - rhs
            }
            _ => ineq.residual(x),
        };
        all.push((tag.to_string(), amount));
    }
    for (tag, eq) in ann.eq_tags.iter().zip(&model.eqs) {
        all.push((tag.to_string(), eq.residual(x).abs()));
    }
    for i in 0..model.n() {
        let amount = (model.lower[i] - x[i]).max(x[i] - model.upper[i]);
        all.push((format!("bound[{i}]"), amount));
    }

    let (worst, max_violation) = all
        .iter()
        .fold((None, 0.0_f64), |(w, m), (name, v)| {
            if *v > m {
                (Some(name.clone()), *v)
            } else {
                (w, m)
            }
        });
    let violations = all
        .into_iter()
        .filter(|(_, v)| *v > tol)
        .map(|(constraint, amount)| Violation { constraint, amount })
        .collect();
    CertifyReport {
        max_violation,
        worst,
        violations,
        tol,
        passed: max_violation <= tol,
    }
}

impl CertifyReport {
    pub fn violated(&self, tag: Tag) -> Option<f64> {
        let name = tag.to_string();
        self.violations
            .iter()
            .find(|v| v.constraint == name)
            .map(|v| v.amount)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::parse_case;
    use crate::config::parse_config;
    use crate::model::assemble;
    use crate::network::build_shift_factors;
    use crate::solver::{solve_cone_reference, SolveOptions};

    fn setup() -> (QcqpModel, ModelAnnotations) {
        let case = parse_case(crate::case::tests::THREE_BUS).unwrap();
        let cfg = parse_config("mu0 = [0.0]\nsigma0 = [[0.0025]]\n", &case).unwrap();
        let sf = build_shift_factors(&case, 1).unwrap();
        assemble(&case, &sf, &cfg).unwrap()
    }

    #[test]
    fn participation_shortfall_is_reported() {
        let (model, ann) = setup();
        let x = [1.0, 0.6, 0.45, 0.45];
        let rep = certify(&x, &model, &ann, 1e-6);
        let pf = rep
            .violated(Tag { kind: ConstraintKind::PfSum, index: 0 })
            .unwrap();
        assert!((pf - 0.1).abs() < 1e-12);
        assert!(!rep.passed);
    }

    #[test]
    fn cone_solution_certifies() {
        let (model, ann) = setup();
        let sol = solve_cone_reference(&model, &ann, &SolveOptions::default()).unwrap();
        let x = sol.result.x.clone().unwrap_or_else(|| panic!("{:?}", sol.result));
        let rep = certify(&x, &model, &ann, 1e-6);
        assert!(rep.passed, "{rep:?}");
    }
}
