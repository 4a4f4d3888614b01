//! CPLEX LP text output of the dispatch model.
//!
//! Field order is fixed: objective, inequalities in model order, then
//! equalities, then bounds. Numbers use Rust's shortest round-trip `{:?}`
//! formatting, so the text is bit-exact and stable across runs.

use std::fmt::Write;

use super::{ModelAnnotations, QcqpModel, SymMatrix};

pub(crate) fn var_name(n_gen: usize, i: usize) -> String {
    if i < n_gen {
        format!("p{i}")
    } else {
        format!("a{}", i - n_gen)
    }
}

pub(crate) fn write_linear(out: &mut String, coefs: impl IntoIterator<Item = (String, f64)>) {
    let mut first = true;
    for (name, v) in coefs {
        if v == 0.0 {
            continue;
        }
        let sign = if v < 0.0 { "-" } else { "+" };
        if first && v >= 0.0 {
            write!(out, " {:?} {name}", v).unwrap();
        } else {
            write!(out, " {sign} {:?} {name}", v.abs()).unwrap();
        }
        first = false;
    }
    if first {
        out.push_str(" 0 p0");
    }
}

fn write_quad(out: &mut String, q: &SymMatrix, n: usize, n_gen: usize, scale: f64) {
    let entries = q.upper_entries(n);
    if entries.is_empty() {
        return;
    }
    out.push_str(" + [");
    for (k, (i, j, v)) in entries.into_iter().enumerate() {
        // xᵀQx counts off-diagonal entries twice.
        let v = if i == j { v * scale } else { 2.0 * v * scale };
        let sign = if v < 0.0 { "-" } else { "+" };
        let term = if i == j {
            format!("{} ^ 2", var_name(n_gen, i))
        } else {
            format!("{} * {}", var_name(n_gen, i), var_name(n_gen, j))
        };
        if k == 0 && v >= 0.0 {
            write!(out, " {:?} {term}", v).unwrap();
        } else {
            write!(out, " {sign} {:?} {term}", v.abs()).unwrap();
        }
    }
    out.push_str(" ]");
}

/// Render the model in CPLEX LP format. Row names come from the tags.
pub fn write_qcqp_lp(model: &QcqpModel, ann: &ModelAnnotations) -> String {
    let n = model.n();
    let ng = model.n_gen;
    let mut out = String::new();
    out.push_str("\\ dispatch model, x = [p; a]\nMinimize\n obj:");
    write_linear(
        &mut out,
        model.b0.iter().enumerate().map(|(i, v)| (var_name(ng, i), *v)),
    );
    // The LP format halves the bracketed objective term.
    write_quad(&mut out, &model.q0, n, ng, 2.0);
    if !model.q0.is_zero() {
        out.push_str(" / 2");
    }
    if model.c0 != 0.0 {
        write!(out, " + {:?}", model.c0).unwrap();
    }
    out.push_str("\nSubject To\n");
    for (tag, ineq) in ann.ineq_tags.iter().zip(&model.ineqs) {
        write!(out, " {}_{}:", tag.kind.as_str(), tag.index).unwrap();
        write_linear(
            &mut out,
            ineq.b.iter().enumerate().map(|(i, v)| (var_name(ng, i), *v)),
        );
        write_quad(&mut out, &ineq.q, n, ng, 1.0);
        writeln!(out, " <= {:?}", ineq.c).unwrap();
    }
    for (tag, eq) in ann.eq_tags.iter().zip(&model.eqs) {
        write!(out, " {}_{}:", tag.kind.as_str(), tag.index).unwrap();
        write_linear(
            &mut out,
            eq.b.iter().enumerate().map(|(i, v)| (var_name(ng, i), *v)),
        );
        writeln!(out, " = {:?}", eq.c).unwrap();
    }
    out.push_str("Bounds\n");
    for i in 0..n {
        writeln!(
            out,
            " {:?} <= {} <= {:?}",
            model.lower[i],
            var_name(ng, i),
            model.upper[i]
        )
        .unwrap();
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::parse_case;
    use crate::config::parse_config;
    use crate::model::assemble;
    use crate::network::build_shift_factors;

    #[test]
    fn dump_is_stable_and_complete() {
        let case = parse_case(crate::case::tests::THREE_BUS).unwrap();
        let cfg = parse_config("mu0 = [0.0]\nsigma0 = [[0.01]]\n", &case).unwrap();
        let sf = build_shift_factors(&case, 1).unwrap();
        let (model, ann) = assemble(&case, &sf, &cfg).unwrap();
        let a = write_qcqp_lp(&model, &ann);
        let b = write_qcqp_lp(&model, &ann);
        assert_eq!(a, b);
        assert!(a.starts_with("\\ dispatch model"));
        assert!(a.contains(" line_pos_0:"));
        assert!(a.contains(" pf_sum_0: + 1.0 a0") || a.contains(" pf_sum_0: 1.0 a0"));
        assert_eq!(a.matches(" <= ").count(), model.ineqs.len() + 2 * model.n());
        assert!(a.ends_with("End\n"));
    }
}
