//! Minimal MATPOWER reader: `baseMVA`, `bus`, `gen`, `branch` and a
//! polynomial `gencost`. Other assignments are skipped. MATPOWER carries no
//! wind or adjustment data; wind farms come from the study config and the
//! adjustment limits default to ±10 % of p̄ᵢ.

use std::collections::HashMap;

use super::{Branch, Bus, BusType, Generator, PowerCase, DEFAULT_ADJUSTMENT_SHARE};
use crate::error::{Error, Result};

struct Table {
    line: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '\'' => in_quote = !in_quote,
            '%' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    match tok {
        "Inf" | "inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok.parse::<f64>().map_err(|_| Error::Syntax {
            line,
            message: format!("invalid number `{tok}`"),
        }),
    }
}

fn parse_row(text: &str, line: usize) -> Result<Vec<f64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| parse_number(t, line))
        .collect()
}

/// Split the file into scalar assignments and numeric matrix tables.
fn tokenize(text: &str) -> Result<(HashMap<String, (usize, f64)>, HashMap<String, Table>)> {
    let mut scalars = HashMap::new();
    let mut tables: HashMap<String, Table> = HashMap::new();
    let mut open: Option<(String, Table)> = None;
    // Cell arrays and other bracketed data we do not interpret.
    let mut skipping: Option<char> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(close) = skipping {
            if line.contains(close) {
                skipping = None;
            }
            continue;
        }
        if let Some((name, mut table)) = open.take() {
            let (body, done) = match line.find(']') {
                Some(pos) => (&line[..pos], true),
                None => (line, false),
            };
            for chunk in body.split(';') {
                let values = parse_row(chunk, lineno)?;
                if !values.is_empty() {
                    table.rows.push((lineno, values));
                }
            }
            if done {
                tables.insert(name, table);
            } else {
                open = Some((name, table));
            }
            continue;
        }
        if line.starts_with("function") {
            continue;
        }
        let Some((lhs, rhs)) = line.split_once('=') else {
            return Err(Error::Syntax {
                line: lineno,
                message: format!("expected an assignment, found `{line}`"),
            });
        };
        let name = lhs.trim();
        let Some(field) = name.strip_prefix("mpc.") else {
            return Err(Error::Syntax {
                line: lineno,
                message: format!("unexpected assignment target `{name}`"),
            });
        };
        let rhs = rhs.trim();
        if let Some(rest) = rhs.strip_prefix('[') {
            let mut table = Table {
                line: lineno,
                rows: Vec::new(),
            };
            let (body, done) = match rest.find(']') {
                Some(pos) => (&rest[..pos], true),
                None => (rest, false),
            };
            for chunk in body.split(';') {
                let values = parse_row(chunk, lineno)?;
                if !values.is_empty() {
                    table.rows.push((lineno, values));
                }
            }
            if done {
                tables.insert(field.to_string(), table);
            } else {
                open = Some((field.to_string(), table));
            }
        } else if rhs.starts_with('{') {
            if !rhs.contains('}') {
                skipping = Some('}');
            }
        } else if rhs.starts_with('\'') {
            // version string and similar
        } else {
            let value = rhs.trim_end_matches(';').trim();
            scalars.insert(field.to_string(), (lineno, parse_number(value, lineno)?));
        }
    }
    if let Some((name, table)) = open {
        return Err(Error::Syntax {
            line: table.line,
            message: format!("table `mpc.{name}` is never closed"),
        });
    }
    Ok((scalars, tables))
}

fn require<'a>(tables: &'a HashMap<String, Table>, name: &str) -> Result<&'a Table> {
    tables
        .get(name)
        .ok_or_else(|| Error::semantic(format!("mpc.{name}"), "table is missing"))
}

fn column(row: &(usize, Vec<f64>), col: usize, table: &str, width: usize) -> Result<f64> {
    if row.1.len() < width {
        return Err(Error::Syntax {
            line: row.0,
            message: format!(
                "mpc.{table} row has {} columns, need at least {width}",
                row.1.len()
            ),
        });
    }
    Ok(row.1[col])
}

fn as_id(value: f64, path: String) -> Result<u32> {
    if value.fract() != 0.0 || value < 0.0 || value > u32::MAX as f64 {
        return Err(Error::semantic(path, format!("`{value}` is not a bus number")));
    }
    Ok(value as u32)
}

pub fn parse_matpower(text: &str) -> Result<PowerCase> {
    let (scalars, tables) = tokenize(text)?;
    let base_mva = scalars
        .get("baseMVA")
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::semantic("mpc.baseMVA", "missing"))?;
    if !(base_mva > 0.0) {
        return Err(Error::semantic("mpc.baseMVA", "must be positive"));
    }

    let mut buses = Vec::new();
    let mut loads = Vec::new();
    for (i, row) in require(&tables, "bus")?.rows.iter().enumerate() {
        let id = as_id(column(row, 0, "bus", 3)?, format!("mpc.bus[{i}].BUS_I"))?;
        let kind = match column(row, 1, "bus", 3)? as i64 {
            3 => BusType::Slack,
            2 => BusType::Pv,
            1 => BusType::Pq,
            // Isolated buses carry no injections in a DC study.
            4 => continue,
            other => {
                return Err(Error::semantic(
                    format!("mpc.bus[{i}].BUS_TYPE"),
                    format!("unknown bus type {other}"),
                ))
            }
        };
        buses.push(Bus { id, kind });
        loads.push(column(row, 2, "bus", 3)? / base_mva);
    }

    let mut branches = Vec::new();
    for (i, row) in require(&tables, "branch")?.rows.iter().enumerate() {
        let status = if row.1.len() > 10 { row.1[10] } else { 1.0 };
        if status <= 0.0 {
            continue;
        }
        let rate_a = column(row, 5, "branch", 6)?;
        branches.push(Branch {
            from: as_id(column(row, 0, "branch", 6)?, format!("mpc.branch[{i}].F_BUS"))?,
            to: as_id(column(row, 1, "branch", 6)?, format!("mpc.branch[{i}].T_BUS"))?,
            reactance: column(row, 3, "branch", 6)?,
            // MATPOWER uses 0 for "unlimited".
            flow_limit: if rate_a == 0.0 {
                f64::INFINITY
            } else {
                rate_a / base_mva
            },
        });
    }

    let gen_table = require(&tables, "gen")?;
    let cost_table = require(&tables, "gencost")?;
    if cost_table.rows.len() < gen_table.rows.len() {
        return Err(Error::dimension(
            "mpc.gencost rows",
            gen_table.rows.len(),
            cost_table.rows.len(),
        ));
    }
    let mut generators = Vec::new();
    for (i, (row, cost)) in gen_table.rows.iter().zip(&cost_table.rows).enumerate() {
        let status = column(row, 7, "gen", 10)?;
        if status <= 0.0 {
            continue;
        }
        let p_max = column(row, 8, "gen", 10)? / base_mva;
        let p_min = column(row, 9, "gen", 10)? / base_mva;
        let model = column(cost, 0, "gencost", 4)?;
        if model != 2.0 {
            return Err(Error::semantic(
                format!("mpc.gencost[{i}].MODEL"),
                "only polynomial cost (model 2) is supported",
            ));
        }
        let ncost = column(cost, 3, "gencost", 4)? as usize;
        if !(1..=3).contains(&ncost) {
            return Err(Error::semantic(
                format!("mpc.gencost[{i}].NCOST"),
                format!("polynomial of {ncost} terms is not quadratic"),
            ));
        }
        let coeffs = &cost.1[4..];
        if coeffs.len() < ncost {
            return Err(Error::Syntax {
                line: cost.0,
                message: format!("gencost row declares {ncost} terms, has {}", coeffs.len()),
            });
        }
        // Highest order first; pad to (c2, c1, c0).
        let mut c = [0.0; 3];
        c[3 - ncost..].copy_from_slice(&coeffs[..ncost]);
        generators.push(Generator {
            bus: as_id(column(row, 0, "gen", 10)?, format!("mpc.gen[{i}].GEN_BUS"))?,
            p_min,
            p_max,
            adj_down: -DEFAULT_ADJUSTMENT_SHARE * p_max.abs(),
            adj_up: DEFAULT_ADJUSTMENT_SHARE * p_max.abs(),
            cost_quadratic: c[0] * base_mva * base_mva,
            cost_linear: c[1] * base_mva,
            cost_const: c[2],
        });
    }

    let case = PowerCase {
        name: String::new(),
        base_mva,
        buses,
        branches,
        generators,
        loads,
        wind_farms: Vec::new(),
    };
    case.validate()?;
    Ok(case)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CASE118: &str = include_str!("../../fixtures/case118.m");
    const CASE5: &str = include_str!("../../fixtures/case5.m");

    fn generator_table_length(text: &str) -> usize {
        let mut inside = false;
        let mut count = 0;
        for line in text.lines() {
            let line = line.split('%').next().unwrap().trim();
            if line.starts_with("mpc.gen =") || line.starts_with("mpc.gen=") {
                inside = true;
                continue;
            }
            if inside {
                if line.starts_with("];") {
                    break;
                }
                if !line.is_empty() {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn ieee118_fixture_counts() {
        let case = parse_matpower(CASE118).unwrap();
        assert_eq!(case.buses.len(), 118);
        assert_eq!(case.generators.len(), generator_table_length(CASE118));
        assert_eq!(case.branches.len(), 186);
        assert_eq!(case.slack_bus(), Some(69));
    }

    #[test]
    fn per_unit_conversion() {
        let case = parse_matpower(CASE5).unwrap();
        assert_eq!(case.base_mva, 100.0);
        let total_mw: f64 = case.loads.iter().sum::<f64>() * 100.0;
        assert!((total_mw - 1000.0).abs() < 1e-9);
        let g = &case.generators[0];
        assert!((g.adj_up - 0.1 * g.p_max).abs() < 1e-15);
    }

    #[test]
    fn bad_number_reports_line() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0;\n2 1 x1;\n];\n";
        match parse_matpower(text).unwrap_err() {
            Error::Syntax { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("x1"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unclosed_table_is_a_syntax_error() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0;\n";
        assert!(matches!(
            parse_matpower(text),
            Err(Error::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn two_slack_buses_rejected() {
        let text = CASE5.replacen("\t3\t2\t300", "\t3\t3\t300", 1);
        let err = parse_matpower(&text).unwrap_err();
        assert!(err.to_string().contains("multiple slack buses"), "{err}");
    }
}
