//! Native TOML case layout. Values are already per-unit; see
//! `docs/formats.md` in the repository for the schema.

use serde::{Deserialize, Serialize};

use super::{Branch, Bus, BusType, Generator, PowerCase, WindFarm, DEFAULT_ADJUSTMENT_SHARE};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NativeCase {
    #[serde(default)]
    name: String,
    base_mva: f64,
    #[serde(default)]
    bus: Vec<NativeBus>,
    #[serde(default)]
    branch: Vec<NativeBranch>,
    #[serde(default)]
    generator: Vec<NativeGenerator>,
    #[serde(default)]
    wind_farm: Vec<WindFarm>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NativeBus {
    id: u32,
    #[serde(rename = "type")]
    kind: BusType,
    #[serde(default)]
    load: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NativeBranch {
    from: u32,
    to: u32,
    reactance: f64,
    flow_limit: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NativeGenerator {
    bus: u32,
    p_min: f64,
    p_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adj_down: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adj_up: Option<f64>,
    #[serde(default)]
    cost_quadratic: f64,
    #[serde(default)]
    cost_linear: f64,
    #[serde(default)]
    cost_const: f64,
}

fn syntax_error(text: &str, err: toml::de::Error) -> Error {
    let line = err
        .span()
        .map(|span| text[..span.start.min(text.len())].lines().count().max(1))
        .unwrap_or(0);
    Error::Syntax {
        line,
        message: err.message().to_string(),
    }
}

pub fn parse_native(text: &str) -> Result<PowerCase> {
    let raw: NativeCase = toml::from_str(text).map_err(|e| syntax_error(text, e))?;
    let case = PowerCase {
        name: raw.name,
        base_mva: raw.base_mva,
        loads: raw.bus.iter().map(|b| b.load).collect(),
        buses: raw
            .bus
            .iter()
            .map(|b| Bus {
                id: b.id,
                kind: b.kind,
            })
            .collect(),
        branches: raw
            .branch
            .into_iter()
            .map(|b| Branch {
                from: b.from,
                to: b.to,
                reactance: b.reactance,
                flow_limit: b.flow_limit,
            })
            .collect(),
        generators: raw
            .generator
            .into_iter()
            .map(|g| Generator {
                bus: g.bus,
                p_min: g.p_min,
                p_max: g.p_max,
                adj_down: g
                    .adj_down
                    .unwrap_or(-DEFAULT_ADJUSTMENT_SHARE * g.p_max.abs()),
                adj_up: g.adj_up.unwrap_or(DEFAULT_ADJUSTMENT_SHARE * g.p_max.abs()),
                cost_quadratic: g.cost_quadratic,
                cost_linear: g.cost_linear,
                cost_const: g.cost_const,
            })
            .collect(),
        wind_farms: raw.wind_farm,
    };
    case.validate()?;
    Ok(case)
}

/// Serialize a case to the native layout. Adjustment limits are always
/// written explicitly so the output parses back to an identical case.
pub fn to_native_string(case: &PowerCase) -> String {
    let raw = NativeCase {
        name: case.name.clone(),
        base_mva: case.base_mva,
        bus: case
            .buses
            .iter()
            .zip(&case.loads)
            .map(|(b, &load)| NativeBus {
                id: b.id,
                kind: b.kind,
                load,
            })
            .collect(),
        branch: case
            .branches
            .iter()
            .map(|b| NativeBranch {
                from: b.from,
                to: b.to,
                reactance: b.reactance,
                flow_limit: b.flow_limit,
            })
            .collect(),
        generator: case
            .generators
            .iter()
            .map(|g| NativeGenerator {
                bus: g.bus,
                p_min: g.p_min,
                p_max: g.p_max,
                adj_down: Some(g.adj_down),
                adj_up: Some(g.adj_up),
                cost_quadratic: g.cost_quadratic,
                cost_linear: g.cost_linear,
                cost_const: g.cost_const,
            })
            .collect(),
        wind_farm: case.wind_farms.clone(),
    };
    toml::to_string(&raw).expect("case data is always representable as TOML")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn missing_adjustment_limits_default_to_ten_percent() {
        let text = r#"
base_mva = 100.0
[[bus]]
id = 1
type = "slack"
[[bus]]
id = 2
type = "pq"
load = 1.0
[[branch]]
from = 1
to = 2
reactance = 0.1
flow_limit = 2.0
[[generator]]
bus = 1
p_min = 0.0
p_max = 3.0
"#;
        let case = parse_native(text).unwrap();
        let g = &case.generators[0];
        assert!((g.adj_up - 0.3).abs() < 1e-15);
        assert!((g.adj_down + 0.3).abs() < 1e-15);
    }

    #[test]
    fn syntax_error_carries_line_number() {
        let text = "base_mva = 100.0\n[[bus]]\nid = = 3\n";
        match parse_native(text).unwrap_err() {
            Error::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    fn arb_case() -> impl Strategy<Value = PowerCase> {
        (2usize..7, 1usize..4, 0usize..3, any::<u64>()).prop_map(|(nb, ng, nw, seed)| {
            use rand::{RngExt, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let buses: Vec<Bus> = (0..nb)
                .map(|i| Bus {
                    id: (i as u32 + 1) * 3,
                    kind: if i == 0 { BusType::Slack } else { BusType::Pq },
                })
                .collect();
            let branches = (1..nb)
                .map(|i| Branch {
                    from: buses[rng.random_range(0..i)].id,
                    to: buses[i].id,
                    reactance: rng.random_range(0.01..1.0),
                    flow_limit: rng.random_range(0.1..5.0),
                })
                .collect();
            let generators = (0..ng)
                .map(|_| {
                    let p_min = rng.random_range(0.0..1.0);
                    let p_max = p_min + rng.random_range(0.0..3.0);
                    Generator {
                        bus: buses[rng.random_range(0..nb)].id,
                        p_min,
                        p_max,
                        adj_down: -rng.random_range(0.0..0.5),
                        adj_up: rng.random_range(0.0..0.5),
                        cost_quadratic: rng.random_range(0.0..50.0),
                        cost_linear: rng.random_range(0.0..4000.0),
                        cost_const: rng.random_range(0.0..100.0),
                    }
                })
                .collect();
            let wind_farms = (0..nw)
                .map(|_| WindFarm {
                    bus: buses[rng.random_range(0..nb)].id,
                    forecast: rng.random_range(0.0..2.0),
                })
                .collect();
            PowerCase {
                name: format!("random{seed}"),
                base_mva: 100.0,
                loads: (0..nb).map(|_| rng.random_range(0.0..2.0)).collect(),
                buses,
                branches,
                generators,
                wind_farms,
            }
        })
    }

    proptest! {
        #[test]
        fn native_round_trip_is_identity(case in arb_case()) {
            case.validate().unwrap();
            let text = to_native_string(&case);
            let back = parse_native(&text).unwrap();
            prop_assert_eq!(back, case);
        }
    }
}
