//! Power-system case data and the two on-disk formats that produce it.
//!
//! All quantities held by [`PowerCase`] are per-unit on `base_mva`: powers
//! in pu MW, reactances in pu, quadratic cost coefficients per pu².

mod matpower;
mod native;

pub use matpower::parse_matpower;
pub use native::{parse_native, to_native_string};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusType {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub kind: BusType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: u32,
    pub to: u32,
    pub reactance: f64,
    /// Thermal limit T̄ₗ, applied to |flow| in both directions.
    pub flow_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: u32,
    pub p_min: f64,
    pub p_max: f64,
    /// Downward adjustment limit, ≤ 0.
    pub adj_down: f64,
    /// Upward adjustment limit, ≥ 0.
    pub adj_up: f64,
    pub cost_quadratic: f64,
    pub cost_linear: f64,
    pub cost_const: f64,
}

impl Generator {
    pub fn cost(&self, p: f64) -> f64 {
        self.cost_quadratic * p * p + self.cost_linear * p + self.cost_const
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindFarm {
    pub bus: u32,
    pub forecast: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    /// Demand per bus, aligned with `buses`.
    pub loads: Vec<f64>,
    pub wind_farms: Vec<WindFarm>,
}

/// Share of p̄ᵢ used for the adjustment limits when a case does not give them.
pub const DEFAULT_ADJUSTMENT_SHARE: f64 = 0.1;

/// Input format of a case file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseFormat {
    Matpower,
    Native,
}

impl CaseFormat {
    /// MATPOWER files announce themselves with `mpc.` assignments; anything
    /// else is read as the native TOML layout.
    pub fn detect(text: &str) -> Self {
        let is_matpower = text.lines().any(|line| {
            let line = line.trim_start();
            line.starts_with("mpc.") || line.starts_with("function mpc")
        });
        if is_matpower {
            CaseFormat::Matpower
        } else {
            CaseFormat::Native
        }
    }
}

/// Parse a case in either supported format and validate it.
pub fn parse_case(text: &str) -> Result<PowerCase> {
    match CaseFormat::detect(text) {
        CaseFormat::Matpower => parse_matpower(text),
        CaseFormat::Native => parse_native(text),
    }
}

pub fn load_case(path: impl AsRef<std::path::Path>) -> Result<PowerCase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_case(&text)
}

impl PowerCase {
    pub fn bus_index_map(&self) -> HashMap<u32, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect()
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn slack_bus(&self) -> Option<u32> {
        self.buses
            .iter()
            .find(|b| b.kind == BusType::Slack)
            .map(|b| b.id)
    }

    pub fn total_load(&self) -> f64 {
        self.loads.iter().sum()
    }

    pub fn total_forecast(&self) -> f64 {
        self.wind_farms.iter().map(|w| w.forecast).sum()
    }

    /// Check every structural and physical invariant of the case.
    pub fn validate(&self) -> Result<()> {
        if !(self.base_mva > 0.0 && self.base_mva.is_finite()) {
            return Err(Error::semantic("base_mva", "must be positive"));
        }
        if self.buses.is_empty() {
            return Err(Error::semantic("bus", "case has no buses"));
        }
        if self.loads.len() != self.buses.len() {
            return Err(Error::dimension("loads", self.buses.len(), self.loads.len()));
        }
        let mut seen = HashMap::new();
        for (i, bus) in self.buses.iter().enumerate() {
            if seen.insert(bus.id, i).is_some() {
                return Err(Error::semantic(
                    format!("bus[{i}].id"),
                    format!("duplicate bus id {}", bus.id),
                ));
            }
        }
        match self
            .buses
            .iter()
            .filter(|b| b.kind == BusType::Slack)
            .count()
        {
            0 => return Err(Error::semantic("bus", "missing slack bus")),
            1 => {}
            _ => return Err(Error::semantic("bus", "multiple slack buses")),
        }
        for (i, load) in self.loads.iter().enumerate() {
            if !load.is_finite() {
                return Err(Error::semantic(format!("bus[{i}].load"), "must be finite"));
            }
        }
        for (i, br) in self.branches.iter().enumerate() {
            for (end, id) in [("from", br.from), ("to", br.to)] {
                if !seen.contains_key(&id) {
                    return Err(Error::semantic(
                        format!("branch[{i}].{end}"),
                        format!("dangling branch: bus {id} does not exist"),
                    ));
                }
            }
            if br.from == br.to {
                return Err(Error::semantic(format!("branch[{i}]"), "self-loop"));
            }
            if !(br.reactance > 0.0 && br.reactance.is_finite()) {
                return Err(Error::semantic(
                    format!("branch[{i}].reactance"),
                    format!("reactance must be positive, got {}", br.reactance),
                ));
            }
            if !(br.flow_limit > 0.0) {
                return Err(Error::semantic(
                    format!("branch[{i}].flow_limit"),
                    format!("flow limit must be positive, got {}", br.flow_limit),
                ));
            }
        }
        if self.generators.is_empty() {
            return Err(Error::semantic("generator", "case has no generators"));
        }
        for (i, g) in self.generators.iter().enumerate() {
            let at = |f: &str| format!("generator[{i}].{f}");
            if !seen.contains_key(&g.bus) {
                return Err(Error::semantic(
                    at("bus"),
                    format!("bus {} does not exist", g.bus),
                ));
            }
            let finite = [
                g.p_min,
                g.p_max,
                g.adj_down,
                g.adj_up,
                g.cost_quadratic,
                g.cost_linear,
                g.cost_const,
            ];
            if finite.iter().any(|v| !v.is_finite()) {
                return Err(Error::semantic(at("*"), "all generator data must be finite"));
            }
            if g.p_min > g.p_max {
                return Err(Error::semantic(at("p_min"), "p_min exceeds p_max"));
            }
            if g.adj_down > 0.0 {
                return Err(Error::semantic(at("adj_down"), "must be <= 0"));
            }
            if g.adj_up < 0.0 {
                return Err(Error::semantic(at("adj_up"), "must be >= 0"));
            }
            if g.cost_quadratic < 0.0 {
                return Err(Error::semantic(
                    at("cost_quadratic"),
                    "must be >= 0 (convex cost)",
                ));
            }
        }
        for (i, w) in self.wind_farms.iter().enumerate() {
            if !seen.contains_key(&w.bus) {
                return Err(Error::semantic(
                    format!("wind_farm[{i}].bus"),
                    format!("bus {} does not exist", w.bus),
                ));
            }
            if !w.forecast.is_finite() {
                return Err(Error::semantic(
                    format!("wind_farm[{i}].forecast"),
                    "must be finite",
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const THREE_BUS: &str = include_str!("../../fixtures/case3.toml");

    #[test]
    fn three_bus_fixture_counts() {
        let case = parse_case(THREE_BUS).unwrap();
        assert_eq!(case.buses.len(), 3);
        assert_eq!(case.branches.len(), 3);
        assert_eq!(case.generators.len(), 2);
        assert_eq!(case.loads.iter().filter(|d| **d > 0.0).count(), 1);
        let x0 = case.branches[0].reactance;
        assert!(case.branches.iter().all(|b| b.reactance == x0));
    }

    #[test]
    fn two_slack_buses_rejected() {
        let text = THREE_BUS.replacen("type = \"pv\"", "type = \"slack\"", 1);
        let err = parse_case(&text).unwrap_err();
        assert!(err.to_string().contains("multiple slack buses"), "{err}");
    }

    #[test]
    fn dangling_branch_reports_field_path() {
        let mut case = parse_case(THREE_BUS).unwrap();
        case.branches[1].to = 99;
        let err = case.validate().unwrap_err();
        assert!(err.to_string().contains("branch[1].to"), "{err}");
    }

    #[test]
    fn negative_reactance_rejected() {
        let mut case = parse_case(THREE_BUS).unwrap();
        case.branches[2].reactance = -0.1;
        let err = case.validate().unwrap_err();
        assert!(err.to_string().contains("branch[2].reactance"), "{err}");
    }

    #[test]
    fn format_detection() {
        assert_eq!(
            CaseFormat::detect("function mpc = case5\nmpc.baseMVA = 100;"),
            CaseFormat::Matpower
        );
        assert_eq!(CaseFormat::detect(THREE_BUS), CaseFormat::Native);
    }
}
