//! Study configuration: risk levels, moment statistics of the forecast
//! error, conservativeness coefficients and solver settings.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::case::{PowerCase, WindFarm};
use crate::drcc::AmbiguitySet;
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 0.2;
pub const DEFAULT_GAMMA1: f64 = 0.1;
pub const DEFAULT_GAMMA2: f64 = 1.1;

/// Eigenvalue slack tolerated when checking Σ₀ ⪰ 0, relative to its scale.
pub(crate) const PSD_TOLERANCE: f64 = 1e-12;

/// How the variance of the aggregate forecast error eᵀw is formed in the
/// generator and adjustment counterparts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSMode {
    /// Σ_s = trace(Σ₀). Serialized as `paper_literal`.
    #[serde(rename = "paper_literal")]
    Trace,
    /// Σ_s = eᵀΣ₀e, the actual variance of eᵀw.
    #[default]
    FullCovariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LpBackendKind {
    #[default]
    Highs,
    Clarabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub backend: LpBackendKind,
    /// Primal/dual feasibility tolerance handed to every backend.
    pub feasibility_tol: f64,
    /// Relative duality-gap tolerance for the interior-point paths.
    pub gap_tol: f64,
    pub max_iterations: u32,
    pub time_limit: f64,
    /// Keep the nonnegativity cuts on the right-hand sides of the squared
    /// transmission counterparts.
    pub side_cuts: bool,
    /// Drop the duplicated mixed McCormick row on the diagonal of X.
    pub dedup_diagonal: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            backend: LpBackendKind::Highs,
            feasibility_tol: 1e-8,
            gap_tol: 1e-10,
            max_iterations: 1_000_000,
            time_limit: 600.0,
            side_cuts: true,
            dedup_diagonal: true,
        }
    }
}

/// Wind farms used when sweeping over the number of farms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindScaling {
    pub buses: Vec<u32>,
    pub forecast: f64,
    /// Standard deviation of each farm's forecast error.
    pub std: f64,
    /// Pairwise correlation between farms.
    #[serde(default)]
    pub correlation: f64,
}

impl WindScaling {
    /// First `count` farms with their (μ₀, Σ₀).
    pub fn farms(&self, count: usize) -> Result<(Vec<WindFarm>, Vec<f64>, DMatrix<f64>)> {
        if count == 0 || count > self.buses.len() {
            return Err(Error::Usage(format!(
                "wind farm count {count} outside 1..={}",
                self.buses.len()
            )));
        }
        let farms = self.buses[..count]
            .iter()
            .map(|&bus| WindFarm {
                bus,
                forecast: self.forecast,
            })
            .collect();
        let var = self.std * self.std;
        let sigma = DMatrix::from_fn(count, count, |i, j| {
            if i == j {
                var
            } else {
                self.correlation * var
            }
        });
        Ok((farms, vec![0.0; count], sigma))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub eps_gen: Vec<f64>,
    pub eps_adj: Vec<f64>,
    pub eps_line: Vec<f64>,
    pub gamma1: f64,
    pub gamma2: f64,
    pub mu0: Vec<f64>,
    pub sigma0: DMatrix<f64>,
    pub sigma_s_mode: SigmaSMode,
    pub slack_bus: Option<u32>,
    pub solver: SolverSettings,
    /// Replaces the case's wind farms (MATPOWER cases have none).
    pub wind_farms: Option<Vec<WindFarm>>,
    pub adj_up: Option<Vec<f64>>,
    pub adj_down: Option<Vec<f64>>,
    pub wind_scaling: Option<WindScaling>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ScalarOrVec {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    eps_gen: Option<ScalarOrVec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps_adj: Option<ScalarOrVec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps_line: Option<ScalarOrVec>,
    /// Shorthand for all three risk vectors.
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma0: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_s_mode: Option<SigmaSMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slack_bus: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adj_up: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adj_down: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<SolverSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wind_farm: Option<Vec<WindFarm>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wind_scaling: Option<WindScaling>,
}

fn broadcast(name: &str, value: Option<ScalarOrVec>, fallback: f64, len: usize) -> Result<Vec<f64>> {
    match value {
        None => Ok(vec![fallback; len]),
        Some(ScalarOrVec::Scalar(v)) => Ok(vec![v; len]),
        Some(ScalarOrVec::Vector(v)) => {
            if v.len() != len {
                return Err(Error::dimension(name, len, v.len()));
            }
            Ok(v)
        }
    }
}

fn check_risk(name: &str, values: &[f64]) -> Result<()> {
    for (i, &e) in values.iter().enumerate() {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::range(format!("{name}[{i}]"), e, "0 < ε < 1"));
        }
    }
    Ok(())
}

/// Check that `sigma` is square, symmetric and positive semidefinite.
pub(crate) fn check_covariance(name: &str, sigma: &DMatrix<f64>) -> Result<()> {
    if sigma.nrows() != sigma.ncols() {
        return Err(Error::dimension(
            format!("{name} columns"),
            sigma.nrows(),
            sigma.ncols(),
        ));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::semantic(name, "entries must be finite"));
    }
    let scale = sigma.amax().max(1.0);
    for i in 0..sigma.nrows() {
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > PSD_TOLERANCE * scale {
                return Err(Error::semantic(
                    format!("{name}[{i}][{j}]"),
                    "covariance must be symmetric",
                ));
            }
        }
    }
    if sigma.nrows() > 0 {
        let min_eig = SymmetricEigen::new(sigma.clone()).eigenvalues.min();
        if min_eig < -PSD_TOLERANCE * scale {
            return Err(Error::semantic(
                name,
                format!("covariance is not positive semidefinite (eigenvalue {min_eig:e})"),
            ));
        }
    }
    Ok(())
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

/// Parse a TOML study configuration against an already parsed case.
///
/// Scalar risk levels are broadcast to per-generator/per-line vectors;
/// anything omitted takes the defaults ε = 0.2, γ₁ = 0.1, γ₂ = 1.1, μ₀ = 0
/// and Σ₀ = 0.
pub fn parse_config(text: &str, case: &PowerCase) -> Result<StudyConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| syntax_error(text, e))?;
    let n_gen = case.generators.len();
    let n_line = case.branches.len();
    let n_wind = raw
        .wind_farm
        .as_ref()
        .map_or(case.wind_farms.len(), |w| w.len());

    let eps = raw.epsilon.unwrap_or(DEFAULT_EPSILON);
    let sigma0 = match raw.sigma0 {
        None => DMatrix::zeros(n_wind, n_wind),
        Some(rows) => {
            if rows.len() != n_wind {
                return Err(Error::dimension("sigma0 rows", n_wind, rows.len()));
            }
            for (i, r) in rows.iter().enumerate() {
                if r.len() != n_wind {
                    return Err(Error::dimension(format!("sigma0[{i}]"), n_wind, r.len()));
                }
            }
            DMatrix::from_fn(n_wind, n_wind, |i, j| rows[i][j])
        }
    };
    let mu0 = raw.mu0.unwrap_or_else(|| vec![0.0; n_wind]);
    if mu0.len() != n_wind {
        return Err(Error::dimension("mu0", n_wind, mu0.len()));
    }
    let cfg = StudyConfig {
        eps_gen: broadcast("eps_gen", raw.eps_gen, eps, n_gen)?,
        eps_adj: broadcast("eps_adj", raw.eps_adj, eps, n_gen)?,
        eps_line: broadcast("eps_line", raw.eps_line, eps, n_line)?,
        gamma1: raw.gamma1.unwrap_or(DEFAULT_GAMMA1),
        gamma2: raw.gamma2.unwrap_or(DEFAULT_GAMMA2),
        mu0,
        sigma0,
        sigma_s_mode: raw.sigma_s_mode.unwrap_or_default(),
        slack_bus: raw.slack_bus,
        solver: raw.solver.unwrap_or_default(),
        wind_farms: raw.wind_farm,
        adj_up: raw.adj_up,
        adj_down: raw.adj_down,
        wind_scaling: raw.wind_scaling,
    };
    cfg.validate(case)?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<std::path::Path>, case: &PowerCase) -> Result<StudyConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text, case)
}

impl StudyConfig {
    /// The all-defaults configuration for `case`.
    pub fn defaults_for(case: &PowerCase) -> Self {
        parse_config("", case).expect("defaults are always valid")
    }

    pub fn ambiguity(&self) -> AmbiguitySet {
        AmbiguitySet {
            mu0: DVector::from_column_slice(&self.mu0),
            sigma0: self.sigma0.clone(),
            gamma1: self.gamma1,
            gamma2: self.gamma2,
        }
    }

    pub fn validate(&self, case: &PowerCase) -> Result<()> {
        let n_gen = case.generators.len();
        let n_wind = self
            .wind_farms
            .as_ref()
            .map_or(case.wind_farms.len(), |w| w.len());
        for (name, v, len) in [
            ("eps_gen", &self.eps_gen, n_gen),
            ("eps_adj", &self.eps_adj, n_gen),
            ("eps_line", &self.eps_line, case.branches.len()),
        ] {
            if v.len() != len {
                return Err(Error::dimension(name, len, v.len()));
            }
            check_risk(name, v)?;
        }
        if !(self.gamma1 >= 0.0 && self.gamma1.is_finite()) {
            return Err(Error::range("gamma1", self.gamma1, "γ₁ ≥ 0"));
        }
        if !(self.gamma2 >= 1.0 && self.gamma2.is_finite()) {
            return Err(Error::range("gamma2", self.gamma2, "γ₂ ≥ 1"));
        }
        if self.mu0.len() != n_wind {
            return Err(Error::dimension("mu0", n_wind, self.mu0.len()));
        }
        if self.sigma0.nrows() != n_wind {
            return Err(Error::dimension("sigma0", n_wind, self.sigma0.nrows()));
        }
        check_covariance("sigma0", &self.sigma0)?;
        for (name, v) in [("adj_up", &self.adj_up), ("adj_down", &self.adj_down)] {
            if let Some(v) = v {
                if v.len() != n_gen {
                    return Err(Error::dimension(name, n_gen, v.len()));
                }
            }
        }
        if let Some(v) = &self.adj_up {
            if let Some(i) = v.iter().position(|x| !(*x >= 0.0)) {
                return Err(Error::range(format!("adj_up[{i}]"), v[i], "pᵢᵘ ≥ 0"));
            }
        }
        if let Some(v) = &self.adj_down {
            if let Some(i) = v.iter().position(|x| !(*x <= 0.0)) {
                return Err(Error::range(format!("adj_down[{i}]"), v[i], "pᵢᵈ ≤ 0"));
            }
        }
        if let Some(bus) = self.slack_bus {
            if case.bus_index(bus).is_none() {
                return Err(Error::semantic("slack_bus", format!("bus {bus} does not exist")));
            }
        }
        if let Some(farms) = &self.wind_farms {
            for (i, w) in farms.iter().enumerate() {
                if case.bus_index(w.bus).is_none() {
                    return Err(Error::semantic(
                        format!("wind_farm[{i}].bus"),
                        format!("bus {} does not exist", w.bus),
                    ));
                }
            }
        }
        if let Some(ws) = &self.wind_scaling {
            for (i, &bus) in ws.buses.iter().enumerate() {
                if case.bus_index(bus).is_none() {
                    return Err(Error::semantic(
                        format!("wind_scaling.buses[{i}]"),
                        format!("bus {bus} does not exist"),
                    ));
                }
            }
            if !(ws.std >= 0.0) || !(-1.0..=1.0).contains(&ws.correlation) {
                return Err(Error::semantic("wind_scaling", "std ≥ 0 and |correlation| ≤ 1"));
            }
        }
        Ok(())
    }

    /// The case with this config's wind farms and adjustment limits applied.
    pub fn apply_to(&self, case: &PowerCase) -> PowerCase {
        let mut case = case.clone();
        if let Some(farms) = &self.wind_farms {
            case.wind_farms = farms.clone();
        }
        if let Some(up) = &self.adj_up {
            for (g, &v) in case.generators.iter_mut().zip(up) {
                g.adj_up = v;
            }
        }
        if let Some(down) = &self.adj_down {
            for (g, &v) in case.generators.iter_mut().zip(down) {
                g.adj_down = v;
            }
        }
        case
    }

    /// Slack bus for the shift factors: the override if set, else the case's.
    pub fn slack_for(&self, case: &PowerCase) -> Option<u32> {
        self.slack_bus.or_else(|| case.slack_bus())
    }

    /// Replace the forecast-error statistics and wind farms, e.g. for a
    /// wind-count sweep.
    pub fn with_wind(&self, farms: Vec<WindFarm>, mu0: Vec<f64>, sigma0: DMatrix<f64>) -> Self {
        Self {
            wind_farms: Some(farms),
            mu0,
            sigma0,
            ..self.clone()
        }
    }

    pub fn with_gammas(&self, gamma1: f64, gamma2: f64) -> Self {
        Self {
            gamma1,
            gamma2,
            ..self.clone()
        }
    }

    /// Serialize to TOML. Risk levels are written as explicit vectors.
    pub fn to_toml_string(&self) -> String {
        let raw = RawConfig {
            eps_gen: Some(ScalarOrVec::Vector(self.eps_gen.clone())),
            eps_adj: Some(ScalarOrVec::Vector(self.eps_adj.clone())),
            eps_line: Some(ScalarOrVec::Vector(self.eps_line.clone())),
            epsilon: None,
            gamma1: Some(self.gamma1),
            gamma2: Some(self.gamma2),
            mu0: Some(self.mu0.clone()),
            sigma0: Some(
                self.sigma0
                    .row_iter()
                    .map(|r| r.iter().copied().collect())
                    .collect(),
            ),
            sigma_s_mode: Some(self.sigma_s_mode),
            slack_bus: self.slack_bus,
            adj_up: self.adj_up.clone(),
            adj_down: self.adj_down.clone(),
            solver: Some(self.solver.clone()),
            wind_farm: self.wind_farms.clone(),
            wind_scaling: self.wind_scaling.clone(),
        };
        toml::to_string(&raw).expect("config data is always representable as TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::parse_case;
    use proptest::prelude::*;

    fn case3() -> PowerCase {
        parse_case(crate::case::tests::THREE_BUS).unwrap()
    }

    #[test]
    fn empty_config_takes_defaults() {
        let case = case3();
        let cfg = parse_config("", &case).unwrap();
        assert!(cfg.eps_gen.iter().all(|&e| e == 0.2));
        assert!(cfg.eps_adj.iter().all(|&e| e == 0.2));
        assert_eq!(cfg.eps_line, vec![0.2; 3]);
        assert_eq!(cfg.gamma1, 0.1);
        assert_eq!(cfg.gamma2, 1.1);
        assert_eq!(cfg.sigma_s_mode, SigmaSMode::FullCovariance);
    }

    #[test]
    fn gamma2_below_one_is_a_range_error() {
        let err = parse_config("gamma2 = 0.5", &case3()).unwrap_err();
        assert!(matches!(err, Error::Range { ref what, .. } if what == "gamma2"), "{err}");
    }

    #[test]
    fn epsilon_out_of_range() {
        let err = parse_config("eps_line = 1.0", &case3()).unwrap_err();
        assert!(matches!(err, Error::Range { .. }), "{err}");
    }

    #[test]
    fn sigma_dimension_mismatch() {
        let text = r#"
sigma0 = [[0.01, 0.0], [0.0, 0.01]]
[[wind_farm]]
bus = 1
forecast = 0.1
[[wind_farm]]
bus = 2
forecast = 0.1
[[wind_farm]]
bus = 3
forecast = 0.1
"#;
        let err = parse_config(text, &case3()).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }), "{err}");
    }

    #[test]
    fn non_psd_sigma_rejected() {
        let err = parse_config("sigma0 = [[-0.01]]", &case3()).unwrap_err();
        assert!(err.to_string().contains("positive semidefinite"), "{err}");
    }

    #[test]
    fn wind_override_is_applied() {
        let case = case3();
        let cfg = parse_config(
            "mu0 = [0.0]\nsigma0 = [[0.01]]\n[[wind_farm]]\nbus = 3\nforecast = 0.7\n",
            &case,
        )
        .unwrap();
        let merged = cfg.apply_to(&case);
        assert_eq!(merged.wind_farms, vec![WindFarm { bus: 3, forecast: 0.7 }]);
    }

    #[test]
    fn wind_scaling_builds_equicorrelated_sigma() {
        let ws = WindScaling {
            buses: vec![1, 2, 3],
            forecast: 1.0,
            std: 0.2,
            correlation: 0.5,
        };
        let (farms, mu, sigma) = ws.farms(2).unwrap();
        assert_eq!(farms.len(), 2);
        assert_eq!(mu, vec![0.0; 2]);
        assert!((sigma[(0, 0)] - 0.04).abs() < 1e-15);
        assert!((sigma[(0, 1)] - 0.02).abs() < 1e-15);
        assert!(ws.farms(4).is_err());
    }

    proptest! {
        #[test]
        fn scalar_epsilon_broadcasts(eps in 0.001f64..0.999) {
            let case = case3();
            let cfg = parse_config(&format!("eps_gen = {eps}\neps_line = {eps}"), &case).unwrap();
            prop_assert!(cfg.eps_gen.iter().all(|&e| e == eps));
            prop_assert!(cfg.eps_line.iter().all(|&e| e == eps));
        }

        #[test]
        fn config_round_trip(
            g1 in 0.0f64..1.0,
            dg in 0.0f64..2.0,
            eps in proptest::collection::vec(0.01f64..0.99, 3),
            var in 0.0f64..0.5,
            mu in -0.2f64..0.2,
        ) {
            let case = case3();
            let text = format!(
                "gamma1 = {g1}\ngamma2 = {}\neps_line = [{}, {}, {}]\nmu0 = [{mu}]\nsigma0 = [[{var}]]\nsigma_s_mode = \"paper_literal\"\n",
                1.0 + dg, eps[0], eps[1], eps[2]
            );
            let cfg = parse_config(&text, &case).unwrap();
            let back = parse_config(&cfg.to_toml_string(), &case).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
