//! DC power-flow injection shift factors.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::case::PowerCase;
use crate::error::{Error, Result};

/// Line-flow sensitivities to injections. Flows are positive in the
/// branch's from→to direction; the slack bus absorbs every injection.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftFactors {
    /// Lines × buses: flow change per unit injected at each bus.
    pub bus: DMatrix<f64>,
    /// Lines × generators.
    pub m_g: DMatrix<f64>,
    /// Lines × wind farms.
    pub m_w: DMatrix<f64>,
    /// Lines × buses; loads withdraw power, so this is `-bus`.
    pub m_d: DMatrix<f64>,
    pub slack_bus: u32,
}

impl ShiftFactors {
    /// Flows for a nodal injection vector (indexed like `case.buses`).
    pub fn flows(&self, injection: &DVector<f64>) -> DVector<f64> {
        &self.bus * injection
    }

    pub fn n_lines(&self) -> usize {
        self.bus.nrows()
    }
}

fn check_connected(case: &PowerCase) -> Result<()> {
    let index = case.bus_index_map();
    let n = case.buses.len();
    let mut adj = vec![Vec::new(); n];
    for br in &case.branches {
        let (f, t) = (index[&br.from], index[&br.to]);
        adj[f].push(t);
        adj[t].push(f);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::Network(format!(
            "network is disconnected: bus {} is unreachable from bus {}",
            case.buses[i].id, case.buses[0].id
        )));
    }
    Ok(())
}

/// Build shift factors with `slack` as the angle reference.
pub fn build_shift_factors(case: &PowerCase, slack: u32) -> Result<ShiftFactors> {
    let index = case.bus_index_map();
    let s = *index
        .get(&slack)
        .ok_or_else(|| Error::Network(format!("slack bus {slack} does not exist")))?;
    check_connected(case)?;

    let n = case.buses.len();
    let nl = case.branches.len();
    // Reduced index: every bus except the slack.
    let reduced = |i: usize| if i < s { Some(i) } else if i > s { Some(i - 1) } else { None };

    let mut b_red = DMatrix::<f64>::zeros(n - 1, n - 1);
    for br in &case.branches {
        let y = 1.0 / br.reactance;
        let (f, t) = (reduced(index[&br.from]), reduced(index[&br.to]));
        if let Some(f) = f {
            b_red[(f, f)] += y;
        }
        if let Some(t) = t {
            b_red[(t, t)] += y;
        }
        if let (Some(f), Some(t)) = (f, t) {
            b_red[(f, t)] -= y;
            b_red[(t, f)] -= y;
        }
    }
    let b_inv = if n > 1 {
        b_red
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Network("reduced susceptance matrix is singular".into()))?
    } else {
        DMatrix::zeros(0, 0)
    };

    // H = diag(1/x) · A · B⁻¹, with a zero column for the slack.
    let mut bus = DMatrix::<f64>::zeros(nl, n);
    for (l, br) in case.branches.iter().enumerate() {
        let y = 1.0 / br.reactance;
        let (f, t) = (reduced(index[&br.from]), reduced(index[&br.to]));
        for j in 0..n {
            let Some(jr) = reduced(j) else { continue };
            let theta_f = f.map_or(0.0, |f| b_inv[(f, jr)]);
            let theta_t = t.map_or(0.0, |t| b_inv[(t, jr)]);
            bus[(l, j)] = y * (theta_f - theta_t);
        }
    }

    let pick = |buses: &mut dyn Iterator<Item = u32>| -> DMatrix<f64> {
        let cols: Vec<usize> = buses.map(|b| index[&b]).collect();
        DMatrix::from_fn(nl, cols.len(), |l, k| bus[(l, cols[k])])
    };
    let m_g = pick(&mut case.generators.iter().map(|g| g.bus));
    let m_w = pick(&mut case.wind_farms.iter().map(|w| w.bus));
    let m_d = -bus.clone();
    Ok(ShiftFactors {
        bus,
        m_g,
        m_w,
        m_d,
        slack_bus: slack,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::case::{parse_case, Branch, Bus, BusType, Generator};
    use rand::{RngExt, SeedableRng};

    /// Independent DC solve on the full susceptance matrix with the
    /// reference row replaced by θ_slack = 0.
    pub(crate) fn direct_dc_flows(case: &PowerCase, slack: u32, injection: &[f64]) -> Vec<f64> {
        let n = case.buses.len();
        let pos = |id: u32| case.buses.iter().position(|b| b.id == id).unwrap();
        let mut b = DMatrix::<f64>::zeros(n, n);
        for br in &case.branches {
            let (f, t) = (pos(br.from), pos(br.to));
            let y = 1.0 / br.reactance;
            b[(f, f)] += y;
            b[(t, t)] += y;
            b[(f, t)] -= y;
            b[(t, f)] -= y;
        }
        let s = pos(slack);
        let mut rhs = DVector::from_column_slice(injection);
        // Slack balances the system.
        let total: f64 = injection.iter().sum();
        rhs[s] -= total;
        for j in 0..n {
            b[(s, j)] = 0.0;
        }
        b[(s, s)] = 1.0;
        rhs[s] = 0.0;
        let theta = b.full_piv_lu().solve(&rhs).unwrap();
        case.branches
            .iter()
            .map(|br| (theta[pos(br.from)] - theta[pos(br.to)]) / br.reactance)
            .collect()
    }

    fn line_case(n: usize, ring: bool) -> PowerCase {
        let buses = (1..=n as u32)
            .map(|id| Bus {
                id,
                kind: if id == 1 { BusType::Slack } else { BusType::Pq },
            })
            .collect();
        let mut branches: Vec<Branch> = (1..n as u32)
            .map(|i| Branch {
                from: i,
                to: i + 1,
                reactance: 0.1,
                flow_limit: 1.0,
            })
            .collect();
        if ring {
            branches.push(Branch {
                from: n as u32,
                to: 1,
                reactance: 0.1,
                flow_limit: 1.0,
            });
        }
        PowerCase {
            name: "toy".into(),
            base_mva: 100.0,
            buses,
            branches,
            generators: vec![Generator {
                bus: 1,
                p_min: 0.0,
                p_max: 1.0,
                adj_down: -0.1,
                adj_up: 0.1,
                cost_quadratic: 0.0,
                cost_linear: 1.0,
                cost_const: 0.0,
            }],
            loads: vec![0.0; n],
            wind_farms: vec![],
        }
    }

    #[test]
    fn two_bus_single_line() {
        let case = line_case(2, false);
        let sf = build_shift_factors(&case, 1).unwrap();
        assert_eq!(sf.bus[(0, 1)], -1.0);
        assert_eq!(sf.bus[(0, 0)], 0.0);
    }

    #[test]
    fn three_bus_ring_splits_two_thirds() {
        // Lines 1→2, 2→3, 3→1. Injection at 2 returns to 1 directly (2/3)
        // and via 3 (1/3).
        let case = line_case(3, true);
        let sf = build_shift_factors(&case, 1).unwrap();
        assert!((sf.bus[(0, 1)] + 2.0 / 3.0).abs() < 1e-12);
        assert!((sf.bus[(1, 1)] - 1.0 / 3.0).abs() < 1e-12);
        assert!((sf.bus[(2, 1)] - 1.0 / 3.0).abs() < 1e-12);
        for l in 0..3 {
            assert_eq!(sf.bus[(l, 0)], 0.0);
        }
        assert_eq!(sf.m_d, -sf.bus.clone());
    }

    #[test]
    fn disconnected_network_rejected() {
        let mut case = line_case(3, false);
        case.branches.pop();
        assert!(matches!(
            build_shift_factors(&case, 1),
            Err(Error::Network(_))
        ));
    }

    #[test]
    fn random_injections_match_direct_solve() {
        let case = parse_case(crate::case::tests::THREE_BUS).unwrap();
        let slack = case.slack_bus().unwrap();
        let sf = build_shift_factors(&case, slack).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let g: Vec<f64> = (0..case.buses.len())
                .map(|_| rng.random_range(-2.0..2.0))
                .collect();
            let f = sf.flows(&DVector::from_column_slice(&g));
            let direct = direct_dc_flows(&case, slack, &g);
            for (a, b) in f.iter().zip(&direct) {
                assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn angle_shift_leaves_flows_unchanged() {
        let case = line_case(4, true);
        let theta = [0.0, 0.3, -0.1, 0.25];
        let flows = |t: &[f64]| -> Vec<f64> {
            case.branches
                .iter()
                .map(|br| (t[br.from as usize - 1] - t[br.to as usize - 1]) / br.reactance)
                .collect()
        };
        let shifted: Vec<f64> = theta.iter().map(|t| t + 1.7).collect();
        for (a, b) in flows(&theta).iter().zip(flows(&shifted)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_and_wind_columns_follow_buses() {
        let case = parse_case(crate::case::tests::THREE_BUS).unwrap();
        let sf = build_shift_factors(&case, 1).unwrap();
        let w = case.bus_index(case.wind_farms[0].bus).unwrap();
        for l in 0..sf.n_lines() {
            assert_eq!(sf.m_w[(l, 0)], sf.bus[(l, w)]);
            assert_eq!(sf.m_g[(l, 0)], 0.0);
        }
    }
}
