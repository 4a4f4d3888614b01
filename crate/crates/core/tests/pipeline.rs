mod common;

use nalgebra::DVector;

use grcc::config::LpBackendKind;
use grcc::drcc::sym_sqrt;
use grcc::model::{write_qcqp_lp, SafetyRule};
use grcc::risk::{estimate_risk, sample_scenarios, Family};
use grcc::study::{prepare, run_dispatch, solve_prepared, Formulation};

use common::load;

#[test]
fn lp_backends_agree_on_small_fixtures() {
    for name in ["case3", "case5", "case14"] {
        let (case, cfg) = load(name);
        let prep = prepare(&case, &cfg, SafetyRule::Robust).unwrap();
        let mut z = Vec::new();
        for kind in [LpBackendKind::Highs, LpBackendKind::Clarabel] {
            let mut settings = cfg.solver.clone();
            settings.backend = kind;
            let d = solve_prepared(&prep, Formulation::Rlt, &settings).unwrap();
            assert!(d.is_optimal(), "{name} {kind:?}: {}", d.detail);
            z.push(d.objective.unwrap());
        }
        assert!((z[0] - z[1]).abs() <= 1e-6 * z[0].abs(), "{name}: {z:?}");
    }
}

#[test]
fn cone_dispatch_certifies_everywhere() {
    for name in ["case3", "case5", "case14", "case118"] {
        let (case, cfg) = load(name);
        let (_, d) = run_dispatch(&case, &cfg, SafetyRule::Robust, Formulation::Cone).unwrap();
        let c = d.certification.as_ref().unwrap();
        assert!(c.passed, "{name}: {:?}", c.worst);
    }
}

#[test]
fn gaussian_assumption_is_cheaper_than_robust() {
    for name in ["case14", "case118"] {
        let (case, cfg) = load(name);
        let (_, g) = run_dispatch(&case, &cfg, SafetyRule::Gaussian, Formulation::Cone).unwrap();
        let (_, r) = run_dispatch(&case, &cfg, SafetyRule::Robust, Formulation::Cone).unwrap();
        assert!(g.objective.unwrap() <= r.objective.unwrap() + 1e-6, "{name}");
    }
}

#[test]
fn inflated_covariance_with_boundary_mean_stays_near_target() {
    // Scenarios drawn with covariance 1.1·Σ₀ and a mean on the γ₁ boundary
    // in each coordinate direction.
    for name in ["case14", "case118"] {
        let (case, cfg) = load(name);
        let (prep, d) = run_dispatch(&case, &cfg, SafetyRule::Robust, Formulation::Cone).unwrap();
        let x = d.x();
        let nw = cfg.mu0.len();
        let root = sym_sqrt(&cfg.sigma0);
        let sigma = &cfg.sigma0 * 1.1;
        for dir in 0..nw {
            let mut t = DVector::zeros(nw);
            t[dir] = cfg.gamma1.sqrt();
            let mu = DVector::from_column_slice(&cfg.mu0) + &root * t;
            for f in Family::ALL {
                let set = sample_scenarios(f, &mu, &sigma, 10_000, 5 + dir as u64).unwrap();
                let rep = estimate_risk(&x, &set, &prep.case, &prep.sf).unwrap();
                assert!(
                    rep.max_violation <= 0.2 + 3.0 * rep.max_std_error,
                    "{name} {f} dir {dir}: {}",
                    rep.max_violation
                );
            }
        }
    }
}

#[test]
fn lp_file_names_every_row() {
    let (case, cfg) = load("case5");
    let prep = prepare(&case, &cfg, SafetyRule::Robust).unwrap();
    let text = write_qcqp_lp(&prep.model, &prep.ann);
    for tag in prep.ann.ineq_tags.iter().chain(&prep.ann.eq_tags) {
        let name = format!("{}_{}:", tag.kind.as_str(), tag.index);
        assert!(text.contains(&name), "missing {name}");
    }
    assert!(text.contains("Minimize") || text.contains("minimize"));
}

#[test]
fn rlt_sizes_match_lift_counts() {
    let (case, cfg) = load("case14");
    let prep = prepare(&case, &cfg, SafetyRule::Robust).unwrap();
    let (_, d) = run_dispatch(&case, &cfg, SafetyRule::Robust, Formulation::Rlt).unwrap();
    let n = prep.model.n();
    let pairs = n * (n + 1) / 2;
    let size = d.lp_size.unwrap();
    assert_eq!(size.cols, n + pairs);
    // Four McCormick rows per pair, one fewer on each diagonal pair.
    let mccormick = 4 * pairs - n;
    assert_eq!(size.rows, mccormick + prep.model.ineqs.len() + prep.model.eqs.len());
}
