use super::{
    dot, ConstraintKind, Equality, Inequality, LineData, LineQuadBlocks, ModelAnnotations,
    QcqpModel, SymMatrix, Tag,
};
use crate::case::PowerCase;
use crate::config::{SigmaSMode, StudyConfig};
use crate::drcc::{gaussian_factor, safety_factor_raw, sym_sqrt, SafetyBranch};
use crate::error::{Error, Result};
use crate::network::ShiftFactors;

/// How the safety factor k is chosen from a risk level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SafetyRule {
    /// Moment-ambiguity factor from γ₁, γ₂.
    #[default]
    Robust,
    /// Φ⁻¹(1−ε), as if the forecast error were Gaussian.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    pub safety: SafetyRule,
    /// Add the linear sign rows that keep each squared line constraint
    /// equivalent to its unsquared form.
    pub side_cuts: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            safety: SafetyRule::Robust,
            side_cuts: true,
        }
    }
}

pub fn assemble(
    case: &PowerCase,
    sf: &ShiftFactors,
    cfg: &StudyConfig,
) -> Result<(QcqpModel, ModelAnnotations)> {
    let opts = AssemblyOptions {
        side_cuts: cfg.solver.side_cuts,
        ..AssemblyOptions::default()
    };
    assemble_with(case, sf, cfg, &opts)
}

fn factor(rule: SafetyRule, eps: f64, cfg: &StudyConfig) -> Result<(f64, SafetyBranch)> {
    let (k, branch) = safety_factor_raw(eps, cfg.gamma1, cfg.gamma2)?;
    match rule {
        SafetyRule::Robust => Ok((k, branch)),
        SafetyRule::Gaussian => Ok((gaussian_factor(eps)?, branch)),
    }
}

fn unit(n: usize, i: usize, v: f64) -> Vec<f64> {
    let mut b = vec![0.0; n];
    b[i] = v;
    b
}

/// Build the dispatch model for `case` (with the config's wind farms and
/// adjustment limits already applied).
pub fn assemble_with(
    case: &PowerCase,
    sf: &ShiftFactors,
    cfg: &StudyConfig,
    opts: &AssemblyOptions,
) -> Result<(QcqpModel, ModelAnnotations)> {
    let ng = case.generators.len();
    let nw = case.wind_farms.len();
    let nl = case.branches.len();
    let n = 2 * ng;
    if sf.m_g.ncols() != ng || sf.m_w.ncols() != nw || sf.n_lines() != nl {
        return Err(Error::Assembly(format!(
            "shift factors ({}×{} gen, {} wind) do not match the case ({nl} lines, {ng} gens, {nw} farms)",
            sf.n_lines(),
            sf.m_g.ncols(),
            sf.m_w.ncols()
        )));
    }
    if cfg.mu0.len() != nw || cfg.sigma0.nrows() != nw {
        return Err(Error::dimension("forecast-error moments", nw, cfg.mu0.len()));
    }
    if cfg.eps_gen.len() != ng || cfg.eps_adj.len() != ng || cfg.eps_line.len() != nl {
        return Err(Error::Assembly("risk-level vectors do not match the case".into()));
    }

    let mu_s: f64 = cfg.mu0.iter().sum();
    let sum_sigma: f64 = cfg.sigma0.iter().sum();
    let sigma_s = match cfg.sigma_s_mode {
        SigmaSMode::FullCovariance => sum_sigma,
        SigmaSMode::Trace => cfg.sigma0.trace(),
    };
    let sd_s = sigma_s.max(0.0).sqrt();

    let mut ineqs = Vec::new();
    let mut ineq_tags = Vec::new();
    let mut push = |tag: Tag, ineq: Inequality| {
        ineq_tags.push(tag);
        ineqs.push(ineq);
    };
    let linear = |b: Vec<f64>, c: f64| Inequality {
        q: SymMatrix::Zero,
        b,
        c,
    };

    let mut k_gen = Vec::with_capacity(ng);
    let mut k_adj = Vec::with_capacity(ng);
    let mut branch_gen = Vec::with_capacity(ng);
    let mut branch_adj = Vec::with_capacity(ng);
    let mut warnings = Vec::new();
    let mut alpha_cap = 0.0;
    for (i, g) in case.generators.iter().enumerate() {
        let (k1, b1) = factor(opts.safety, cfg.eps_gen[i], cfg)?;
        let (k2, b2) = factor(opts.safety, cfg.eps_adj[i], cfg)?;
        k_gen.push(k1);
        k_adj.push(k2);
        branch_gen.push(b1);
        branch_adj.push(b2);
        let (p, a) = (i, ng + i);

        let mut b = unit(n, a, mu_s + k1 * sd_s);
        b[p] = -1.0;
        push(Tag { kind: ConstraintKind::GenLo, index: i }, linear(b, -g.p_min));

        let mut b = unit(n, a, -mu_s + k1 * sd_s);
        b[p] = 1.0;
        push(Tag { kind: ConstraintKind::GenHi, index: i }, linear(b, g.p_max));

        let up = mu_s + k2 * sd_s;
        push(Tag { kind: ConstraintKind::AdjUp, index: i }, linear(unit(n, a, up), g.adj_up));

        let dn = -mu_s + k2 * sd_s;
        push(Tag { kind: ConstraintKind::AdjDn, index: i }, linear(unit(n, a, dn), -g.adj_down));

        // Largest αᵢ the two adjustment rows allow.
        let mut cap: f64 = 1.0;
        if up > 0.0 {
            cap = cap.min(g.adj_up / up);
        }
        if dn > 0.0 {
            cap = cap.min(-g.adj_down / dn);
        }
        alpha_cap += cap.max(0.0);
    }
    if alpha_cap < 1.0 {
        warnings.push(format!(
            "adjustment limits allow Σα ≤ {alpha_cap:.4} < 1; the model is likely infeasible"
        ));
    }

    let sigma_e: Vec<f64> = (0..nw).map(|i| cfg.sigma0.row(i).sum()).collect();
    let forecast: Vec<f64> = case.wind_farms.iter().map(|w| w.forecast).collect();
    let mut lines = Vec::new();
    for (l, br) in case.branches.iter().enumerate() {
        if !br.flow_limit.is_finite() {
            continue;
        }
        let (k, branch) = factor(opts.safety, cfg.eps_line[l], cfg)?;
        let m: Vec<f64> = sf.m_g.row(l).iter().copied().collect();
        let m_w: Vec<f64> = sf.m_w.row(l).iter().copied().collect();
        let m_d: Vec<f64> = sf.m_d.row(l).iter().copied().collect();
        let base = dot(&m_w, &forecast) + dot(&m_d, &case.loads);
        let mu_w = dot(&cfg.mu0, &m_w);
        let t1 = br.flow_limit - base - mu_w;
        let t2 = br.flow_limit + base + mu_w;
        let w_var = {
            let sw = &cfg.sigma0 * nalgebra::DVector::from_column_slice(&m_w);
            dot(sw.as_slice(), &m_w)
        };
        let w_cov = dot(&sigma_e, &m_w);
        let k2 = k * k;
        let blocks = LineQuadBlocks {
            m: m.clone(),
            a: -1.0,
            b: mu_s,
            c: mu_s,
            d: k2 * sum_sigma - mu_s * mu_s,
        };

        let mut b = vec![0.0; n];
        for i in 0..ng {
            b[i] = 2.0 * t1 * m[i];
            b[ng + i] = (-2.0 * k2 * w_cov - 2.0 * t1 * mu_s) * m[i];
        }
        push(
            Tag { kind: ConstraintKind::LinePos, index: l },
            Inequality {
                q: SymMatrix::Line(blocks.clone()),
                b,
                c: t1 * t1 - k2 * w_var,
            },
        );
        let mut b = vec![0.0; n];
        for i in 0..ng {
            b[i] = -2.0 * t2 * m[i];
            b[ng + i] = (-2.0 * k2 * w_cov + 2.0 * t2 * mu_s) * m[i];
        }
        push(
            Tag { kind: ConstraintKind::LineNeg, index: l },
            Inequality {
                q: SymMatrix::Line(blocks),
                b,
                c: t2 * t2 - k2 * w_var,
            },
        );
        if opts.side_cuts {
            let mut b = vec![0.0; n];
            for i in 0..ng {
                b[i] = m[i];
                b[ng + i] = -mu_s * m[i];
            }
            let neg: Vec<f64> = b.iter().map(|v| -v).collect();
            push(Tag { kind: ConstraintKind::LinePosSign, index: l }, linear(b, t1));
            push(Tag { kind: ConstraintKind::LineNegSign, index: l }, linear(neg, t2));
        }
        lines.push(LineData {
            line: l,
            k,
            branch,
            m_g: m,
            m_w,
            t1,
            t2,
            w_var,
            w_cov,
        });
    }

    let mut balance = vec![0.0; n];
    balance[..ng].fill(1.0);
    let mut pf = vec![0.0; n];
    pf[ng..].fill(1.0);
    let eqs = vec![
        Equality {
            b: balance,
            c: case.total_load() - case.total_forecast(),
        },
        Equality { b: pf, c: 1.0 },
    ];
    let eq_tags = vec![
        Tag { kind: ConstraintKind::Balance, index: 0 },
        Tag { kind: ConstraintKind::PfSum, index: 0 },
    ];

    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for g in &case.generators {
        lower.push(g.p_min);
        upper.push(g.p_max);
    }
    lower.extend(std::iter::repeat_n(0.0, ng));
    upper.extend(std::iter::repeat_n(1.0, ng));

    let c1: Vec<f64> = case.generators.iter().map(|g| g.cost_quadratic).collect();
    let mut b0: Vec<f64> = case.generators.iter().map(|g| g.cost_linear).collect();
    b0.resize(n, 0.0);
    let model = QcqpModel {
        n_gen: ng,
        q0: SymMatrix::diagonal(&c1),
        b0,
        c0: case.generators.iter().map(|g| g.cost_const).sum(),
        ineqs,
        eqs,
        lower,
        upper,
    };
    let ann = ModelAnnotations {
        ineq_tags,
        eq_tags,
        mu_s,
        sigma_s,
        sum_sigma,
        k_gen,
        k_adj,
        branch_gen,
        branch_adj,
        lines,
        sigma_factor: sym_sqrt(&cfg.sigma0),
        mu0: cfg.mu0.clone(),
        warnings,
    };
    Ok((model, ann))
}
