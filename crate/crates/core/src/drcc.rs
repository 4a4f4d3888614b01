//! Moment-based robust chance constraints and their deterministic
//! counterparts.
//!
//! A constraint `Pr(a(x)ᵀw ≤ b(x)) ≥ 1 − ε` that must hold for every
//! distribution of `w` in the ambiguity set is replaced by
//! `μ₀ᵀa + k·√(aᵀΣ₀a) ≤ b`, where the safety factor `k` depends on `ε`,
//! `γ₁` and `γ₂`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::check_covariance;
use crate::error::{Error, Result};

/// Round-off slack below which a negative variance is treated as zero.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Distributions whose mean lies in the γ₁-ellipsoid around μ₀ and whose
/// second moment about μ₀ is bounded by γ₂Σ₀.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguitySet {
    pub mu0: DVector<f64>,
    pub sigma0: DMatrix<f64>,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl AmbiguitySet {
    pub fn new(mu0: DVector<f64>, sigma0: DMatrix<f64>, gamma1: f64, gamma2: f64) -> Result<Self> {
        let amb = Self {
            mu0,
            sigma0,
            gamma1,
            gamma2,
        };
        amb.validate()?;
        Ok(amb)
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1 >= 0.0 && self.gamma1.is_finite()) {
            return Err(Error::range("gamma1", self.gamma1, "γ₁ ≥ 0"));
        }
        if !(self.gamma2 >= 1.0 && self.gamma2.is_finite()) {
            return Err(Error::range("gamma2", self.gamma2, "γ₂ ≥ 1"));
        }
        if self.sigma0.nrows() != self.dim() {
            return Err(Error::dimension("sigma0", self.dim(), self.sigma0.nrows()));
        }
        check_covariance("sigma0", &self.sigma0)
    }
}

/// Which closed form produced the safety factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyBranch {
    /// γ₁/γ₂ ≤ ε: k = √γ₁ + √((1−ε)/ε·(γ₂−γ₁)).
    MeanAndSpread,
    /// γ₁/γ₂ > ε: k = √(γ₂/ε).
    SpreadOnly,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::range("eps", eps, "0 < ε < 1"));
    }
    Ok(())
}

/// Safety factor for risk level `eps` under radii `gamma1`, `gamma2`.
pub fn safety_factor_raw(eps: f64, gamma1: f64, gamma2: f64) -> Result<(f64, SafetyBranch)> {
    check_eps(eps)?;
    if gamma1 / gamma2 <= eps {
        let k = gamma1.sqrt() + ((1.0 - eps) / eps * (gamma2 - gamma1)).sqrt();
        Ok((k, SafetyBranch::MeanAndSpread))
    } else {
        Ok(((gamma2 / eps).sqrt(), SafetyBranch::SpreadOnly))
    }
}

pub fn safety_factor(eps: f64, amb: &AmbiguitySet) -> Result<(f64, SafetyBranch)> {
    safety_factor_raw(eps, amb.gamma1, amb.gamma2)
}

/// Both closed forms evaluated at the switch point γ₁ = ε·γ₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryComparison {
    pub mean_and_spread: f64,
    pub spread_only: f64,
    pub relative_difference: f64,
}

pub fn boundary_comparison(eps: f64, gamma2: f64) -> Result<BoundaryComparison> {
    check_eps(eps)?;
    let gamma1 = eps * gamma2;
    let a = gamma1.sqrt() + ((1.0 - eps) / eps * (gamma2 - gamma1)).sqrt();
    let b = (gamma2 / eps).sqrt();
    Ok(BoundaryComparison {
        mean_and_spread: a,
        spread_only: b,
        relative_difference: (a - b).abs() / b,
    })
}

/// Gaussian quantile Φ⁻¹(1−ε): the factor a normality assumption would use.
pub fn gaussian_factor(eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let n = Normal::standard();
    Ok(n.inverse_cdf(1.0 - eps))
}

/// `√v` for a variance that may be slightly negative from round-off.
pub fn guarded_sqrt(v: f64) -> f64 {
    debug_assert!(v >= -VARIANCE_FLOOR * v.abs().max(1.0) || v.is_nan());
    if v <= 0.0 {
        0.0
    } else {
        v.sqrt()
    }
}

/// Symmetric square root of a PSD matrix; round-off negative eigenvalues
/// are clamped to zero.
pub fn sym_sqrt(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    if sigma.nrows() == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = nalgebra::SymmetricEigen::new(sigma.clone());
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let f = &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose();
    // Exact symmetry keeps downstream quadratic forms consistent.
    (&f + f.transpose()) * 0.5
}

/// `Pr(a(x)ᵀw ≤ b(x)) ≥ 1 − ε` with `a(x) = A·x + a₀`, `b(x) = bₓᵀx + b₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustConstraintSpec {
    pub a_x: DMatrix<f64>,
    pub a0: DVector<f64>,
    pub b_x: DVector<f64>,
    pub b0: f64,
    pub eps: f64,
}

impl RobustConstraintSpec {
    /// A constraint whose uncertainty coefficients do not depend on x.
    pub fn fixed(a: DVector<f64>, b_x: DVector<f64>, b0: f64, eps: f64) -> Self {
        Self {
            a_x: DMatrix::zeros(a.len(), b_x.len()),
            a0: a,
            b_x,
            b0,
            eps,
        }
    }

    pub fn a(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a_x * x + &self.a0
    }

    pub fn b(&self, x: &DVector<f64>) -> f64 {
        self.b_x.dot(x) + self.b0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicCounterpart {
    pub k: f64,
    pub branch: SafetyBranch,
    pub spec: RobustConstraintSpec,
    pub mu0: DVector<f64>,
    pub sigma0: DMatrix<f64>,
}

impl DeterministicCounterpart {
    /// True when `a` does not depend on x, so the counterpart is linear.
    pub fn is_linear(&self) -> bool {
        self.spec.a_x.iter().all(|v| *v == 0.0)
    }

    /// μ₀ᵀa + k√(aᵀΣ₀a)
    pub fn lhs(&self, x: &DVector<f64>) -> f64 {
        let a = self.spec.a(x);
        let var = (&self.sigma0 * &a).dot(&a);
        self.mu0.dot(&a) + self.k * guarded_sqrt(var)
    }

    /// Left side minus right side; ≤ 0 means satisfied.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        self.lhs(x) - self.spec.b(x)
    }
}

pub fn counterpart(spec: &RobustConstraintSpec, amb: &AmbiguitySet) -> Result<DeterministicCounterpart> {
    let nw = amb.dim();
    if spec.a0.len() != nw || spec.a_x.nrows() != nw {
        return Err(Error::dimension("uncertainty coefficients", nw, spec.a0.len()));
    }
    if spec.a_x.ncols() != spec.b_x.len() {
        return Err(Error::dimension("decision coefficients", spec.a_x.ncols(), spec.b_x.len()));
    }
    let (k, branch) = safety_factor(spec.eps, amb)?;
    Ok(DeterministicCounterpart {
        k,
        branch,
        spec: spec.clone(),
        mu0: amb.mu0.clone(),
        sigma0: amb.sigma0.clone(),
    })
}
