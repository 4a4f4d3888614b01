//! The dispatch problem as a quadratically constrained program over
//! `x = [p; α]`:
//!
//! ```text
//! min  Q₀∘xxᵀ + b₀ᵀx + c₀
//! s.t. Qᵢ∘xxᵀ + bᵢᵀx ≤ cᵢ      (inequalities)
//!      bⱼᵀx = cⱼ              (equalities)
//!      l ≤ x ≤ u
//! ```

mod assemble;
mod lp_format;

pub use assemble::{assemble, assemble_with, AssemblyOptions, SafetyRule};
pub use lp_format::write_qcqp_lp;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::drcc::SafetyBranch;

/// Coefficients of a line's quadratic form. With `m` the line's generator
/// shift factors, the Q matrix is
/// `[[a·mmᵀ, b·mmᵀ], [c·mmᵀ, d·mmᵀ]]` over `[p; α]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineQuadBlocks {
    pub m: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl LineQuadBlocks {
    fn block(&self, coef: f64) -> DMatrix<f64> {
        let n = self.m.len();
        DMatrix::from_fn(n, n, |i, j| coef * self.m[i] * self.m[j])
    }

    pub fn a_block(&self) -> DMatrix<f64> {
        self.block(self.a)
    }

    pub fn b_block(&self) -> DMatrix<f64> {
        self.block(self.b)
    }

    pub fn c_block(&self) -> DMatrix<f64> {
        self.block(self.c)
    }

    pub fn d_block(&self) -> DMatrix<f64> {
        self.block(self.d)
    }
}

/// Symmetric matrix. Only the upper triangle is meaningful.
#[derive(Debug, Clone, PartialEq)]
pub enum SymMatrix {
    Zero,
    /// Upper-triangle entries `(i, j, v)` with `i ≤ j`, sorted, no duplicates.
    Sparse(Vec<(usize, usize, f64)>),
    Line(LineQuadBlocks),
}

impl SymMatrix {
    pub fn diagonal(values: &[f64]) -> Self {
        SymMatrix::Sparse(
            values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, i, *v))
                .collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SymMatrix::Zero => true,
            SymMatrix::Sparse(e) => e.iter().all(|t| t.2 == 0.0),
            SymMatrix::Line(l) => {
                l.m.iter().all(|v| *v == 0.0) || [l.a, l.b, l.c, l.d].iter().all(|v| *v == 0.0)
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        match self {
            SymMatrix::Zero => 0.0,
            SymMatrix::Sparse(e) => e
                .binary_search_by(|t| (t.0, t.1).cmp(&(i, j)))
                .map_or(0.0, |k| e[k].2),
            SymMatrix::Line(l) => {
                let ng = l.m.len();
                let (bi, ii) = (i / ng, i % ng);
                let (bj, jj) = (j / ng, j % ng);
                let coef = match (bi, bj) {
                    (0, 0) => l.a,
                    (0, 1) => l.b,
                    (1, 0) => l.c,
                    (1, 1) => l.d,
                    _ => 0.0,
                };
                coef * l.m[ii] * l.m[jj]
            }
        }
    }

    /// `Q∘xxᵀ = xᵀQx`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        match self {
            SymMatrix::Zero => 0.0,
            SymMatrix::Sparse(e) => e
                .iter()
                .map(|&(i, j, v)| if i == j { v * x[i] * x[i] } else { 2.0 * v * x[i] * x[j] })
                .sum(),
            SymMatrix::Line(l) => {
                let ng = l.m.len();
                let p: f64 = l.m.iter().zip(&x[..ng]).map(|(m, v)| m * v).sum();
                let s: f64 = l.m.iter().zip(&x[ng..2 * ng]).map(|(m, v)| m * v).sum();
                l.a * p * p + (l.b + l.c) * p * s + l.d * s * s
            }
        }
    }

    /// Nonzero upper-triangle entries in row-major order.
    pub fn upper_entries(&self, n: usize) -> Vec<(usize, usize, f64)> {
        match self {
            SymMatrix::Zero => Vec::new(),
            SymMatrix::Sparse(e) => e.iter().copied().filter(|t| t.2 != 0.0).collect(),
            SymMatrix::Line(_) => {
                let mut out = Vec::new();
                for i in 0..n {
                    for j in i..n {
                        let v = self.get(i, j);
                        if v != 0.0 {
                            out.push((i, j, v));
                        }
                    }
                }
                out
            }
        }
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        match self {
            SymMatrix::Line(l) => {
                let ng = l.m.len();
                let mut q = DMatrix::zeros(n, n);
                q.view_mut((0, 0), (ng, ng)).copy_from(&l.a_block());
                q.view_mut((0, ng), (ng, ng)).copy_from(&l.b_block());
                q.view_mut((ng, 0), (ng, ng)).copy_from(&l.c_block());
                q.view_mut((ng, ng), (ng, ng)).copy_from(&l.d_block());
                q
            }
            _ => DMatrix::from_fn(n, n, |i, j| self.get(i, j)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    GenLo,
    GenHi,
    AdjUp,
    AdjDn,
    LinePos,
    LineNeg,
    /// The right side of the squared `LinePos` constraint is nonnegative.
    LinePosSign,
    LineNegSign,
    Balance,
    PfSum,
}

impl ConstraintKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::GenLo => "gen_lo",
            ConstraintKind::GenHi => "gen_hi",
            ConstraintKind::AdjUp => "adj_up",
            ConstraintKind::AdjDn => "adj_dn",
            ConstraintKind::LinePos => "line_pos",
            ConstraintKind::LineNeg => "line_neg",
            ConstraintKind::LinePosSign => "line_pos_sign",
            ConstraintKind::LineNegSign => "line_neg_sign",
            ConstraintKind::Balance => "balance",
            ConstraintKind::PfSum => "pf_sum",
        }
    }
}

/// A constraint's kind and the generator or line it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Tag {
    pub kind: ConstraintKind,
    pub index: usize,
}

impl std::fmt::Display for Tag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}[{}]", self.kind.as_str(), self.index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inequality {
    pub q: SymMatrix,
    pub b: Vec<f64>,
    pub c: f64,
}

impl Inequality {
    /// `Q∘xxᵀ + bᵀx − c`; positive means violated.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.q.quad_form(x) + dot(&self.b, x) - self.c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equality {
    pub b: Vec<f64>,
    pub c: f64,
}

impl Equality {
    pub fn residual(&self, x: &[f64]) -> f64 {
        dot(&self.b, x) - self.c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpModel {
    /// Number of generators; `n = 2·n_gen`.
    pub n_gen: usize,
    pub q0: SymMatrix,
    pub b0: Vec<f64>,
    pub c0: f64,
    pub ineqs: Vec<Inequality>,
    pub eqs: Vec<Equality>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QcqpModel {
    pub fn n(&self) -> usize {
        2 * self.n_gen
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.q0.quad_form(x) + dot(&self.b0, x) + self.c0
    }
}

/// Per-line data kept for the cone path and for certification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineData {
    /// Branch index in the case.
    pub line: usize,
    pub k: f64,
    pub branch: SafetyBranch,
    /// m_gₗ
    pub m_g: Vec<f64>,
    /// m_wₗ
    pub m_w: Vec<f64>,
    pub t1: f64,
    pub t2: f64,
    /// m_wₗᵀΣ₀m_wₗ
    pub w_var: f64,
    /// (Σ₀e)ᵀm_wₗ
    pub w_cov: f64,
}

impl LineData {
    /// Variance of the line's forecast-error term for participation
    /// `s = m_gᵀα`.
    pub fn variance(&self, s: f64, sum_sigma: f64) -> f64 {
        self.w_var - 2.0 * s * self.w_cov + s * s * sum_sigma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelAnnotations {
    pub ineq_tags: Vec<Tag>,
    pub eq_tags: Vec<Tag>,
    /// eᵀμ₀
    pub mu_s: f64,
    /// Variance of eᵀw used by the generator and adjustment rows.
    pub sigma_s: f64,
    /// eᵀΣ₀e, used by the line rows regardless of `sigma_s`.
    pub sum_sigma: f64,
    pub k_gen: Vec<f64>,
    pub k_adj: Vec<f64>,
    pub branch_gen: Vec<SafetyBranch>,
    pub branch_adj: Vec<SafetyBranch>,
    pub lines: Vec<LineData>,
    /// Symmetric square root of Σ₀.
    #[serde(skip)]
    pub sigma_factor: DMatrix<f64>,
    pub mu0: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ModelAnnotations {
    pub fn line(&self, line: usize) -> Option<&LineData> {
        self.lines.iter().find(|l| l.line == line)
    }

    pub fn ineq_index(&self, tag: Tag) -> Option<usize> {
        self.ineq_tags.iter().position(|t| *t == tag)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_lookup_and_quad_form() {
        let q = SymMatrix::Sparse(vec![(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)]);
        assert_eq!(q.get(1, 0), 1.0);
        assert_eq!(q.quad_form(&[1.0, 2.0]), 2.0 + 4.0 + 12.0);
    }

    #[test]
    fn line_blocks_match_dense_expansion() {
        let blocks = LineQuadBlocks {
            m: vec![0.5, -0.25, 1.0],
            a: -1.0,
            b: 0.3,
            c: 0.3,
            d: 2.0,
        };
        let q = SymMatrix::Line(blocks);
        let dense = q.to_dense(6);
        assert_eq!(dense, dense.transpose());
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let xv = nalgebra::DVector::from_column_slice(&x);
        let direct = (xv.transpose() * &dense * &xv)[(0, 0)];
        assert!((q.quad_form(&x) - direct).abs() < 1e-14);
        let sum: f64 = q
            .upper_entries(6)
            .iter()
            .map(|&(i, j, v)| if i == j { v * x[i] * x[i] } else { 2.0 * v * x[i] * x[j] })
            .sum();
        assert!((sum - direct).abs() < 1e-14);
    }
}
