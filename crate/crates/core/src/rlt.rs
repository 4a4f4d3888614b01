//! Reformulation-linearization: replace every product `xᵢxⱼ` by a new
//! column `Xᵢⱼ` and add the McCormick bound-factor rows for each pair.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{QcqpModel, SymMatrix};
use crate::solver::{LinearProgram, LpBuilder};

/// Which bound-factor product a McCormick row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum McCormick {
    /// (xᵢ − lᵢ)(xⱼ − lⱼ) ≥ 0
    LowerLower,
    /// (uᵢ − xᵢ)(uⱼ − xⱼ) ≥ 0
    UpperUpper,
    /// (xᵢ − lᵢ)(uⱼ − xⱼ) ≥ 0
    LowerUpper,
    /// (uᵢ − xᵢ)(xⱼ − lⱼ) ≥ 0
    UpperLower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOrigin {
    /// Index into the model's inequalities.
    Inequality(usize),
    /// Index into the model's equalities.
    Equality(usize),
    McCormick { i: usize, j: usize, kind: McCormick },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiftOptions {
    /// Drop the second mixed row on the diagonal, where both mixed rows
    /// are identical.
    pub dedup_diagonal: bool,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self {
            dedup_diagonal: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LiftedLp {
    /// Dimension of x.
    pub n: usize,
    pub lp: LinearProgram,
    pub origins: Vec<RowOrigin>,
}

/// Column of `Xᵢⱼ` (either order). Pairs before row i number
/// `i·n − i(i−1)/2`.
pub fn pair_column(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    n + i * (2 * n - i + 1) / 2 + (j - i)
}

impl LiftedLp {
    pub fn n_pairs(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn n_mccormick_rows(&self) -> usize {
        self.origins
            .iter()
            .filter(|o| matches!(o, RowOrigin::McCormick { .. }))
            .count()
    }

    /// Columns `[x; upper(xxᵀ)]` for a point x.
    pub fn rank_one_point(&self, x: &[f64]) -> Vec<f64> {
        let mut cols = x.to_vec();
        for i in 0..self.n {
            for j in i..self.n {
                cols.push(x[i] * x[j]);
            }
        }
        cols
    }

    /// Row values at the lifted point of x, indexed like `origins`.
    pub fn rows_at_rank_one(&self, x: &[f64]) -> Vec<f64> {
        self.lp.row_activity(&self.rank_one_point(x))
    }
}

fn quad_terms(q: &SymMatrix, n: usize) -> Vec<(usize, f64)> {
    q.upper_entries(n)
        .into_iter()
        .map(|(i, j, v)| (pair_column(n, i, j), if i == j { v } else { 2.0 * v }))
        .collect()
}

/// Lift the model: each `Q∘X` becomes linear in the X columns.
pub fn lift(model: &QcqpModel, opts: &LiftOptions) -> Result<LiftedLp> {
    let n = model.n();
    for i in 0..n {
        if !(model.lower[i].is_finite() && model.upper[i].is_finite()) {
            return Err(Error::UnboundedVariable { index: i });
        }
    }
    let n_pairs = n * (n + 1) / 2;
    let mut col_lower = model.lower.clone();
    let mut col_upper = model.upper.clone();
    col_lower.resize(n + n_pairs, f64::NEG_INFINITY);
    col_upper.resize(n + n_pairs, f64::INFINITY);
    let mut b = LpBuilder::new(col_lower, col_upper);
    let mut origins = Vec::new();

    for (j, c) in model.b0.iter().enumerate() {
        b.set_cost(j, *c);
    }
    for (col, v) in quad_terms(&model.q0, n) {
        b.set_cost(col, v);
    }
    b.set_offset(model.c0);

    for (k, ineq) in model.ineqs.iter().enumerate() {
        let coefs = ineq
            .b
            .iter()
            .copied()
            .enumerate()
            .chain(quad_terms(&ineq.q, n));
        b.add_row(f64::NEG_INFINITY, ineq.c, coefs);
        origins.push(RowOrigin::Inequality(k));
    }
    for (k, eq) in model.eqs.iter().enumerate() {
        b.add_row(eq.c, eq.c, eq.b.iter().copied().enumerate());
        origins.push(RowOrigin::Equality(k));
    }

    let (l, u) = (&model.lower, &model.upper);
    let inf = f64::INFINITY;
    for i in 0..n {
        for j in i..n {
            let x = pair_column(n, i, j);
            // Coefficients on xᵢ and xⱼ add up when i = j.
            let row = |ci: f64, cj: f64| [(x, 1.0), (i, ci), (j, cj)];
            b.add_row(-l[i] * l[j], inf, row(-l[j], -l[i]));
            origins.push(RowOrigin::McCormick { i, j, kind: McCormick::LowerLower });
            b.add_row(-u[i] * u[j], inf, row(-u[j], -u[i]));
            origins.push(RowOrigin::McCormick { i, j, kind: McCormick::UpperUpper });
            b.add_row(-inf, -l[i] * u[j], row(-u[j], -l[i]));
            origins.push(RowOrigin::McCormick { i, j, kind: McCormick::LowerUpper });
            if !(opts.dedup_diagonal && i == j) {
                b.add_row(-inf, -u[i] * l[j], row(-l[j], -u[i]));
                origins.push(RowOrigin::McCormick { i, j, kind: McCormick::UpperLower });
            }
        }
    }
    Ok(LiftedLp {
        n,
        lp: b.build(),
        origins,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedSolution {
    pub x: Vec<f64>,
    pub big_x: DMatrix<f64>,
    pub objective: f64,
    /// maxᵢⱼ |Xᵢⱼ − xᵢxⱼ|
    pub rank1_gap: f64,
}

/// Unpack LP column values into (x, X).
pub fn extract(lifted: &LiftedLp, cols: &[f64], objective: f64) -> Result<LiftedSolution> {
    let n = lifted.n;
    if cols.len() != n + lifted.n_pairs() {
        return Err(Error::dimension("lifted solution", n + lifted.n_pairs(), cols.len()));
    }
    let x = cols[..n].to_vec();
    let big_x = DMatrix::from_fn(n, n, |i, j| cols[pair_column(n, i, j)]);
    let rank1_gap = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (big_x[(i, j)] - x[i] * x[j]).abs())
        .fold(0.0, f64::max);
    Ok(LiftedSolution {
        x,
        big_x,
        objective,
        rank1_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Equality, Inequality};
    use rand::{RngExt, SeedableRng};

    fn scalar_model() -> QcqpModel {
        // One "generator" so n = 2: x0 ∈ [0, 1], x1 ∈ [0, 1].
        QcqpModel {
            n_gen: 1,
            q0: SymMatrix::diagonal(&[1.0, 0.0]),
            b0: vec![0.0, 0.0],
            c0: 0.0,
            ineqs: vec![],
            eqs: vec![],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        }
    }

    #[test]
    fn pair_columns_are_contiguous() {
        let n = 5;
        let mut expect = n;
        for i in 0..n {
            for j in i..n {
                assert_eq!(pair_column(n, i, j), expect);
                assert_eq!(pair_column(n, j, i), expect);
                expect += 1;
            }
        }
    }

    #[test]
    fn square_envelope_on_unit_interval() {
        let lifted = lift(&scalar_model(), &LiftOptions::default()).unwrap();
        let x00 = pair_column(2, 0, 0);
        let rows = lifted.lp.rows();
        let diag: Vec<_> = lifted
            .origins
            .iter()
            .enumerate()
            .filter(|(_, o)| matches!(o, RowOrigin::McCormick { i: 0, j: 0, .. }))
            .map(|(r, _)| (r, lifted.lp.row_lower[r], lifted.lp.row_upper[r]))
            .collect();
        assert_eq!(diag.len(), 3);
        // X ≥ 0
        assert_eq!(rows[diag[0].0], vec![(x00, 1.0)]);
        assert_eq!(diag[0].1, 0.0);
        // X ≥ 2x − 1
        assert_eq!(rows[diag[1].0], vec![(0, -2.0), (x00, 1.0)]);
        assert_eq!(diag[1].1, -1.0);
        // X ≤ x
        assert_eq!(rows[diag[2].0], vec![(0, -1.0), (x00, 1.0)]);
        assert_eq!(diag[2].2, 0.0);
    }

    #[test]
    fn counts_for_ten_variables() {
        let model = QcqpModel {
            n_gen: 5,
            q0: SymMatrix::Zero,
            b0: vec![0.0; 10],
            c0: 0.0,
            ineqs: vec![],
            eqs: vec![],
            lower: vec![0.0; 10],
            upper: vec![1.0; 10],
        };
        let raw = lift(&model, &LiftOptions { dedup_diagonal: false }).unwrap();
        assert_eq!(raw.n_pairs(), 55);
        assert_eq!(raw.lp.n_cols(), 65);
        assert_eq!(raw.n_mccormick_rows(), 220);
        let dedup = lift(&model, &LiftOptions::default()).unwrap();
        assert_eq!(dedup.n_mccormick_rows(), 210);
    }

    #[test]
    fn unbounded_variable_reports_index() {
        let mut model = scalar_model();
        model.upper[1] = f64::INFINITY;
        assert!(matches!(
            lift(&model, &LiftOptions::default()),
            Err(Error::UnboundedVariable { index: 1 })
        ));
    }

    #[test]
    fn rank_one_gap_on_envelope() {
        let lifted = lift(&scalar_model(), &LiftOptions::default()).unwrap();
        let sol = extract(&lifted, &[0.5, 0.0, 0.5, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(sol.rank1_gap, 0.25);
        let exact = extract(&lifted, &lifted.rank_one_point(&[0.3, 0.6]), 0.09).unwrap();
        assert!(exact.rank1_gap < 1e-16);
    }

    #[test]
    fn rank_one_points_satisfy_every_mccormick_row() {
        let n_gen = 3;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let lower: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..0.5)).collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(0.0..2.0)).collect();
        let model = QcqpModel {
            n_gen,
            q0: SymMatrix::Zero,
            b0: vec![0.0; 6],
            c0: 0.0,
            ineqs: vec![],
            eqs: vec![],
            lower: lower.clone(),
            upper: upper.clone(),
        };
        let lifted = lift(&model, &LiftOptions { dedup_diagonal: false }).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..6).map(|i| rng.random_range(lower[i]..=upper[i])).collect();
            let pt = lifted.rank_one_point(&x);
            assert!(lifted.lp.max_violation(&pt) <= 1e-12);
        }
    }

    #[test]
    fn objective_and_rows_are_exact_at_rank_one_points() {
        let q = SymMatrix::Sparse(vec![(0, 0, 2.0), (0, 1, -0.5), (1, 1, 1.0)]);
        let model = QcqpModel {
            n_gen: 1,
            q0: SymMatrix::diagonal(&[3.0, 0.0]),
            b0: vec![1.0, -2.0],
            c0: 4.0,
            ineqs: vec![Inequality { q: q.clone(), b: vec![0.5, 0.25], c: 1.0 }],
            eqs: vec![Equality { b: vec![1.0, 1.0], c: 1.0 }],
            lower: vec![-1.0, 0.0],
            upper: vec![2.0, 1.0],
        };
        let lifted = lift(&model, &LiftOptions::default()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x = [rng.random_range(-1.0..2.0), rng.random_range(0.0..1.0)];
            let pt = lifted.rank_one_point(&x);
            assert!((lifted.lp.objective(&pt) - model.objective(&x)).abs() < 1e-9);
            let rows = lifted.lp.row_activity(&pt);
            assert!((rows[0] - model.ineqs[0].c - model.ineqs[0].residual(&x)).abs() < 1e-12);
        }
    }
}
