use std::fmt::Write;

/// `min cᵀx + offset  s.t.  row_lower ≤ Ax ≤ row_upper,  col_lower ≤ x ≤ col_upper`
/// with A in compressed-column form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub offset: f64,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    pub col_starts: Vec<usize>,
    pub row_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl LinearProgram {
    pub fn n_cols(&self) -> usize {
        self.cost.len()
    }

    pub fn n_rows(&self) -> usize {
        self.row_lower.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.offset + self.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Ax
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.n_rows()];
        for j in 0..self.n_cols() {
            for k in self.col_starts[j]..self.col_starts[j + 1] {
                act[self.row_indices[k]] += self.values[k] * x[j];
            }
        }
        act
    }

    /// Largest bound or row violation at x.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let act = self.row_activity(x);
        let rows = act
            .iter()
            .zip(self.row_lower.iter().zip(&self.row_upper))
            .map(|(a, (lo, hi))| (lo - a).max(a - hi));
        let cols = x
            .iter()
            .zip(self.col_lower.iter().zip(&self.col_upper))
            .map(|(v, (lo, hi))| (lo - v).max(v - hi));
        rows.chain(cols).fold(0.0, f64::max)
    }

    /// Row-major view: per row, the `(col, value)` pairs.
    pub fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); self.n_rows()];
        for j in 0..self.n_cols() {
            for k in self.col_starts[j]..self.col_starts[j + 1] {
                rows[self.row_indices[k]].push((j, self.values[k]));
            }
        }
        rows
    }

    /// CPLEX LP text with columns `c0, c1, …` and rows `r0, r1, …`.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::from("Minimize\n obj:");
        let term = |out: &mut String, v: f64, name: String, first: bool| {
            if first && v >= 0.0 {
                write!(out, " {v:?} {name}").unwrap();
            } else {
                let sign = if v < 0.0 { "-" } else { "+" };
                write!(out, " {sign} {:?} {name}", v.abs()).unwrap();
            }
        };
        let mut first = true;
        for (j, &c) in self.cost.iter().enumerate() {
            if c != 0.0 {
                term(&mut out, c, format!("c{j}"), first);
                first = false;
            }
        }
        if self.offset != 0.0 || first {
            write!(out, " + {:?}", self.offset).unwrap();
        }
        out.push_str("\nSubject To\n");
        for (i, row) in self.rows().into_iter().enumerate() {
            let (lo, hi) = (self.row_lower[i], self.row_upper[i]);
            let mut expr = String::new();
            for (k, (j, v)) in row.iter().enumerate() {
                term(&mut expr, *v, format!("c{j}"), k == 0);
            }
            if row.is_empty() {
                expr.push_str(" 0 c0");
            }
            if lo == hi {
                writeln!(out, " r{i}:{expr} = {lo:?}").unwrap();
            } else {
                if hi.is_finite() {
                    writeln!(out, " r{i}:{expr} <= {hi:?}").unwrap();
                }
                if lo.is_finite() {
                    writeln!(out, " r{i}_lo:{expr} >= {lo:?}").unwrap();
                }
            }
        }
        out.push_str("Bounds\n");
        for j in 0..self.n_cols() {
            let (lo, hi) = (self.col_lower[j], self.col_upper[j]);
            match (lo.is_finite(), hi.is_finite()) {
                (false, false) => writeln!(out, " c{j} free").unwrap(),
                (true, true) => writeln!(out, " {lo:?} <= c{j} <= {hi:?}").unwrap(),
                (true, false) => writeln!(out, " c{j} >= {lo:?}").unwrap(),
                (false, true) => writeln!(out, " -inf <= c{j} <= {hi:?}").unwrap(),
            }
        }
        out.push_str("End\n");
        out
    }
}

/// Row-wise LP builder.
#[derive(Debug, Default)]
pub struct LpBuilder {
    n_cols: usize,
    cost: Vec<f64>,
    offset: f64,
    col_lower: Vec<f64>,
    col_upper: Vec<f64>,
    row_lower: Vec<f64>,
    row_upper: Vec<f64>,
    triplets: Vec<(usize, usize, f64)>,
}

impl LpBuilder {
    pub fn new(col_lower: Vec<f64>, col_upper: Vec<f64>) -> Self {
        let n = col_lower.len();
        assert_eq!(n, col_upper.len());
        Self {
            n_cols: n,
            cost: vec![0.0; n],
            col_lower,
            col_upper,
            ..Self::default()
        }
    }

    pub fn set_cost(&mut self, col: usize, c: f64) {
        self.cost[col] += c;
    }

    pub fn set_offset(&mut self, offset: f64) {
        self.offset = offset;
    }

    /// Append a row; zero coefficients are dropped. Returns its index.
    pub fn add_row(&mut self, lower: f64, upper: f64, coefs: impl IntoIterator<Item = (usize, f64)>) -> usize {
        let r = self.row_lower.len();
        self.row_lower.push(lower);
        self.row_upper.push(upper);
        for (c, v) in coefs {
            debug_assert!(c < self.n_cols);
            if v != 0.0 {
                self.triplets.push((c, r, v));
            }
        }
        r
    }

    pub fn n_rows(&self) -> usize {
        self.row_lower.len()
    }

    /// Compress to column form; duplicate `(row, col)` entries are summed.
    pub fn build(mut self) -> LinearProgram {
        self.triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut col_starts = vec![0usize; self.n_cols + 1];
        let mut row_indices = Vec::with_capacity(self.triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (c, r, v) in self.triplets {
            if last == Some((c, r)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((c, r));
            col_starts[c + 1] += 1;
            row_indices.push(r);
            values.push(v);
        }
        for j in 0..self.n_cols {
            col_starts[j + 1] += col_starts[j];
        }
        LinearProgram {
            cost: self.cost,
            offset: self.offset,
            col_lower: self.col_lower,
            col_upper: self.col_upper,
            row_lower: self.row_lower,
            row_upper: self.row_upper,
            col_starts,
            row_indices,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_compresses_and_sums_duplicates() {
        let mut b = LpBuilder::new(vec![0.0; 3], vec![1.0; 3]);
        b.add_row(f64::NEG_INFINITY, 1.0, [(0, 1.0), (2, 2.0), (0, 0.5)]);
        b.add_row(0.0, 0.0, [(1, -1.0), (1, 0.0)]);
        let lp = b.build();
        assert_eq!(lp.col_starts, vec![0, 1, 2, 3]);
        assert_eq!(lp.values, vec![1.5, -1.0, 2.0]);
        assert_eq!(lp.row_activity(&[1.0, 1.0, 1.0]), vec![3.5, -1.0]);
        assert!((lp.max_violation(&[1.0, 0.0, 1.0]) - 2.5).abs() < 1e-15);
        let text = lp.to_lp_string();
        assert!(text.contains(" r1: - 1.0 c1 = 0.0"));
    }
}
