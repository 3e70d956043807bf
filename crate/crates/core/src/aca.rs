//! Partially pivoted adaptive cross approximation.
//!
//! Besides the low-rank factors, [`AcaResult`] keeps the unmodified pivot rows
//! and columns together with the triangular factors of the pivot block
//! `A(tau, sigma) = L R`, which is all that is needed to form the
//! interpolation operators `A(rows, sigma) A(tau, sigma)^-1` and
//! `A(tau, sigma)^-1 A(tau, cols)` without evaluating any further entries.

use nalgebra::DMatrix;

use crate::kernel::KernelMatrix;

/// Pivots whose magnitude falls below this fraction of the largest pivot make
/// the pivot block numerically singular and are dropped.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

/// Row/column access to the entries of a matrix.
pub trait EntrySource: Sync {
    /// Writes `A(i, cols)` into `out`.
    fn row(&self, i: usize, cols: &[usize], out: &mut [f64]);
    /// Writes `A(rows, j)` into `out`.
    fn column(&self, j: usize, rows: &[usize], out: &mut [f64]);
}

impl EntrySource for KernelMatrix<'_> {
    fn row(&self, i: usize, cols: &[usize], out: &mut [f64]) {
        self.fill_row(i, cols, out);
    }
    fn column(&self, j: usize, rows: &[usize], out: &mut [f64]) {
        self.fill_column(j, rows, out);
    }
}

impl EntrySource for DMatrix<f64> {
    fn row(&self, i: usize, cols: &[usize], out: &mut [f64]) {
        for (o, &j) in out.iter_mut().zip(cols) {
            *o = self[(i, j)];
        }
    }
    fn column(&self, j: usize, rows: &[usize], out: &mut [f64]) {
        for (o, &i) in out.iter_mut().zip(rows) {
            *o = self[(i, j)];
        }
    }
}

/// The transpose of another entry source.
pub struct Transposed<'a, S: ?Sized>(pub &'a S);

impl<S: EntrySource + ?Sized> EntrySource for Transposed<'_, S> {
    fn row(&self, i: usize, cols: &[usize], out: &mut [f64]) {
        self.0.column(i, cols, out);
    }
    fn column(&self, j: usize, rows: &[usize], out: &mut [f64]) {
        self.0.row(j, rows, out);
    }
}

/// Outcome of a partially pivoted ACA run on `A(rows, cols)`.
#[derive(Debug, Clone)]
pub struct AcaResult {
    /// Row pivots `tau` (global indices) in discovery order.
    pub row_pivots: Vec<usize>,
    /// Column pivots `sigma` (global indices) in discovery order.
    pub col_pivots: Vec<usize>,
    /// Positions of the row pivots within the input row list.
    pub row_pivot_pos: Vec<usize>,
    /// Positions of the column pivots within the input column list.
    pub col_pivot_pos: Vec<usize>,
    /// `|rows| x k`, residual columns.
    pub u: DMatrix<f64>,
    /// `|cols| x k`, residual rows scaled by their pivot.
    pub v: DMatrix<f64>,
    /// `A(rows, sigma)`.
    raw_cols: DMatrix<f64>,
    /// `A(tau, cols)` stored transposed, `|cols| x k`.
    raw_rows: DMatrix<f64>,
    /// Lower factor of the pivot block (`U(tau, :)`).
    lower: DMatrix<f64>,
    /// Unit upper factor of the pivot block (`V(sigma, :)^T`).
    upper: DMatrix<f64>,
    pub converged: bool,
    /// Kernel entries evaluated by this run.
    pub evaluations: u64,
    /// Trailing pivots discarded because the pivot block was near singular.
    pub dropped_pivots: usize,
}

impl AcaResult {
    fn empty(m: usize, n: usize) -> Self {
        Self {
            row_pivots: Vec::new(),
            col_pivots: Vec::new(),
            row_pivot_pos: Vec::new(),
            col_pivot_pos: Vec::new(),
            u: DMatrix::zeros(m, 0),
            v: DMatrix::zeros(n, 0),
            raw_cols: DMatrix::zeros(m, 0),
            raw_rows: DMatrix::zeros(n, 0),
            lower: DMatrix::zeros(0, 0),
            upper: DMatrix::zeros(0, 0),
            converged: true,
            evaluations: 0,
            dropped_pivots: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.row_pivots.len()
    }

    /// `U V^T`.
    pub fn approximation(&self) -> DMatrix<f64> {
        &self.u * self.v.transpose()
    }

    /// Lower and unit upper triangular factors with `L R = A(tau, sigma)`.
    pub fn pivot_lu(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.lower, &self.upper)
    }

    /// The exact entries `A(rows, sigma)` evaluated during the run.
    pub fn pivot_columns(&self) -> &DMatrix<f64> {
        &self.raw_cols
    }

    /// The exact entries `A(tau, cols)` evaluated during the run.
    pub fn pivot_rows(&self) -> DMatrix<f64> {
        self.raw_rows.transpose()
    }

    /// `A(tau, sigma)^-1 rhs` by forward and back substitution.
    ///
    /// # Panics
    /// If `rhs` does not have `rank()` rows.
    pub fn apply_pivot_inverse(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(rhs.nrows(), self.rank(), "right-hand side must have k rows");
        let y = self
            .lower
            .solve_lower_triangular(rhs)
            .expect("pivot block has a zero pivot");
        self.upper
            .solve_upper_triangular(&y)
            .expect("pivot block has a zero pivot")
    }

    /// `lhs A(tau, sigma)^-1`.
    ///
    /// # Panics
    /// If `lhs` does not have `rank()` columns.
    pub fn apply_pivot_inverse_right(&self, lhs: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(lhs.ncols(), self.rank(), "left-hand side must have k columns");
        // (A^-T lhs^T)^T with A^T = R^T L^T.
        let y = self
            .upper
            .tr_solve_upper_triangular(&lhs.transpose())
            .expect("pivot block has a zero pivot");
        self.lower
            .tr_solve_lower_triangular(&y)
            .expect("pivot block has a zero pivot")
            .transpose()
    }

    /// `A(rows, sigma) A(tau, sigma)^-1`, the interpolation operator from the
    /// row pivots onto all rows. Rows at the pivot positions are the identity.
    pub fn column_interpolant(&self) -> DMatrix<f64> {
        let mut out = self.apply_pivot_inverse_right(&self.raw_cols);
        for (l, &p) in self.row_pivot_pos.iter().enumerate() {
            out.row_mut(p).fill(0.0);
            out[(p, l)] = 1.0;
        }
        out
    }

    /// `A(tau, sigma)^-1 A(tau, cols)`, returned transposed (`|cols| x k`).
    /// Rows at the column pivot positions are the identity.
    pub fn row_interpolant_transposed(&self) -> DMatrix<f64> {
        let mut out = self.apply_pivot_inverse(&self.raw_rows.transpose()).transpose();
        for (l, &p) in self.col_pivot_pos.iter().enumerate() {
            out.row_mut(p).fill(0.0);
            out[(p, l)] = 1.0;
        }
        out
    }

    fn truncate(&mut self, k: usize) {
        let drop = self.rank() - k;
        if drop == 0 {
            return;
        }
        self.row_pivots.truncate(k);
        self.col_pivots.truncate(k);
        self.row_pivot_pos.truncate(k);
        self.col_pivot_pos.truncate(k);
        self.u = self.u.columns(0, k).into_owned();
        self.v = self.v.columns(0, k).into_owned();
        self.raw_cols = self.raw_cols.columns(0, k).into_owned();
        self.raw_rows = self.raw_rows.columns(0, k).into_owned();
        self.lower = self.lower.view((0, 0), (k, k)).into_owned();
        self.upper = self.upper.view((0, 0), (k, k)).into_owned();
        self.dropped_pivots += drop;
    }
}

/// Partially pivoted ACA of `A(rows, cols)` with relative tolerance `epsilon`.
///
/// The first pivot row is `rows[0]`. Each step takes the largest residual
/// entry in the current row as the column pivot and the largest residual
/// entry of the new column (over unused rows) as the next row; ties go to the
/// lowest position. Iteration stops once `|u_k| |v_k| <= epsilon |A_k|_F`, when
/// the block is exhausted, or after `max_rank` crosses (`converged = false`).
pub fn partial_aca<S: EntrySource + ?Sized>(
    rows: &[usize],
    cols: &[usize],
    oracle: &S,
    epsilon: f64,
    max_rank: Option<usize>,
) -> AcaResult {
    let m = rows.len();
    let n = cols.len();
    let mut result = AcaResult::empty(m, n);
    if m == 0 || n == 0 {
        return result;
    }
    let full = m.min(n);
    let cap = max_rank.unwrap_or(full).min(full);

    let mut us: Vec<Vec<f64>> = Vec::new();
    let mut vs: Vec<Vec<f64>> = Vec::new();
    let mut raw_cols: Vec<Vec<f64>> = Vec::new();
    let mut raw_rows: Vec<Vec<f64>> = Vec::new();
    let mut row_used = vec![false; m];
    let mut col_used = vec![false; n];
    let mut norm2 = 0.0f64;
    let mut evaluations = 0u64;
    let mut next_row = Some(0usize);
    let mut converged = false;

    let mut row_buf = vec![0.0; n];
    let mut res_row = vec![0.0; n];

    loop {
        if us.len() == full {
            converged = true;
            break;
        }
        if us.len() == cap {
            break;
        }
        // Find a row with a nonzero residual.
        let mut found = None;
        let mut candidate = next_row;
        while let Some(r) = candidate {
            row_used[r] = true;
            oracle.row(rows[r], cols, &mut row_buf);
            evaluations += n as u64;
            res_row.copy_from_slice(&row_buf);
            for (u, v) in us.iter().zip(&vs) {
                let f = u[r];
                if f != 0.0 {
                    for (x, y) in res_row.iter_mut().zip(v) {
                        *x -= f * y;
                    }
                }
            }
            let mut best = None;
            let mut best_val = 0.0;
            for (j, &x) in res_row.iter().enumerate() {
                if !col_used[j] && x.abs() > best_val {
                    best_val = x.abs();
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                found = Some((r, j));
                break;
            }
            candidate = row_used.iter().position(|&u| !u);
        }
        let Some((r, j)) = found else {
            converged = true;
            break;
        };
        let pivot = res_row[j];
        if !pivot.is_finite() {
            log::warn!("non-finite pivot encountered in ACA; stopping at rank {}", us.len());
            break;
        }

        let v_new: Vec<f64> = res_row.iter().map(|x| x / pivot).collect();
        let mut raw_col = vec![0.0; m];
        oracle.column(cols[j], rows, &mut raw_col);
        evaluations += m as u64;
        let mut u_new = raw_col.clone();
        for (u, v) in us.iter().zip(&vs) {
            let f = v[j];
            if f != 0.0 {
                for (x, y) in u_new.iter_mut().zip(u) {
                    *x -= f * y;
                }
            }
        }
        col_used[j] = true;

        let u_norm2: f64 = u_new.iter().map(|x| x * x).sum();
        let v_norm2: f64 = v_new.iter().map(|x| x * x).sum();
        let mut cross = 0.0;
        for (u, v) in us.iter().zip(&vs) {
            cross += dot(&u_new, u) * dot(&v_new, v);
        }
        norm2 += 2.0 * cross + u_norm2 * v_norm2;

        us.push(u_new);
        vs.push(v_new);
        raw_cols.push(raw_col);
        raw_rows.push(row_buf.clone());
        result.row_pivot_pos.push(r);
        result.col_pivot_pos.push(j);

        if (u_norm2 * v_norm2).sqrt() <= epsilon * norm2.max(0.0).sqrt() {
            converged = true;
            break;
        }

        let last = us.last().expect("just pushed");
        let mut best = None;
        let mut best_val = -1.0;
        for (i, &x) in last.iter().enumerate() {
            if !row_used[i] && x.abs() > best_val {
                best_val = x.abs();
                best = Some(i);
            }
        }
        next_row = best;
        if next_row.is_none() {
            converged = true;
            break;
        }
    }

    let k = us.len();
    result.u = columns_to_matrix(&us, m);
    result.v = columns_to_matrix(&vs, n);
    result.raw_cols = columns_to_matrix(&raw_cols, m);
    result.raw_rows = columns_to_matrix(&raw_rows, n);
    result.lower = DMatrix::from_fn(k, k, |i, l| {
        if i >= l {
            result.u[(result.row_pivot_pos[i], l)]
        } else {
            0.0
        }
    });
    result.upper = DMatrix::from_fn(k, k, |l, i| {
        if i > l {
            result.v[(result.col_pivot_pos[i], l)]
        } else if i == l {
            1.0
        } else {
            0.0
        }
    });
    result.row_pivots = result.row_pivot_pos.iter().map(|&p| rows[p]).collect();
    result.col_pivots = result.col_pivot_pos.iter().map(|&p| cols[p]).collect();
    result.converged = converged;
    result.evaluations = evaluations;

    let max_pivot = (0..k).map(|l| result.lower[(l, l)].abs()).fold(0.0, f64::max);
    if let Some(bad) = (0..k).find(|&l| result.lower[(l, l)].abs() < SINGULAR_PIVOT_RATIO * max_pivot) {
        log::debug!("dropping {} near-singular ACA pivots", k - bad);
        result.truncate(bad);
    }
    result
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn columns_to_matrix(cols: &[Vec<f64>], nrows: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(nrows, cols.len());
    for (c, col) in cols.iter().enumerate() {
        out.column_mut(c).copy_from_slice(col);
    }
    out
}
