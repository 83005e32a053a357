//! Diagonal Ruiz equilibration and the limited presolve applied before the
//! PDHG iterations.

use crate::lp::{LinearProgram, Sense};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

use super::SolverError;

/// Working problem `min c.x, A x (senses) b, x >= 0` seen by the iterations.
#[derive(Clone, Debug)]
pub struct ScaledProblem<T> {
    pub matrix: CsrMatrix<T>,
    pub transpose: CsrMatrix<T>,
    pub objective: Vec<T>,
    pub rhs: Vec<T>,
    pub senses: Vec<Sense>,
    /// Original `x = col_scale * x_scaled`.
    pub col_scale: Vec<T>,
    /// Original `y = row_scale * y_scaled`.
    pub row_scale: Vec<T>,
}

/// Ruiz equilibration: each sweep divides every row and column by the square
/// root of its largest absolute entry. Empty rows and columns keep scale 1.
pub fn ruiz<T: Scalar>(matrix: &CsrMatrix<T>, iters: usize) -> (CsrMatrix<T>, Vec<T>, Vec<T>) {
    let mut a = matrix.clone();
    let mut row_scale = vec![T::one(); a.n_rows()];
    let mut col_scale = vec![T::one(); a.n_cols()];
    let inv_sqrt = |v: T| if v > T::zero() { T::one() / v.sqrt() } else { T::one() };
    for _ in 0..iters {
        let r: Vec<T> = a.row_abs_max().into_iter().map(inv_sqrt).collect();
        let c: Vec<T> = a.col_abs_max().into_iter().map(inv_sqrt).collect();
        a.scale(&r, &c);
        row_scale.iter_mut().zip(&r).for_each(|(s, &f)| *s = *s * f);
        col_scale.iter_mut().zip(&c).for_each(|(s, &f)| *s = *s * f);
    }
    (a, row_scale, col_scale)
}

/// Scales an LP: `A' = R A C`, `c' = C c`, `b' = R b`.
pub fn precondition<T: Scalar>(lp: &LinearProgram<T>, iters: usize) -> ScaledProblem<T> {
    scale_parts(&lp.matrix, &lp.objective, &lp.rhs, &lp.senses, iters)
}

pub(crate) fn scale_parts<T: Scalar>(
    matrix: &CsrMatrix<T>,
    objective: &[T],
    rhs: &[T],
    senses: &[Sense],
    iters: usize,
) -> ScaledProblem<T> {
    let (a, row_scale, col_scale) = ruiz(matrix, iters);
    ScaledProblem {
        transpose: a.transpose(),
        matrix: a,
        objective: objective.iter().zip(&col_scale).map(|(&c, &s)| c * s).collect(),
        rhs: rhs.iter().zip(&row_scale).map(|(&b, &s)| b * s).collect(),
        senses: senses.to_vec(),
        col_scale,
        row_scale,
    }
}

/// Mapping from a presolved problem back to the original one.
#[derive(Clone, Debug)]
pub struct Presolve<T> {
    pub matrix: CsrMatrix<T>,
    pub objective: Vec<T>,
    pub rhs: Vec<T>,
    pub senses: Vec<Sense>,
    /// Original column of each kept column.
    pub kept_cols: Vec<usize>,
    /// Original row of each kept row.
    pub kept_rows: Vec<usize>,
    /// Equality rows with zero right-hand side and positive coefficients;
    /// every column they touch is fixed at zero.
    pub zero_mass_rows: Vec<usize>,
}

/// Removes identically zero rows and columns and the columns fixed at zero by
/// zero-mass equality rows (e.g. marginal atoms with zero weight).
pub fn presolve<T: Scalar>(lp: &LinearProgram<T>) -> Result<Presolve<T>, SolverError> {
    let (m, n) = (lp.n_rows(), lp.n_vars());
    let a = &lp.matrix;
    let mut fixed = vec![false; n];
    let mut zero_mass_rows = Vec::new();
    for r in 0..m {
        let (cols, vals) = a.row(r);
        if lp.senses[r] == Sense::Eq
            && lp.rhs[r] == T::zero()
            && !cols.is_empty()
            && vals.iter().all(|&v| v > T::zero())
        {
            zero_mass_rows.push(r);
            cols.iter().for_each(|&c| fixed[c] = true);
        }
    }
    // Columns that appear in no row.
    let col_max = a.col_abs_max();
    for j in 0..n {
        if col_max[j] == T::zero() && !fixed[j] {
            if lp.objective[j] < T::zero() {
                return Err(SolverError::Unbounded { column: j });
            }
            fixed[j] = true;
        }
    }
    let kept_cols: Vec<usize> = (0..n).filter(|&j| !fixed[j]).collect();
    let mut new_index = vec![usize::MAX; n];
    for (k, &j) in kept_cols.iter().enumerate() {
        new_index[j] = k;
    }

    let mut kept_rows = Vec::new();
    let mut offsets = vec![0usize];
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for r in 0..m {
        let (cols, vals) = a.row(r);
        let before = indices.len();
        for (&c, &v) in cols.iter().zip(vals) {
            if !fixed[c] && v != T::zero() {
                indices.push(new_index[c]);
                values.push(v);
            }
        }
        if indices.len() == before {
            let b = lp.rhs[r];
            let consistent = match lp.senses[r] {
                Sense::Eq => b == T::zero(),
                Sense::Le => b >= T::zero(),
                Sense::Ge => b <= T::zero(),
            };
            if !consistent {
                return Err(SolverError::Infeasible { row: r });
            }
            continue;
        }
        kept_rows.push(r);
        offsets.push(indices.len());
    }
    let matrix = CsrMatrix::new(kept_rows.len(), kept_cols.len(), offsets, indices, values)
        .expect("presolve preserves CSR structure");
    Ok(Presolve {
        matrix,
        objective: kept_cols.iter().map(|&j| lp.objective[j]).collect(),
        rhs: kept_rows.iter().map(|&r| lp.rhs[r]).collect(),
        senses: kept_rows.iter().map(|&r| lp.senses[r]).collect(),
        kept_cols,
        kept_rows,
        zero_mass_rows,
    })
}

impl<T: Scalar> Presolve<T> {
    /// Identity presolve that keeps every row and column.
    pub fn identity(lp: &LinearProgram<T>) -> Self {
        Self {
            matrix: lp.matrix.clone(),
            objective: lp.objective.clone(),
            rhs: lp.rhs.clone(),
            senses: lp.senses.clone(),
            kept_cols: (0..lp.n_vars()).collect(),
            kept_rows: (0..lp.n_rows()).collect(),
            zero_mass_rows: Vec::new(),
        }
    }

    /// Expands a reduced primal-dual pair to the original problem. Duals of
    /// zero-mass rows are chosen so that every removed column keeps a
    /// nonnegative reduced cost.
    pub fn postsolve(&self, lp: &LinearProgram<T>, x: &[T], y: &[T]) -> (Vec<T>, Vec<T>) {
        let mut full_x = vec![T::zero(); lp.n_vars()];
        for (&j, &v) in self.kept_cols.iter().zip(x) {
            full_x[j] = v;
        }
        let mut full_y = vec![T::zero(); lp.n_rows()];
        for (&r, &v) in self.kept_rows.iter().zip(y) {
            full_y[r] = v;
        }
        if !self.zero_mass_rows.is_empty() {
            let mut reduced = lp.objective.clone();
            let at_y = lp.matrix.transpose().mul_vec(&full_y);
            reduced.iter_mut().zip(&at_y).for_each(|(d, &a)| *d = *d - a);
            for &r in &self.zero_mass_rows {
                let (cols, vals) = lp.matrix.row(r);
                let yr = cols.iter().zip(vals).map(|(&c, &v)| reduced[c] / v).fold(T::infinity(), T::min);
                full_y[r] = yr;
                for (&c, &v) in cols.iter().zip(vals) {
                    reduced[c] = reduced[c] - v * yr;
                }
            }
        }
        (full_x, full_y)
    }
}
