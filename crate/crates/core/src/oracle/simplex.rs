//! Dense two-phase primal simplex with Bland's rule.

use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::lp::{LinearProgram, Sense};
use crate::scalar::Scalar;

const MAX_ENTRIES: usize = 1_000_000;
const MAX_PIVOTS: usize = 1_000_000;

/// Dense LP `min c.x` subject to `A x (senses) b`, `x >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLp<T> {
    pub a: Vec<Vec<T>>,
    pub b: Vec<T>,
    pub c: Vec<T>,
    pub senses: Vec<Sense>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution<T> {
    pub status: Status,
    pub value: T,
    pub x: Vec<T>,
    /// Row duals, `y <= 0` on `<=` rows and `y >= 0` on `>=` rows.
    pub y: Vec<T>,
}

impl<T: Scalar> DenseLp<T> {
    pub fn new(a: Vec<Vec<T>>, b: Vec<T>, c: Vec<T>, senses: Vec<Sense>) -> Result<Self, OracleError> {
        let m = a.len();
        let n = c.len();
        if b.len() != m || senses.len() != m || a.iter().any(|row| row.len() != n) {
            return Err(OracleError::ShapeMismatch);
        }
        if m.saturating_mul(n) > MAX_ENTRIES {
            return Err(OracleError::SizeGuard { rows: m, cols: n });
        }
        Ok(Self { a, b, c, senses })
    }

    pub fn from_sparse(lp: &LinearProgram<T>) -> Result<Self, OracleError> {
        let (m, n) = (lp.n_rows(), lp.n_vars());
        if m.saturating_mul(n) > MAX_ENTRIES {
            return Err(OracleError::SizeGuard { rows: m, cols: n });
        }
        Self::new(lp.matrix.to_dense(), lp.rhs.clone(), lp.objective.clone(), lp.senses.clone())
    }

    pub fn n_rows(&self) -> usize {
        self.a.len()
    }

    pub fn n_cols(&self) -> usize {
        self.c.len()
    }

    /// Explicit dual `min -b.y` s.t. `A^T y <= c` with `y` split by sign:
    /// free duals of equalities become `y+ - y-`, `<=` duals become `-v`.
    /// Its optimal value is minus the primal optimum.
    pub fn dual(&self) -> Result<Self, OracleError> {
        let n = self.n_cols();
        // (row, sign) for every dual variable
        let mut vars: Vec<(usize, T)> = Vec::new();
        for (i, s) in self.senses.iter().enumerate() {
            match s {
                Sense::Eq => {
                    vars.push((i, T::one()));
                    vars.push((i, -T::one()));
                }
                Sense::Le => vars.push((i, -T::one())),
                Sense::Ge => vars.push((i, T::one())),
            }
        }
        let a = (0..n).map(|j| vars.iter().map(|&(i, s)| s * self.a[i][j]).collect()).collect();
        let c = vars.iter().map(|&(i, s)| -s * self.b[i]).collect();
        Self::new(a, self.c.clone(), c, vec![Sense::Le; n])
    }
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    pivots: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        self.rows[r].iter_mut().for_each(|v| *v = *v / p);
        self.rhs[r] = self.rhs[r] / p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][j];
            if f != T::zero() {
                self.rows[i].iter_mut().zip(&pivot_row).for_each(|(v, &q)| *v = *v - f * q);
                self.rhs[i] = self.rhs[i] - f * pivot_rhs;
            }
        }
        self.basis[r] = j;
        self.pivots += 1;
    }

    fn reduced_cost(&self, cost: &[T], j: usize) -> T {
        cost[j] - self.basis.iter().enumerate().map(|(i, &b)| cost[b] * self.rows[i][j]).sum::<T>()
    }

    /// Bland's rule: lowest-index improving column enters; among tied ratios
    /// the row whose basic variable has the lowest index leaves.
    fn optimize(&mut self, cost: &[T], allowed: &[bool], tol: T) -> Result<Phase, OracleError> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(OracleError::CycleGuard);
            }
            let entering =
                (0..cost.len()).find(|&j| allowed[j] && !self.basis.contains(&j) && self.reduced_cost(cost, j) < -tol);
            let Some(j) = entering else {
                return Ok(Phase::Optimal);
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][j];
                if a > tol {
                    let ratio = self.rhs[i] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - tol || ((ratio - best).abs() <= tol && self.basis[i] < self.basis[k]) {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, j),
                None => return Ok(Phase::Unbounded),
            }
        }
    }
}

pub fn simplex_solve<T: Scalar>(lp: &DenseLp<T>) -> Result<OracleSolution<T>, OracleError> {
    let (m, n) = (lp.n_rows(), lp.n_cols());
    if m.saturating_mul(n) > MAX_ENTRIES {
        return Err(OracleError::SizeGuard { rows: m, cols: n });
    }
    let tol = T::tol(1e-11);

    // Nonnegative right-hand sides; remember flipped rows.
    let mut flipped = vec![false; m];
    let mut senses = lp.senses.clone();
    let mut a = lp.a.clone();
    let mut b = lp.b.clone();
    for i in 0..m {
        if b[i] < T::zero() {
            flipped[i] = true;
            b[i] = -b[i];
            a[i].iter_mut().for_each(|v| *v = -*v);
            senses[i] = match senses[i] {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }

    // Columns: originals, then one slack/surplus per inequality, then one
    // artificial per >= or = row.
    let n_slack = senses.iter().filter(|s| **s != Sense::Eq).count();
    let n_art = senses.iter().filter(|s| **s != Sense::Le).count();
    let total = n + n_slack + n_art;
    let mut rows = vec![vec![T::zero(); total]; m];
    let mut basis = vec![0usize; m];
    let mut initial = vec![0usize; m];
    let mut is_art = vec![false; total];
    let (mut next_slack, mut next_art) = (n, n + n_slack);
    for i in 0..m {
        rows[i][..n].copy_from_slice(&a[i]);
        match senses[i] {
            Sense::Le => {
                rows[i][next_slack] = T::one();
                basis[i] = next_slack;
                next_slack += 1;
            }
            Sense::Ge => {
                rows[i][next_slack] = -T::one();
                next_slack += 1;
                rows[i][next_art] = T::one();
                is_art[next_art] = true;
                basis[i] = next_art;
                next_art += 1;
            }
            Sense::Eq => {
                rows[i][next_art] = T::one();
                is_art[next_art] = true;
                basis[i] = next_art;
                next_art += 1;
            }
        }
        initial[i] = basis[i];
    }
    let mut tab = Tableau { rows, rhs: b, basis, pivots: 0 };

    let phase1_cost: Vec<T> = is_art.iter().map(|&x| if x { T::one() } else { T::zero() }).collect();
    let everything = vec![true; total];
    tab.optimize(&phase1_cost, &everything, tol)?;
    let infeasibility: T = tab.basis.iter().zip(&tab.rhs).filter(|(&bv, _)| is_art[bv]).map(|(_, &v)| v).sum();
    let scale = T::one() + lp.b.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if infeasibility > T::tol(1e-9) * scale {
        return Ok(OracleSolution {
            status: Status::Infeasible,
            value: T::nan(),
            x: vec![T::zero(); n],
            y: vec![T::zero(); m],
        });
    }
    // Drive remaining artificials out where possible; rows where that fails
    // are redundant and keep a zero-level artificial.
    for r in 0..m {
        if is_art[tab.basis[r]] {
            if let Some(j) = (0..total).find(|&j| !is_art[j] && tab.rows[r][j].abs() > tol) {
                tab.pivot(r, j);
            }
        }
    }

    let mut cost = vec![T::zero(); total];
    cost[..n].copy_from_slice(&lp.c);
    let allowed: Vec<bool> = is_art.iter().map(|&x| !x).collect();
    let status = match tab.optimize(&cost, &allowed, tol)? {
        Phase::Optimal => Status::Optimal,
        Phase::Unbounded => Status::Unbounded,
    };
    let mut x = vec![T::zero(); n];
    for (i, &bv) in tab.basis.iter().enumerate() {
        if bv < n {
            x[bv] = tab.rhs[i];
        }
    }
    // y = c_B B^{-1}; column `initial[i]` of the tableau is B^{-1} e_i.
    let y: Vec<T> = (0..m)
        .map(|i| {
            let yi: T = tab.basis.iter().enumerate().map(|(r, &bv)| cost[bv] * tab.rows[r][initial[i]]).sum();
            if flipped[i] {
                -yi
            } else {
                yi
            }
        })
        .collect();
    let value =
        if status == Status::Optimal { lp.c.iter().zip(&x).map(|(&c, &v)| c * v).sum() } else { -T::infinity() };
    Ok(OracleSolution { status, value, x, y })
}
