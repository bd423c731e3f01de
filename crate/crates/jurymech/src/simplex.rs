//! A small dense two-phase simplex for problems with box-constrained
//! variables and a handful of general rows, generic over the scalar so the
//! same pivoting code runs in `f64` (with tolerances) and in exact rational
//! arithmetic (with zero tolerances). Bounded variables are handled
//! directly: nonbasic variables sit at a bound and never get split into
//! extra rows. Entering and leaving choices follow Bland's rule.

use num_traits::{Signed, Zero};

/// Scalar abstraction shared by the simplex and the structural solver.
pub trait LpScalar: Clone + PartialOrd + Signed + std::fmt::Debug {
    /// Feasibility tolerance (bound and row violations).
    fn feas_tol() -> Self;
    /// Optimality tolerance on reduced costs.
    fn opt_tol() -> Self;
    /// Tolerance below which a divisor or candidate gap counts as zero.
    fn tiny() -> Self;

    fn to_f64(&self) -> f64;
}

impl LpScalar for f64 {
    fn feas_tol() -> Self {
        1e-9
    }
    fn opt_tol() -> Self {
        1e-10
    }
    fn tiny() -> Self {
        1e-12
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl LpScalar for num_rational::BigRational {
    fn feas_tol() -> Self {
        Self::zero()
    }
    fn opt_tol() -> Self {
        Self::zero()
    }
    fn tiny() -> Self {
        Self::zero()
    }
    fn to_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowOp {
    Le,
    Ge,
    Eq,
}

/// One general constraint `coeffs . x (op) rhs`.
#[derive(Clone, Debug)]
pub struct Row<S> {
    pub coeffs: Vec<S>,
    pub op: RowOp,
    pub rhs: S,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SimplexError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("objective is unbounded")]
    Unbounded,
    #[error("iteration limit exceeded")]
    IterationLimit,
    #[error("basis became singular")]
    Singular,
}

#[derive(Clone, Debug)]
pub struct Solution<S> {
    pub x: Vec<S>,
    pub objective: S,
}

const MAX_ITERATIONS: usize = 100_000;

fn infinity_norm<S: LpScalar>(values: &[S]) -> S {
    values
        .iter()
        .fold(S::zero(), |acc, v| if v.abs() > acc { v.abs() } else { acc })
}

/// Maximizes `objective . x` subject to `bounds.0[j] <= x[j] <= bounds.1[j]`
/// and the general rows. Bounds must be finite on structural variables.
/// Rows and the pivoting objective are scaled to unit infinity norm so the
/// fixed tolerances stay meaningful across coefficient magnitudes; the
/// reported objective is computed from the caller's coefficients.
pub fn maximize<S: LpScalar>(
    objective: &[S],
    bounds: &[(S, S)],
    rows: &[Row<S>],
) -> Result<Solution<S>, SimplexError> {
    assert_eq!(objective.len(), bounds.len());
    for row in rows {
        assert_eq!(row.coeffs.len(), objective.len());
    }
    let scaled_rows: Vec<Row<S>> = rows
        .iter()
        .map(|row| {
            let norm = infinity_norm(&row.coeffs);
            if norm.is_zero() {
                row.clone()
            } else {
                Row {
                    coeffs: row.coeffs.iter().map(|c| c.clone() / norm.clone()).collect(),
                    op: row.op,
                    rhs: row.rhs.clone() / norm.clone(),
                }
            }
        })
        .collect();
    let obj_norm = infinity_norm(objective);
    let scaled_obj: Vec<S> = if obj_norm.is_zero() {
        objective.to_vec()
    } else {
        objective.iter().map(|c| c.clone() / obj_norm.clone()).collect()
    };

    let mut tab = Tableau::new(&scaled_obj, bounds, &scaled_rows);
    tab.phase_one()?;
    tab.phase_two()?;
    let x = tab.x[..objective.len()].to_vec();
    let mut value = S::zero();
    for (c, xi) in objective.iter().zip(&x) {
        value = value + c.clone() * xi.clone();
    }
    Ok(Solution { x, objective: value })
}

struct Tableau<S> {
    m: usize,
    n_struct: usize,
    n_total: usize,
    cols: Vec<Vec<S>>,
    lo: Vec<Option<S>>,
    hi: Vec<Option<S>>,
    rhs: Vec<S>,
    cost: Vec<S>,
    phase2_cost: Vec<S>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    at_upper: Vec<bool>,
    x: Vec<S>,
}

impl<S: LpScalar> Tableau<S> {
    fn new(objective: &[S], bounds: &[(S, S)], rows: &[Row<S>]) -> Self {
        let m = rows.len();
        let n_struct = objective.len();
        let n_total = n_struct + 2 * m; // structurals, slacks, artificials

        let mut cols = Vec::with_capacity(n_total);
        let mut lo = Vec::with_capacity(n_total);
        let mut hi = Vec::with_capacity(n_total);
        for j in 0..n_struct {
            cols.push(rows.iter().map(|r| r.coeffs[j].clone()).collect());
            lo.push(Some(bounds[j].0.clone()));
            hi.push(Some(bounds[j].1.clone()));
        }
        for (i, row) in rows.iter().enumerate() {
            let mut col = vec![S::zero(); m];
            col[i] = S::one();
            cols.push(col);
            match row.op {
                RowOp::Le => {
                    lo.push(Some(S::zero()));
                    hi.push(None);
                }
                RowOp::Ge => {
                    lo.push(None);
                    hi.push(Some(S::zero()));
                }
                RowOp::Eq => {
                    lo.push(Some(S::zero()));
                    hi.push(Some(S::zero()));
                }
            }
        }
        for i in 0..m {
            let mut col = vec![S::zero(); m];
            col[i] = S::one();
            cols.push(col);
            // Bounds fixed after the phase-1 residuals are known.
            lo.push(Some(S::zero()));
            hi.push(Some(S::zero()));
        }

        let mut phase2_cost = vec![S::zero(); n_total];
        phase2_cost[..n_struct].clone_from_slice(objective);

        Tableau {
            m,
            n_struct,
            n_total,
            cols,
            lo,
            hi,
            rhs: rows.iter().map(|r| r.rhs.clone()).collect(),
            cost: vec![S::zero(); n_total],
            phase2_cost,
            basis: (0..m).map(|i| n_struct + m + i).collect(),
            in_basis: vec![false; n_total],
            at_upper: vec![false; n_total],
            x: vec![S::zero(); n_total],
        }
    }

    fn nonbasic_start_value(&self, j: usize) -> S {
        if self.at_upper[j] {
            self.hi[j].clone().expect("nonbasic at upper has a bound")
        } else {
            match &self.lo[j] {
                Some(v) => v.clone(),
                // One-sided (-inf, hi] columns rest at their finite bound.
                None => self.hi[j].clone().expect("column has at least one bound"),
            }
        }
    }

    fn phase_one(&mut self) -> Result<(), SimplexError> {
        let m = self.m;
        let art0 = self.n_struct + m;
        for i in 0..m {
            self.basis[i] = art0 + i;
        }
        for j in 0..self.n_total {
            self.in_basis[j] = false;
            self.at_upper[j] = false;
        }
        // Ge-slacks have no lower bound; park them at their upper bound 0.
        for i in 0..m {
            let slack = self.n_struct + i;
            if self.lo[slack].is_none() {
                self.at_upper[slack] = true;
            }
        }
        for i in 0..m {
            self.in_basis[art0 + i] = true;
        }

        // Residuals decide the artificial signs and phase-1 costs.
        let mut residual = self.rhs.clone();
        for j in 0..self.n_struct + m {
            let xj = self.nonbasic_start_value(j);
            for i in 0..m {
                residual[i] = residual[i].clone() - self.cols[j][i].clone() * xj.clone();
            }
        }
        self.cost = vec![S::zero(); self.n_total];
        for i in 0..m {
            let z = art0 + i;
            if residual[i] >= S::zero() {
                self.lo[z] = Some(S::zero());
                self.hi[z] = None;
                self.cost[z] = -S::one();
            } else {
                self.lo[z] = None;
                self.hi[z] = Some(S::zero());
                self.cost[z] = S::one();
                self.at_upper[z] = false;
            }
        }
        self.refresh()?;
        self.optimize()?;

        let mut infeas = S::zero();
        for i in 0..m {
            infeas = infeas + self.x[art0 + i].abs();
        }
        if infeas > S::feas_tol() {
            return Err(SimplexError::Infeasible);
        }
        Ok(())
    }

    fn phase_two(&mut self) -> Result<(), SimplexError> {
        let art0 = self.n_struct + self.m;
        for i in 0..self.m {
            let z = art0 + i;
            self.lo[z] = Some(S::zero());
            self.hi[z] = Some(S::zero());
            if !self.in_basis[z] {
                self.at_upper[z] = false;
            }
        }
        self.cost = self.phase2_cost.clone();
        self.refresh()?;
        self.optimize()
    }

    /// Rebuilds all variable values from the current basis and nonbasic
    /// bound assignments.
    fn refresh(&mut self) -> Result<(), SimplexError> {
        let m = self.m;
        let mut rhs = self.rhs.clone();
        for j in 0..self.n_total {
            if self.in_basis[j] {
                continue;
            }
            let xj = self.nonbasic_start_value(j);
            for i in 0..m {
                rhs[i] = rhs[i].clone() - self.cols[j][i].clone() * xj.clone();
            }
            self.x[j] = xj;
        }
        let basis_cols: Vec<Vec<S>> = self.basis.iter().map(|&j| self.cols[j].clone()).collect();
        let vals = solve_dense(&basis_cols, &rhs).ok_or(SimplexError::Singular)?;
        for (i, v) in vals.into_iter().enumerate() {
            self.x[self.basis[i]] = v;
        }
        Ok(())
    }

    fn optimize(&mut self) -> Result<(), SimplexError> {
        for _ in 0..MAX_ITERATIONS {
            if !self.pivot_once()? {
                return Ok(());
            }
        }
        Err(SimplexError::IterationLimit)
    }

    /// One Bland pivot. Returns false when no entering column improves.
    fn pivot_once(&mut self) -> Result<bool, SimplexError> {
        let m = self.m;
        let basis_cols: Vec<Vec<S>> = self.basis.iter().map(|&j| self.cols[j].clone()).collect();
        let cb: Vec<S> = self.basis.iter().map(|&j| self.cost[j].clone()).collect();
        let y = solve_dense_transposed(&basis_cols, &cb).ok_or(SimplexError::Singular)?;

        let mut entering = None;
        for j in 0..self.n_total {
            if self.in_basis[j] || self.lo[j] == self.hi[j] {
                continue;
            }
            let mut reduced = self.cost[j].clone();
            for i in 0..m {
                reduced = reduced - y[i].clone() * self.cols[j][i].clone();
            }
            let increasing = !self.at_upper[j];
            if increasing && reduced > S::opt_tol() {
                entering = Some((j, true));
                break;
            }
            if !increasing && reduced < -S::opt_tol() {
                entering = Some((j, false));
                break;
            }
        }
        let Some((enter, increasing)) = entering else {
            return Ok(false);
        };

        let w = solve_dense(&basis_cols, &self.cols[enter]).ok_or(SimplexError::Singular)?;

        // Step length limits: the entering variable's own opposite bound,
        // then each basic variable hitting one of its bounds. Basic value
        // changes at rate -sigma * w_i per unit step.
        let mut best_t: Option<S> = match (&self.lo[enter], &self.hi[enter]) {
            (Some(lo), Some(hi)) => Some(hi.clone() - lo.clone()),
            _ => None,
        };
        let mut leaving: Option<(usize, bool)> = None; // (basis position, leaves at upper)
        for i in 0..m {
            let rate = if increasing {
                w[i].clone()
            } else {
                -w[i].clone()
            };
            let var = self.basis[i];
            let (limit, hits_upper) = if rate > S::tiny() {
                match &self.lo[var] {
                    Some(lo) => ((self.x[var].clone() - lo.clone()) / rate, false),
                    None => continue,
                }
            } else if rate < -S::tiny() {
                match &self.hi[var] {
                    Some(hi) => ((self.x[var].clone() - hi.clone()) / rate, true),
                    None => continue,
                }
            } else {
                continue;
            };
            let limit = if limit < S::zero() { S::zero() } else { limit };
            let replace = match &best_t {
                None => true,
                Some(t) => {
                    limit < t.clone() - S::tiny()
                        || (limit <= t.clone() + S::tiny()
                            && match leaving {
                                // Bland tie-break: lowest leaving variable index.
                                Some((pos, _)) => var < self.basis[pos],
                                None => true,
                            })
                }
            };
            if replace {
                best_t = Some(limit);
                leaving = Some((i, hits_upper));
            }
        }

        let Some(_) = best_t else {
            return Err(SimplexError::Unbounded);
        };

        match leaving {
            None => {
                // Bound flip: the entering variable crosses its box.
                self.at_upper[enter] = !self.at_upper[enter];
            }
            Some((pos, hits_upper)) => {
                let leave = self.basis[pos];
                self.basis[pos] = enter;
                self.in_basis[enter] = true;
                self.in_basis[leave] = false;
                self.at_upper[leave] = hits_upper;
            }
        }
        self.refresh()?;
        Ok(true)
    }
}

/// Solves `A x = b` for dense column-major `A` by Gaussian elimination with
/// partial pivoting.
fn solve_dense<S: LpScalar>(cols: &[Vec<S>], b: &[S]) -> Option<Vec<S>> {
    let m = b.len();
    // Row-major augmented matrix.
    let mut a: Vec<Vec<S>> = (0..m)
        .map(|i| {
            let mut row: Vec<S> = cols.iter().map(|c| c[i].clone()).collect();
            row.push(b[i].clone());
            row
        })
        .collect();
    for col in 0..m {
        let pivot = (col..m).max_by(|&r1, &r2| {
            a[r1][col]
                .abs()
                .partial_cmp(&a[r2][col].abs())
                .expect("finite pivots")
        })?;
        if a[pivot][col].abs() <= S::tiny() {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..m {
            if r == col {
                continue;
            }
            if a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone() / a[col][col].clone();
            for c in col..=m {
                let delta = factor.clone() * a[col][c].clone();
                a[r][c] = a[r][c].clone() - delta;
            }
        }
    }
    let mut x = Vec::with_capacity(m);
    for i in 0..m {
        if a[i][i].abs() <= S::tiny() {
            return None;
        }
        x.push(a[i][m].clone() / a[i][i].clone());
    }
    Some(x)
}

fn solve_dense_transposed<S: LpScalar>(cols: &[Vec<S>], b: &[S]) -> Option<Vec<S>> {
    let m = b.len();
    // Columns of the transpose are rows of the original.
    let transposed: Vec<Vec<S>> = (0..m)
        .map(|i| (0..m).map(|j| cols[j][i].clone()).collect())
        .collect();
    solve_dense(&transposed, b)
}
