//! Dense primal simplex for small equality-form linear programs.
//!
//! Solves `min cost·x` subject to `A x = b`, `x >= 0`, starting from a basis
//! whose columns form the identity and with `b >= 0`. Entering columns follow
//! Bland's rule, so degenerate problems (the Lipschitz programs are heavily
//! degenerate) terminate.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const REDUCED_COST_EPS: f64 = 1e-12;

pub(crate) struct Solution {
    pub objective: f64,
    /// Simplex multipliers of the equality rows; an optimal point of the dual.
    pub duals: Vec<f64>,
}

/// `rows[i]` is row `i` of `A` (length = number of columns). `basis[i]` is the
/// column that is the i-th unit vector.
pub(crate) fn solve(
    mut rows: Vec<Vec<f64>>,
    mut rhs: Vec<f64>,
    cost: &[f64],
    mut basis: Vec<usize>,
    max_pivots: usize,
) -> Result<Solution> {
    let m = rows.len();
    let ncols = cost.len();
    if rhs.len() != m || basis.len() != m || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::LinearProgram("inconsistent dimensions".into()));
    }
    if rhs.iter().any(|&b| b < 0.0) {
        return Err(Error::LinearProgram("initial basis is infeasible".into()));
    }
    let initial_basis = basis.clone();

    let mut reduced: Vec<f64> = cost.to_vec();
    for (i, row) in rows.iter().enumerate() {
        let cb = cost[basis[i]];
        if cb != 0.0 {
            for (r, a) in reduced.iter_mut().zip(row) {
                *r -= cb * a;
            }
        }
    }

    for _ in 0..max_pivots {
        let entering = match (0..ncols).find(|&j| reduced[j] < -REDUCED_COST_EPS) {
            Some(j) => j,
            None => {
                let objective = basis.iter().zip(&rhs).map(|(&j, &b)| cost[j] * b).sum();
                let duals = initial_basis
                    .iter()
                    .map(|&j| cost[j] - reduced[j])
                    .collect();
                return Ok(Solution { objective, duals });
            }
        };

        // Ratio test; ties go to the smallest basic column index (Bland).
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = rows[i][entering];
            if a > PIVOT_EPS {
                let ratio = rhs[i] / a;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-15 || (ratio <= lr + 1e-15 && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let (pr, _) = leave.ok_or_else(|| Error::LinearProgram("objective unbounded".into()))?;

        let piv = rows[pr][entering];
        for v in rows[pr].iter_mut() {
            *v /= piv;
        }
        rhs[pr] /= piv;
        let pivot_row = rows[pr].clone();
        let pivot_rhs = rhs[pr];
        for i in 0..m {
            if i == pr {
                continue;
            }
            let factor = rows[i][entering];
            if factor != 0.0 {
                for (v, p) in rows[i].iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                rhs[i] -= factor * pivot_rhs;
                if rhs[i] < 0.0 && rhs[i] > -1e-13 {
                    rhs[i] = 0.0;
                }
            }
        }
        let factor = reduced[entering];
        for (v, p) in reduced.iter_mut().zip(&pivot_row) {
            *v -= factor * p;
        }
        basis[pr] = entering;
    }
    Err(Error::LinearProgram(format!(
        "no convergence within {max_pivots} pivots"
    )))
}
