//! Discounted value iteration for fully observed finite MDPs.

use super::{argmin_set, check_alpha, DEFAULT_TIE_TOL};
use crate::error::{Error, Result};
use crate::models::{MdpModel, Validate};

const MAX_ITERATIONS: usize = 10_000_000;

#[derive(Debug, Clone)]
pub struct MdpSolution {
    pub values: Vec<f64>,
    /// Greedy action per state.
    pub policy: Vec<usize>,
    pub iterations: usize,
    /// `‖v − T v‖∞` at the returned `v`.
    pub residual: f64,
}

fn backup(model: &MdpModel, alpha: f64, v: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let na = model.actions.len();
    (0..v.len())
        .map(|x| {
            let etas: Vec<f64> = (0..na)
                .map(|a| {
                    let row = model.transition_row(x, a);
                    model.cost(x, a) + alpha * row.iter().zip(v).map(|(p, u)| p * u).sum::<f64>()
                })
                .collect();
            let best = etas.iter().copied().fold(f64::INFINITY, f64::min);
            (best, argmin_set(&etas, DEFAULT_TIE_TOL)[0])
        })
        .unzip()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Value iteration from `v ≡ 0` until the fixed-point residual is at most
/// `tol`.
pub fn finite_mdp_solve(model: &MdpModel, alpha: f64, tol: f64) -> Result<MdpSolution> {
    model.check()?;
    check_alpha(alpha, false)?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let mut v = vec![0.0; model.states.len()];
    let mut iterations = 0;
    loop {
        let (next, policy) = backup(model, alpha, &v);
        let residual = sup_diff(&next, &v);
        if residual <= tol {
            return Ok(MdpSolution {
                values: v,
                policy,
                iterations,
                residual,
            });
        }
        v = next;
        iterations += 1;
        if iterations >= MAX_ITERATIONS {
            return Err(Error::ResourceGuard(format!("no convergence within {MAX_ITERATIONS} iterations")));
        }
    }
}
