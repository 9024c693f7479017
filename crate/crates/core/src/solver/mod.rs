//! Discounted total-cost dynamic programming on the belief MDP.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::models::MdpiiModel;
use crate::reduction::{belief_transition, cost_bar, BeliefNode, NodeKey};

mod brute;
mod finite;
mod grid;
mod mdp;

pub use brute::{brute_force_optimal, history_count, BRUTE_FORCE_POLICY_LIMIT};
pub use finite::{finite_horizon_solve, finite_horizon_solve_rooted, finite_horizon_solve_with_cap, FiniteHorizonSolution, PolicyTree, RootValue};
pub use grid::{
    infinite_horizon_grid_solve, GridOperator, GridSolution, Interpolation, SimplexGrid,
    StationaryGridPolicy, GRID_VERTEX_LIMIT,
};
pub use mdp::{finite_mdp_solve, MdpSolution};

/// Default tolerance for treating two action values as tied.
pub const DEFAULT_TIE_TOL: f64 = 1e-10;

/// Anything that can value a belief node.
pub trait ValueOracle {
    fn value(&self, node: &BeliefNode) -> Option<f64>;
}

impl<F: Fn(&BeliefNode) -> Option<f64>> ValueOracle for F {
    fn value(&self, node: &BeliefNode) -> Option<f64> {
        self(node)
    }
}

/// `u ≡ c`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantValue(pub f64);

impl ValueOracle for ConstantValue {
    fn value(&self, _: &BeliefNode) -> Option<f64> {
        Some(self.0)
    }
}

/// Values keyed by belief node, tagged with the number of steps to go.
#[derive(Debug, Clone, Default)]
pub struct ValueTable {
    pub steps_to_go: usize,
    pub values: HashMap<NodeKey, f64>,
}

impl ValueOracle for ValueTable {
    fn value(&self, node: &BeliefNode) -> Option<f64> {
        self.values.get(&node.key()).copied()
    }
}

pub(crate) fn check_alpha(alpha: f64, finite_horizon: bool) -> Result<()> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("discount {alpha} must be finite and >= 0")));
    }
    if !finite_horizon && alpha >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "discount {alpha} must be < 1 for the infinite horizon"
        )));
    }
    Ok(())
}

/// `η_u(z, y, a) = c̄(z, y, a) + α Σ u(z', y') q(z', y' | z, y, a)`.
///
/// `u` is not consulted when `α = 0`.
pub fn eta(model: &MdpiiModel, u: &dyn ValueOracle, node: &BeliefNode, a: usize, alpha: f64) -> Result<f64> {
    let c = cost_bar(model, &node.belief, node.obs, a)?;
    if alpha == 0.0 {
        return Ok(c);
    }
    let mut future = 0.0;
    for t in belief_transition(model, &node.belief, node.obs, a)? {
        let v = u.value(&t.node).ok_or_else(|| {
            Error::MissingValue(format!(
                "no value for child belief [{}] with observation {}",
                t.node.belief.dist(),
                model.observations.label(t.node.obs)
            ))
        })?;
        future += t.probability * v;
    }
    Ok(c + alpha * future)
}

/// Indices of the values within `tie_tol` of the minimum, in action order.
pub(crate) fn argmin_set(values: &[f64], tie_tol: f64) -> Vec<usize> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    (0..values.len()).filter(|&a| values[a] <= min + tie_tol).collect()
}

/// Actions whose `η` is within `tie_tol` of the minimum, in action order.
pub fn greedy_actions(
    model: &MdpiiModel,
    u: &dyn ValueOracle,
    node: &BeliefNode,
    alpha: f64,
    tie_tol: f64,
) -> Result<Vec<usize>> {
    let etas = (0..model.num_actions())
        .map(|a| eta(model, u, node, a, alpha))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmin_set(&etas, tie_tol))
}
