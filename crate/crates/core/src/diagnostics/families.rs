//! Ready-made kernel families for the diagnostics.

use std::sync::Arc;

use super::{BeliefKernelFamily, KernelFamily};
use crate::error::{Error, Result};
use crate::measures::FiniteSpace;
use crate::models::{platzman_from_pomdp1, Pomdp1Spec};

/// Points `i / (n − 1)`, `i = 0..n`, of the unit interval with the line metric.
pub fn unit_grid(n: usize) -> Result<FiniteSpace> {
    if n < 2 {
        return Err(Error::InvalidArgument("grid needs at least two points".into()));
    }
    let pos: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    FiniteSpace::on_line((0..n).map(|i| format!("y{i}")).collect(), &pos)
}

/// Index of the grid point of [`unit_grid`] nearest to `theta`; exact ties
/// round down.
pub fn nearest_grid_index(theta: f64, n: usize) -> usize {
    let x = (theta * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
    let f = x.floor();
    let i = if x - f > 0.5 { f + 1.0 } else { f };
    i as usize
}

pub fn discrete_space(n: usize) -> Result<Arc<FiniteSpace>> {
    Ok(Arc::new(FiniteSpace::indexed(n)?.with_discrete_metric()))
}

pub fn constant(name: &str, s1: Arc<FiniteSpace>, s2: Arc<FiniteSpace>, table: Vec<f64>) -> Result<KernelFamily> {
    KernelFamily::new(name, s1, s2, (f64::NEG_INFINITY, f64::INFINITY), move |_| Ok(table.clone()))
}

/// `Ψ(· | θ) = base + θ · slope` on `domain`; `slope` must sum to zero and
/// the table must stay nonnegative on the domain.
pub fn affine(
    name: &str,
    s1: Arc<FiniteSpace>,
    s2: Arc<FiniteSpace>,
    base: Vec<f64>,
    slope: Vec<f64>,
    domain: (f64, f64),
) -> Result<KernelFamily> {
    if base.len() != slope.len() || base.len() != s1.len() * s2.len() {
        return Err(Error::SpaceMismatch("affine family tables have wrong sizes".into()));
    }
    if slope.iter().sum::<f64>().abs() > 1e-12 {
        return Err(Error::InvalidArgument("affine slope must sum to zero".into()));
    }
    for th in [domain.0, domain.1] {
        if base.iter().zip(&slope).any(|(b, s)| b + th * s < 0.0) {
            return Err(Error::InvalidArgument(format!("affine family is negative at θ = {th}")));
        }
    }
    KernelFamily::new(name, s1, s2, domain, move |th| {
        Ok(base.iter().zip(&slope).map(|(b, s)| b + th * s).collect())
    })
}

/// `Ψ(· | θ) = δ_{(s1*, y(θ))}` with `y(θ)` the nearest point of an
/// `n`-point grid on `[0, 1]`.
pub fn shifting_point_mass(s1: Arc<FiniteSpace>, s1_star: usize, n: usize) -> Result<KernelFamily> {
    if s1_star >= s1.len() {
        return Err(Error::IndexOutOfRange {
            what: "s1*",
            index: s1_star,
            size: s1.len(),
        });
    }
    let s2 = Arc::new(unit_grid(n)?);
    let n1 = s1.len();
    KernelFamily::new(format!("point-mass[{n}]"), s1, s2, (0.0, 1.0), move |th| {
        let mut t = vec![0.0; n1 * n];
        t[s1_star * n + nearest_grid_index(th, n)] = 1.0;
        Ok(t)
    })
}

/// `below` for `θ ≤ at`, `above` otherwise.
pub fn jump(
    name: &str,
    s1: Arc<FiniteSpace>,
    s2: Arc<FiniteSpace>,
    below: Vec<f64>,
    above: Vec<f64>,
    at: f64,
) -> Result<KernelFamily> {
    KernelFamily::new(name, s1, s2, (f64::NEG_INFINITY, f64::INFINITY), move |th| {
        Ok(if th <= at { below.clone() } else { above.clone() })
    })
}

fn pomdp1(
    states: Arc<FiniteSpace>,
    observations: Arc<FiniteSpace>,
    state_transition: Vec<f64>,
    observation: Vec<f64>,
) -> Result<crate::models::PlatzmanModel> {
    let (nw, ny) = (states.len(), observations.len());
    platzman_from_pomdp1(&Pomdp1Spec {
        states,
        observations,
        actions: Arc::new(FiniteSpace::new(["a"])?),
        state_transition,
        observation,
        initial_obs: vec![1.0 / ny as f64; nw * ny],
        cost: vec![0.0; nw * ny],
        discount: 0.9,
    })
}

/// Two states, two observations, one action; `P1` and `Q1` affine in
/// `θ ∈ [0, 1]` with slope 0.1, so both are continuous in total variation.
pub fn smooth_pomdp1() -> Result<BeliefKernelFamily> {
    let w = discrete_space(2)?;
    let y = discrete_space(2)?;
    Ok(BeliefKernelFamily::new("smooth-pomdp1", (0.0, 1.0), move |th| {
        let p = vec![0.7 - 0.1 * th, 0.3 + 0.1 * th, 0.2 + 0.1 * th, 0.8 - 0.1 * th];
        let acc = 0.8 - 0.1 * th;
        let q = vec![acc, 1.0 - acc, 1.0 - acc, acc];
        pomdp1(w.clone(), y.clone(), p, q)
    }))
}

/// Number of observation points of [`separated_posterior`].
pub const SEPARATED_GRID: usize = 256;

/// Limit parameter of [`separated_posterior`]: the midpoint between the
/// first two grid points.
pub fn separated_posterior_target() -> f64 {
    0.5 / (SEPARATED_GRID - 1) as f64
}

/// States `{0, 1}` with the discrete metric and identity dynamics; state 0
/// always emits grid point `y0`, state 1 emits the grid point nearest `θ`.
///
/// At the limit parameter both states emit `y0`, so the observation carries
/// no information. For `θ` slightly above it state 1 emits `y1`, which
/// separates the posteriors into the two point masses.
pub fn separated_posterior() -> Result<BeliefKernelFamily> {
    let w = discrete_space(2)?;
    let y = Arc::new(unit_grid(SEPARATED_GRID)?);
    let n = SEPARATED_GRID;
    Ok(BeliefKernelFamily::new("separated-posterior", (0.0, 1.0), move |th| {
        let mut q = vec![0.0; 2 * n];
        q[0] = 1.0;
        q[n + nearest_grid_index(th, n)] = 1.0;
        pomdp1(w.clone(), y.clone(), vec![1.0, 0.0, 0.0, 1.0], q)
    }))
}
