//! Trajectory simulation and Monte Carlo evaluation of belief policies lifted
//! to observation histories.
//!
//! Randomness: run `i` of a batch with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` with `set_stream(i)`. [`simulate`] uses
//! stream 0. Categorical draws take one `f64` in `[0, 1)` and invert the CDF.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::Dist;
use crate::models::MdpiiModel;
use crate::reduction::{initial_belief, posterior, Belief};
use crate::solver::{PolicyTree, StationaryGridPolicy};

/// A deterministic policy on belief nodes.
#[derive(Debug, Clone)]
pub enum BeliefPolicy {
    /// Per-epoch lookup from a finite-horizon solve.
    Tree(PolicyTree),
    /// Stationary lookup from the grid solver.
    Grid(StationaryGridPolicy),
}

impl From<PolicyTree> for BeliefPolicy {
    fn from(p: PolicyTree) -> Self {
        BeliefPolicy::Tree(p)
    }
}

impl From<StationaryGridPolicy> for BeliefPolicy {
    fn from(p: StationaryGridPolicy) -> Self {
        BeliefPolicy::Grid(p)
    }
}

/// A belief policy run on raw observations: keeps the filter `z_t` and
/// answers `φ_t(z_t, y_t)`.
#[derive(Debug, Clone)]
pub struct HistoryPolicy<'a> {
    model: &'a MdpiiModel,
    policy: &'a BeliefPolicy,
    prior: &'a Dist,
    beliefs: Vec<Belief>,
    observations: Vec<usize>,
    actions: Vec<usize>,
}

/// Wraps `policy` so that it acts on observation histories of `model`
/// started from `prior`.
pub fn lift_policy<'a>(model: &'a MdpiiModel, policy: &'a BeliefPolicy, prior: &'a Dist) -> Result<HistoryPolicy<'a>> {
    if prior.len() != model.num_states() {
        return Err(Error::SpaceMismatch("prior does not match the state space".into()));
    }
    if let BeliefPolicy::Grid(g) = policy {
        if g.grid.dim() != model.num_states() {
            return Err(Error::SpaceMismatch(format!(
                "grid policy over {} states, model has {}",
                g.grid.dim(),
                model.num_states()
            )));
        }
        if g.actions.iter().any(|&a| a >= model.num_actions()) {
            return Err(Error::SpaceMismatch("grid policy uses an unknown action".into()));
        }
    }
    Ok(HistoryPolicy { model, policy, prior, beliefs: Vec::new(), observations: Vec::new(), actions: Vec::new() })
}

impl<'a> HistoryPolicy<'a> {
    /// Starts a new history with initial observation `y0`.
    pub fn start(&mut self, y0: usize) -> Result<()> {
        let (post, _) = initial_belief(self.model, self.prior, y0)?;
        self.beliefs.clear();
        self.observations.clear();
        self.actions.clear();
        self.beliefs.push(post.belief);
        self.observations.push(y0);
        Ok(())
    }

    /// Action at the current epoch.
    pub fn act(&mut self) -> Result<usize> {
        let t = self.epoch().ok_or_else(|| Error::InvalidArgument("history not started".into()))?;
        let z = &self.beliefs[t];
        let y = self.observations[t];
        let a = match self.policy {
            BeliefPolicy::Tree(tree) => {
                if t >= tree.horizon() {
                    return Err(Error::UnreachableBelief(format!(
                        "epoch {t} is past the policy horizon {} (history {})",
                        tree.horizon(),
                        self.describe()
                    )));
                }
                let key = (z.key().clone(), y);
                tree.action(t, &key).ok_or_else(|| {
                    Error::UnreachableBelief(format!(
                        "no action for belief [{}] at epoch {t} after history {}",
                        crate::reduction::format_weights(z.weights()),
                        self.describe()
                    ))
                })?
            }
            BeliefPolicy::Grid(g) => g.action(z.weights(), y),
        };
        self.actions.push(a);
        Ok(a)
    }

    /// Feeds the next observation after the action last returned by [`act`](Self::act).
    pub fn observe(&mut self, y_next: usize) -> Result<()> {
        let t = self.epoch().ok_or_else(|| Error::InvalidArgument("history not started".into()))?;
        let a = *self
            .actions
            .get(t)
            .ok_or_else(|| Error::InvalidArgument("observe called before act".into()))?;
        let post = posterior(self.model, &self.beliefs[t], self.observations[t], a, y_next)?;
        self.beliefs.push(post.belief);
        self.observations.push(y_next);
        Ok(())
    }

    /// Current epoch, or `None` before [`start`](Self::start).
    pub fn epoch(&self) -> Option<usize> {
        self.beliefs.len().checked_sub(1)
    }

    /// Filter chain `z_0, …, z_t`.
    pub fn beliefs(&self) -> &[Belief] {
        &self.beliefs
    }

    pub fn observations(&self) -> &[usize] {
        &self.observations
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    fn describe(&self) -> String {
        let m = self.model;
        let mut s = String::new();
        for (t, &y) in self.observations.iter().enumerate() {
            if t > 0 {
                s.push_str(", ");
            }
            s.push_str(m.observations.label(y));
            if let Some(&a) = self.actions.get(t) {
                s.push_str(", ");
                s.push_str(m.actions.label(a));
            }
        }
        format!("({s})")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t: usize,
    pub state: usize,
    pub observation: usize,
    pub action: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub stream: u64,
    pub steps: Vec<Step>,
    /// `Σ_t α^t c(w_t, y_t, a_t)`.
    pub discounted_total: f64,
}

/// Index `i` with `cdf(i-1) <= u < cdf(i)`; roundoff past the total mass falls
/// back to the last positive entry.
fn sample<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc && w > 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_run(model: &MdpiiModel, prior: &Dist, alpha: f64) -> Result<()> {
    if prior.len() != model.num_states() {
        return Err(Error::SpaceMismatch("prior does not match the state space".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("discount {alpha} is outside [0, 1]")));
    }
    Ok(())
}

fn run(
    model: &MdpiiModel,
    policy: &mut HistoryPolicy<'_>,
    prior: &Dist,
    horizon: usize,
    alpha: f64,
    seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    let mut rng = rng_for(seed, stream);
    let ny = model.num_observations();
    let mut w = sample(&mut rng, prior.weights());
    let mut y = sample(&mut rng, model.initial_row(w));
    policy.start(y)?;
    let mut steps = Vec::with_capacity(horizon);
    let mut total = 0.0;
    let mut discount = 1.0;
    for t in 0..horizon {
        let a = policy.act()?;
        let cost = model.cost(w, y, a);
        total += discount * cost;
        discount *= alpha;
        steps.push(Step { t, state: w, observation: y, action: a, cost });
        if t + 1 < horizon {
            let k = sample(&mut rng, model.transition_row(w, y, a));
            w = k / ny;
            y = k % ny;
            policy.observe(y)?;
        }
    }
    Ok(Trajectory { seed, stream, steps, discounted_total: total })
}

/// One trajectory of length `horizon` on stream 0 of `seed`.
pub fn simulate(
    model: &MdpiiModel,
    policy: &mut HistoryPolicy<'_>,
    prior: &Dist,
    horizon: usize,
    alpha: f64,
    seed: u64,
) -> Result<Trajectory> {
    simulate_stream(model, policy, prior, horizon, alpha, seed, 0)
}

/// One trajectory on an explicit stream; run `i` of [`monte_carlo_value`]
/// equals `simulate_stream(.., seed, i)`.
pub fn simulate_stream(
    model: &MdpiiModel,
    policy: &mut HistoryPolicy<'_>,
    prior: &Dist,
    horizon: usize,
    alpha: f64,
    seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    check_run(model, prior, alpha)?;
    run(model, policy, prior, horizon, alpha, seed, stream)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub runs: usize,
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Mean and standard error of the discounted cost over `runs` trajectories.
///
/// Runs execute in parallel, but totals are collected in run order and
/// summed pairwise, so the estimate is identical for any thread count.
pub fn monte_carlo_value(
    model: &MdpiiModel,
    policy: &HistoryPolicy<'_>,
    prior: &Dist,
    horizon: usize,
    alpha: f64,
    runs: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if runs < 2 {
        return Err(Error::InvalidArgument("at least two runs are needed for a standard error".into()));
    }
    check_run(model, prior, alpha)?;
    let totals: Vec<f64> = (0..runs as u64)
        .into_par_iter()
        .map_init(
            || policy.clone(),
            |p, i| run(model, p, prior, horizon, alpha, seed, i).map(|t| t.discounted_total),
        )
        .collect::<Result<_>>()?;
    let n = runs as f64;
    let mean = pairwise_sum(&totals) / n;
    let sq: Vec<f64> = totals.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    Ok(MonteCarloEstimate { mean, stderr: (var / n).sqrt(), runs })
}
