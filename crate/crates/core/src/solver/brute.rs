//! Exhaustive search over deterministic observation-feedback policies.

use rayon::prelude::*;

use super::check_alpha;
use crate::error::{Error, Result};
use crate::measures::Dist;
use crate::models::{MdpiiModel, Validate};

/// Largest number of policies [`brute_force_optimal`] will enumerate.
pub const BRUTE_FORCE_POLICY_LIMIT: u64 = 1_000_000;

/// Number of observation histories `(y_0, …, y_t)` with `t < T`.
pub fn history_count(num_observations: usize, horizon: usize) -> Option<u64> {
    let ny = num_observations as u64;
    let mut total: u64 = 0;
    let mut layer: u64 = 1;
    for _ in 0..horizon {
        layer = layer.checked_mul(ny)?;
        total = total.checked_add(layer)?;
    }
    Some(total)
}

struct Evaluator<'a> {
    model: &'a MdpiiModel,
    alpha: f64,
    horizon: usize,
    /// Index of the first history of length `t + 1`.
    offsets: Vec<usize>,
}

impl Evaluator<'_> {
    /// Expected discounted cost from epoch `t` on, where `f(w)` is the joint
    /// probability of `w_t = w` and the observed history so far.
    fn eval(&self, policy: &[usize], t: usize, code: usize, y: usize, f: &[f64]) -> f64 {
        let m = self.model;
        let a = policy[self.offsets[t] + code];
        let cost: f64 = f.iter().enumerate().map(|(w, fw)| fw * m.cost(w, y, a)).sum();
        let mut total = self.alpha.powi(t as i32) * cost;
        if t + 1 == self.horizon {
            return total;
        }
        let (nw, ny) = (m.num_states(), m.num_observations());
        for y2 in 0..ny {
            let mut g = vec![0.0; nw];
            for (w, &fw) in f.iter().enumerate() {
                if fw == 0.0 {
                    continue;
                }
                let row = m.transition_row(w, y, a);
                for (w2, gw) in g.iter_mut().enumerate() {
                    *gw += fw * row[w2 * ny + y2];
                }
            }
            if g.iter().any(|&v| v > 0.0) {
                total += self.eval(policy, t + 1, code * ny + y2, y2, &g);
            }
        }
        total
    }

    fn value(&self, policy: &[usize], p: &Dist) -> f64 {
        let m = self.model;
        (0..m.num_observations())
            .map(|y0| {
                let f: Vec<f64> = p
                    .weights()
                    .iter()
                    .enumerate()
                    .map(|(w, pw)| pw * m.initial_row(w)[y0])
                    .collect();
                if f.iter().any(|&v| v > 0.0) {
                    self.eval(policy, 0, y0, y0, &f)
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// Minimum expected discounted `T`-step cost over all deterministic policies
/// `a_t = π_t(y_0, …, y_t)`, each evaluated exactly by summing over the
/// hidden-state trajectories.
pub fn brute_force_optimal(model: &MdpiiModel, p: &Dist, horizon: usize, alpha: f64) -> Result<f64> {
    model.check()?;
    check_alpha(alpha, true)?;
    if p.len() != model.num_states() {
        return Err(Error::SpaceMismatch("prior does not match the state space".into()));
    }
    if horizon == 0 {
        return Ok(0.0);
    }
    let (ny, na) = (model.num_observations(), model.num_actions());
    let histories = history_count(ny, horizon).filter(|&h| h <= u32::MAX as u64);
    let policies = histories.and_then(|h| (na as u64).checked_pow(h as u32));
    let count = match policies {
        Some(c) if c <= BRUTE_FORCE_POLICY_LIMIT => c,
        _ => {
            return Err(Error::ResourceGuard(format!(
                "{na} actions over {} observation histories exceed {BRUTE_FORCE_POLICY_LIMIT} policies; \
                 use a shorter horizon or fewer observations/actions",
                histories.map_or_else(|| "too many".to_string(), |h| h.to_string())
            )))
        }
    };
    let histories = histories.expect("checked above") as usize;
    let mut offsets = Vec::with_capacity(horizon);
    let (mut off, mut layer) = (0usize, 1usize);
    for _ in 0..horizon {
        offsets.push(off);
        layer *= ny;
        off += layer;
    }
    let ev = Evaluator {
        model,
        alpha,
        horizon,
        offsets,
    };
    let best = (0..count)
        .into_par_iter()
        .map(|mut idx| {
            let mut policy = vec![0usize; histories];
            for slot in policy.iter_mut() {
                *slot = (idx % na as u64) as usize;
                idx /= na as u64;
            }
            ev.value(&policy, p)
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(best)
}
