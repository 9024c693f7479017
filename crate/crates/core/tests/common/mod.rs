#![allow(dead_code)]

use beliefmdp::measures::Dist;
use beliefmdp::models::MdpiiModel;

/// Expected discounted cost of the policy `a_t = policy(y_0..=y_t)` by
/// enumerating every trajectory `(w_0, y_0, …, w_{T-1}, y_{T-1})`.
pub fn trajectory_value(model: &MdpiiModel, p: &Dist, horizon: usize, alpha: f64, policy: &dyn Fn(&[usize]) -> usize) -> f64 {
    fn walk(
        m: &MdpiiModel,
        alpha: f64,
        horizon: usize,
        policy: &dyn Fn(&[usize]) -> usize,
        ys: &mut Vec<usize>,
        w: usize,
        prob: f64,
    ) -> f64 {
        let t = ys.len() - 1;
        let y = ys[t];
        let a = policy(ys);
        let mut total = prob * alpha.powi(t as i32) * m.cost(w, y, a);
        if t + 1 < horizon {
            let row = m.transition_row(w, y, a).to_vec();
            let ny = m.num_observations();
            for w2 in 0..m.num_states() {
                for y2 in 0..ny {
                    let q = row[w2 * ny + y2];
                    if q > 0.0 {
                        ys.push(y2);
                        total += walk(m, alpha, horizon, policy, ys, w2, prob * q);
                        ys.pop();
                    }
                }
            }
        }
        total
    }
    if horizon == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for w0 in 0..model.num_states() {
        for y0 in 0..model.num_observations() {
            let pr = p.weights()[w0] * model.initial_row(w0)[y0];
            if pr > 0.0 {
                total += walk(model, alpha, horizon, policy, &mut vec![y0], w0, pr);
            }
        }
    }
    total
}

/// Index of an observation history among all histories of length ≤ T, in
/// the order: length first, then base-|Y| value.
pub fn history_index(ys: &[usize], ny: usize) -> usize {
    let mut offset = 0;
    let mut layer = 1;
    for _ in 1..ys.len() {
        layer *= ny;
        offset += layer;
    }
    offset + ys.iter().fold(0, |acc, &y| acc * ny + y)
}

/// Minimum of [`trajectory_value`] over every deterministic history policy.
pub fn trajectory_optimum(model: &MdpiiModel, p: &Dist, horizon: usize, alpha: f64) -> f64 {
    let (ny, na) = (model.num_observations(), model.num_actions());
    let histories: usize = (1..=horizon).map(|t| ny.pow(t as u32)).sum();
    let count = na.pow(histories as u32);
    let mut best = f64::INFINITY;
    for idx in 0..count {
        let table: Vec<usize> = (0..histories).map(|h| idx / na.pow(h as u32) % na).collect();
        let v = trajectory_value(model, p, horizon, alpha, &|ys| table[history_index(ys, ny)]);
        best = best.min(v);
    }
    best
}

/// Filter by an unnormalized forward pass over hidden states, normalized
/// once at the end: `u_0(w) = p(w) P0(y_0|w)`,
/// `u_{t+1}(w') = Σ_w u_t(w) P(w', y_{t+1} | w, y_t, a_t)`.
pub fn forward_filter(model: &MdpiiModel, p: &Dist, ys: &[usize], actions: &[usize]) -> Vec<f64> {
    let nw = model.num_states();
    let ny = model.num_observations();
    let mut u: Vec<f64> = (0..nw).map(|w| p.weights()[w] * model.initial_row(w)[ys[0]]).collect();
    for t in 0..ys.len() - 1 {
        let mut next = vec![0.0; nw];
        for (w, &uw) in u.iter().enumerate() {
            let row = model.transition_row(w, ys[t], actions[t]);
            for (w2, n) in next.iter_mut().enumerate() {
                *n += uw * row[w2 * ny + ys[t + 1]];
            }
        }
        u = next;
    }
    let s: f64 = u.iter().sum();
    u.into_iter().map(|v| v / s).collect()
}
