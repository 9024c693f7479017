//! Exact belief-state reduction for finite models.
//!
//! For a belief `z` over `W`, current observation `y` and action `a`:
//!
//! ```text
//! R(w', y' | z, y, a) = Σ_w P(w', y' | w, y, a) z(w)          joint next state
//! m(y')               = Σ_w' R(w', y')                         observation marginal
//! H(w' | z, y, a, y') = R(w', y') / m(y')        if m(y') > 0  posterior
//! q(·, y' | z, y, a)  = m(y') δ_{H(z, y, a, y')}               belief kernel
//! ```
//!
//! `H` is only determined where `m(y') > 0`. Elsewhere this module returns the
//! predicted belief `w' ↦ Σ_y' R(w', y')` and flags the result.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::{Dist, FiniteSpace};
use crate::models::{MdpiiModel, PlatzmanModel};

/// Resolution of the deduplication grid for belief weights.
pub const KEY_RESOLUTION: f64 = 1e-12;

/// Default cap on the number of nodes in a reachable set.
pub const DEFAULT_NODE_CAP: usize = 1_000_000;

/// Belief weights quantized to the [`KEY_RESOLUTION`] grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeliefKey(Vec<i64>);

impl BeliefKey {
    pub fn of(weights: &[f64]) -> Self {
        Self(weights.iter().map(|w| (w / KEY_RESOLUTION).round() as i64).collect())
    }
}

/// A distribution over the unobservable states together with its key.
#[derive(Debug, Clone)]
pub struct Belief {
    dist: Dist,
    key: BeliefKey,
}

impl Belief {
    pub fn new(dist: Dist) -> Self {
        let key = BeliefKey::of(dist.weights());
        Self { dist, key }
    }

    pub fn from_weights(space: Arc<FiniteSpace>, weights: Vec<f64>) -> Result<Self> {
        Ok(Self::new(Dist::new(space, weights)?))
    }

    pub fn point_mass(space: Arc<FiniteSpace>, index: usize) -> Result<Self> {
        Ok(Self::new(Dist::point_mass(space, index)?))
    }

    pub fn dist(&self) -> &Dist {
        &self.dist
    }

    pub fn weights(&self) -> &[f64] {
        self.dist.weights()
    }

    pub fn key(&self) -> &BeliefKey {
        &self.key
    }
}

impl PartialEq for Belief {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Belief {}

impl Hash for Belief {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key.hash(state);
    }
}

/// State `(z, y)` of the belief MDP.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BeliefNode {
    pub belief: Belief,
    pub obs: usize,
}

pub type NodeKey = (BeliefKey, usize);

impl BeliefNode {
    pub fn new(belief: Belief, obs: usize) -> Self {
        Self { belief, obs }
    }

    pub fn key(&self) -> NodeKey {
        (self.belief.key.clone(), self.obs)
    }
}

/// Joint distribution over `W×Y`, entry `w * |Y| + y`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    pub num_states: usize,
    pub num_observations: usize,
    pub weights: Vec<f64>,
}

impl JointDist {
    pub fn get(&self, w: usize, y: usize) -> f64 {
        self.weights[w * self.num_observations + y]
    }

    pub fn observation_marginal(&self) -> Vec<f64> {
        let ny = self.num_observations;
        let mut m = vec![0.0; ny];
        for (k, v) in self.weights.iter().enumerate() {
            m[k % ny] += v;
        }
        m
    }

    pub fn state_marginal(&self) -> Vec<f64> {
        let ny = self.num_observations;
        self.weights.chunks(ny).map(|row| row.iter().sum()).collect()
    }

    /// `R(B × C)` for index sets `B ⊆ W`, `C ⊆ Y`.
    pub fn mass(&self, states: &[usize], observations: &[usize]) -> f64 {
        states
            .iter()
            .flat_map(|&w| observations.iter().map(move |&y| (w, y)))
            .map(|(w, y)| self.get(w, y))
            .sum()
    }
}

/// Posterior belief; `fallback` marks the zero-probability branch.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub belief: Belief,
    pub fallback: bool,
}

fn check_belief(model_states: &Arc<FiniteSpace>, z: &Belief) -> Result<()> {
    if z.weights().len() != model_states.len() {
        return Err(Error::SpaceMismatch(format!(
            "belief over {} labels, model has {} states",
            z.weights().len(),
            model_states.len()
        )));
    }
    Ok(())
}

fn mix_rows<'a>(rows: impl Iterator<Item = &'a [f64]>, z: &[f64], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; width];
    for (row, &zw) in rows.zip(z) {
        if zw == 0.0 {
            continue;
        }
        for (o, p) in out.iter_mut().zip(row) {
            *o += zw * p;
        }
    }
    out
}

pub fn joint_next(model: &MdpiiModel, z: &Belief, y: usize, a: usize) -> Result<JointDist> {
    model.check_indices(y, a)?;
    check_belief(&model.states, z)?;
    let (nw, ny) = (model.num_states(), model.num_observations());
    let rows = (0..nw).map(|w| model.transition_row(w, y, a));
    Ok(JointDist {
        num_states: nw,
        num_observations: ny,
        weights: mix_rows(rows, z.weights(), nw * ny),
    })
}

pub fn obs_marginal(model: &MdpiiModel, z: &Belief, y: usize, a: usize) -> Result<Dist> {
    let joint = joint_next(model, z, y, a)?;
    Dist::new(model.observations.clone(), joint.observation_marginal())
}

fn posterior_from_joint(states: &Arc<FiniteSpace>, joint: &JointDist, y_next: usize) -> Result<Posterior> {
    let nw = joint.num_states;
    let column: Vec<f64> = (0..nw).map(|w| joint.get(w, y_next)).collect();
    let m: f64 = column.iter().sum();
    if m > 0.0 {
        let weights = column.into_iter().map(|v| v / m).collect();
        Ok(Posterior {
            belief: Belief::from_weights(states.clone(), weights)?,
            fallback: false,
        })
    } else {
        Ok(Posterior {
            belief: Belief::from_weights(states.clone(), joint.state_marginal())?,
            fallback: true,
        })
    }
}

fn check_obs(n: usize, y_next: usize) -> Result<()> {
    if y_next >= n {
        return Err(Error::IndexOutOfRange {
            what: "next observation",
            index: y_next,
            size: n,
        });
    }
    Ok(())
}

pub fn posterior(model: &MdpiiModel, z: &Belief, y: usize, a: usize, y_next: usize) -> Result<Posterior> {
    check_obs(model.num_observations(), y_next)?;
    let joint = joint_next(model, z, y, a)?;
    posterior_from_joint(&model.states, &joint, y_next)
}

/// One atom of the belief kernel `q(· | z, y, a)`.
#[derive(Debug, Clone)]
pub struct BeliefTransition {
    pub node: BeliefNode,
    pub probability: f64,
}

fn transitions_from_joint(states: &Arc<FiniteSpace>, joint: &JointDist) -> Result<Vec<BeliefTransition>> {
    let marginal = joint.observation_marginal();
    let mut out: Vec<BeliefTransition> = Vec::new();
    for (y2, &m) in marginal.iter().enumerate() {
        if m <= 0.0 {
            continue;
        }
        let post = posterior_from_joint(states, joint, y2)?;
        let node = BeliefNode::new(post.belief, y2);
        match out.iter_mut().find(|t| t.node == node) {
            Some(t) => t.probability += m,
            None => out.push(BeliefTransition { node, probability: m }),
        }
    }
    Ok(out)
}

pub fn belief_transition(model: &MdpiiModel, z: &Belief, y: usize, a: usize) -> Result<Vec<BeliefTransition>> {
    let joint = joint_next(model, z, y, a)?;
    transitions_from_joint(&model.states, &joint)
}

/// `c̄(z, y, a) = Σ_w c(w, y, a) z(w)`.
pub fn cost_bar(model: &MdpiiModel, z: &Belief, y: usize, a: usize) -> Result<f64> {
    model.check_indices(y, a)?;
    check_belief(&model.states, z)?;
    Ok(z
        .weights()
        .iter()
        .enumerate()
        .map(|(w, zw)| zw * model.cost(w, y, a))
        .sum())
}

// Platzman arity: the kernels do not take the current observation.

fn check_platzman(model: &PlatzmanModel, z: &Belief, a: usize) -> Result<()> {
    check_belief(&model.states, z)?;
    if a >= model.num_actions() {
        return Err(Error::IndexOutOfRange {
            what: "action",
            index: a,
            size: model.num_actions(),
        });
    }
    Ok(())
}

pub fn joint_next_platzman(model: &PlatzmanModel, z: &Belief, a: usize) -> Result<JointDist> {
    check_platzman(model, z, a)?;
    let (nw, ny) = (model.num_states(), model.num_observations());
    let rows = (0..nw).map(|w| model.transition_row(w, a));
    Ok(JointDist {
        num_states: nw,
        num_observations: ny,
        weights: mix_rows(rows, z.weights(), nw * ny),
    })
}

/// `H(z, a, y')` for Platzman models.
pub fn posterior_platzman(model: &PlatzmanModel, z: &Belief, a: usize, y_next: usize) -> Result<Posterior> {
    check_obs(model.num_observations(), y_next)?;
    let joint = joint_next_platzman(model, z, a)?;
    posterior_from_joint(&model.states, &joint, y_next)
}

/// Belief kernel with the next observation marginalized out:
/// `q̂(D | z, a) = q(D × Y | z, a)`.
pub fn qhat(model: &PlatzmanModel, z: &Belief, a: usize) -> Result<Vec<(Belief, f64)>> {
    let joint = joint_next_platzman(model, z, a)?;
    let mut out: Vec<(Belief, f64)> = Vec::new();
    for t in transitions_from_joint(&model.states, &joint)? {
        match out.iter_mut().find(|(b, _)| *b == t.node.belief) {
            Some((_, p)) => *p += t.probability,
            None => out.push((t.node.belief, t.probability)),
        }
    }
    Ok(out)
}

/// `ĉ(z, a) = Σ_w c(w, a) z(w)`; requires a cost table free of `y`.
pub fn cost_hat(model: &PlatzmanModel, z: &Belief, a: usize) -> Result<f64> {
    check_platzman(model, z, a)?;
    let c = model
        .observation_free_cost()
        .ok_or_else(|| Error::InvalidArgument("cost depends on the observation".into()))?;
    let na = model.num_actions();
    Ok(z.weights().iter().enumerate().map(|(w, zw)| zw * c[w * na + a]).sum())
}

/// Conditions the prior `p` on the initial observation `y0`.
///
/// Returns the posterior `z0(w) ∝ P0(y0 | w) p(w)` and `Pr(y0)`.
pub fn initial_belief(model: &MdpiiModel, p: &Dist, y0: usize) -> Result<(Posterior, f64)> {
    check_obs(model.num_observations(), y0)?;
    if p.len() != model.num_states() {
        return Err(Error::SpaceMismatch("prior does not match the state space".into()));
    }
    let joint: Vec<f64> = p
        .weights()
        .iter()
        .enumerate()
        .map(|(w, pw)| pw * model.initial_row(w)[y0])
        .collect();
    let m: f64 = joint.iter().sum();
    if m > 0.0 {
        let z = Belief::from_weights(model.states.clone(), joint.into_iter().map(|v| v / m).collect())?;
        Ok((Posterior { belief: z, fallback: false }, m))
    } else {
        let z = Belief::from_weights(model.states.clone(), p.weights().to_vec())?;
        Ok((Posterior { belief: z, fallback: true }, 0.0))
    }
}

/// Roots `(z0(y0), y0)` with `Pr(y0) > 0`, paired with `Pr(y0)`.
pub fn initial_nodes(model: &MdpiiModel, p: &Dist) -> Result<Vec<(BeliefNode, f64)>> {
    let mut out = Vec::new();
    for y0 in 0..model.num_observations() {
        let (post, prob) = initial_belief(model, p, y0)?;
        if prob > 0.0 {
            out.push((BeliefNode::new(post.belief, y0), prob));
        }
    }
    Ok(out)
}

/// Edge of a reachable set: child index in the next layer and its probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub child: usize,
    pub probability: f64,
}

/// Belief-MDP nodes reachable within a horizon, layer by layer.
#[derive(Debug, Clone)]
pub struct ReachableSet {
    layers: Vec<Vec<BeliefNode>>,
    /// `edges[t][i][a]` lists the children of node `i` of layer `t`.
    edges: Vec<Vec<Vec<Vec<Edge>>>>,
    index: Vec<HashMap<NodeKey, usize>>,
    num_actions: usize,
}

impl ReachableSet {
    pub fn horizon(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layers(&self) -> &[Vec<BeliefNode>] {
        &self.layers
    }

    pub fn layer(&self, t: usize) -> &[BeliefNode] {
        &self.layers[t]
    }

    pub fn edges(&self, t: usize, node: usize, action: usize) -> &[Edge] {
        &self.edges[t][node][action]
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn node_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn find(&self, t: usize, key: &NodeKey) -> Option<usize> {
        self.index.get(t)?.get(key).copied()
    }

    /// Global id of node `i` of layer `t`, as used by the CSV exports.
    pub fn node_id(&self, t: usize, i: usize) -> usize {
        self.layers[..t].iter().map(Vec::len).sum::<usize>() + i
    }

    /// Columns: `node_id,epoch,belief,obs`. Belief weights are `;`-separated
    /// and printed in shortest round-trip form.
    pub fn write_nodes_csv<W: Write>(&self, out: W, observations: &FiniteSpace) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_id", "epoch", "belief", "obs"]).map_err(csv_err)?;
        let mut id = 0usize;
        for (t, layer) in self.layers.iter().enumerate() {
            for node in layer {
                w.write_record([
                    id.to_string(),
                    t.to_string(),
                    format_weights(node.belief.weights()),
                    observations.label(node.obs).to_string(),
                ])
                .map_err(csv_err)?;
                id += 1;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Columns: `node_id,action,child_id,probability`.
    pub fn write_edges_csv<W: Write>(&self, out: W, actions: &FiniteSpace) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_id", "action", "child_id", "probability"]).map_err(csv_err)?;
        for t in 0..self.edges.len() {
            let base_next = self.node_id(t + 1, 0);
            for (i, per_action) in self.edges[t].iter().enumerate() {
                let id = self.node_id(t, i);
                for (a, edges) in per_action.iter().enumerate() {
                    for e in edges {
                        w.write_record([
                            id.to_string(),
                            actions.label(a).to_string(),
                            (base_next + e.child).to_string(),
                            e.probability.to_string(),
                        ])
                        .map_err(csv_err)?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn format_weights(weights: &[f64]) -> String {
    weights.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

pub fn parse_weights(s: &str) -> Result<Vec<f64>> {
    s.split(';')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("belief weight {t:?}: {e}"))))
        .collect()
}

/// Breadth-first expansion of the belief MDP from `roots` for `horizon`
/// steps, deduplicating nodes per layer by [`NodeKey`].
///
/// Children of a layer are computed in parallel and merged in node/action/
/// observation order, so the result does not depend on scheduling.
pub fn expand_reachable(
    model: &MdpiiModel,
    roots: &[BeliefNode],
    horizon: usize,
    node_cap: usize,
) -> Result<ReachableSet> {
    let na = model.num_actions();
    let mut first = Vec::new();
    let mut first_index = HashMap::new();
    for r in roots {
        check_belief(&model.states, &r.belief)?;
        if r.obs >= model.num_observations() {
            return Err(Error::IndexOutOfRange {
                what: "root observation",
                index: r.obs,
                size: model.num_observations(),
            });
        }
        first_index.entry(r.key()).or_insert_with(|| {
            first.push(r.clone());
            first.len() - 1
        });
    }
    let mut total = first.len();
    if total > node_cap {
        return Err(Error::ResourceGuard(format!("layer 0 has {total} nodes, cap is {node_cap}")));
    }
    let mut layers = vec![first];
    let mut index = vec![first_index];
    let mut edges = Vec::with_capacity(horizon);

    for t in 0..horizon {
        let children: Vec<Vec<Vec<BeliefTransition>>> = layers[t]
            .par_iter()
            .map(|node| {
                (0..na)
                    .map(|a| belief_transition(model, &node.belief, node.obs, a))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        let mut next: Vec<BeliefNode> = Vec::new();
        let mut next_index: HashMap<NodeKey, usize> = HashMap::new();
        let mut layer_edges = Vec::with_capacity(children.len());
        for per_action in children {
            let mut node_edges = Vec::with_capacity(na);
            for list in per_action {
                let mut es = Vec::with_capacity(list.len());
                for tr in list {
                    let key = tr.node.key();
                    let child = match next_index.get(&key) {
                        Some(&c) => c,
                        None => {
                            next.push(tr.node);
                            next_index.insert(key, next.len() - 1);
                            next.len() - 1
                        }
                    };
                    es.push(Edge {
                        child,
                        probability: tr.probability,
                    });
                }
                node_edges.push(es);
            }
            layer_edges.push(node_edges);
        }
        total += next.len();
        if total > node_cap {
            return Err(Error::ResourceGuard(format!(
                "node cap {node_cap} exceeded while building layer {} ({total} nodes)",
                t + 1
            )));
        }
        layers.push(next);
        index.push(next_index);
        edges.push(layer_edges);
    }
    Ok(ReachableSet {
        layers,
        edges,
        index,
        num_actions: na,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::models::{mdpii_from_platzman, platzman_from_pomdp1, Pomdp1Spec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn belief(model: &MdpiiModel, w: &[f64]) -> Belief {
        Belief::from_weights(model.states.clone(), w.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn perfect() -> MdpiiModel {
        mdpii_from_platzman(&instances::perfect_observation(
            2,
            1,
            instances::identity_transition(2, 1),
            vec![1.0, 2.0],
        ))
    }

    fn uninformative() -> MdpiiModel {
        mdpii_from_platzman(&instances::uninformative(
            2,
            2,
            1,
            instances::identity_transition(2, 1),
            vec![1.0, 2.0],
        ))
    }

    /// POMDP₁ with P1 rows (0.7, 0.3) and observation accuracy 0.85.
    fn generic() -> PlatzmanModel {
        let s = Arc::new(FiniteSpace::indexed(2).unwrap());
        platzman_from_pomdp1(&Pomdp1Spec {
            states: s.clone(),
            observations: s.clone(),
            actions: Arc::new(FiniteSpace::indexed(1).unwrap()),
            state_transition: vec![0.7, 0.3, 0.3, 0.7],
            observation: vec![0.85, 0.15, 0.15, 0.85],
            initial_obs: vec![0.5; 4],
            cost: vec![0.0; 4],
            discount: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn joint_next_examples() {
        let m = mdpii_from_platzman(&generic());
        let z = Belief::point_mass(m.states.clone(), 1).unwrap();
        let r = joint_next(&m, &z, 0, 0).unwrap();
        assert_eq!(r.weights, m.transition_row(1, 0, 0));

        // identity transition with a fixed observation "1"
        let mut fixed = perfect();
        for w in 0..2 {
            for y in 0..2 {
                let width = 4;
                let r = w * 2 + y;
                let row = &mut fixed.transition[r * width..(r + 1) * width];
                row.copy_from_slice(&[0.0; 4]);
                row[w * 2 + 1] = 1.0;
            }
        }
        let z = belief(&fixed, &[0.3, 0.7]);
        let r = joint_next(&fixed, &z, 0, 0).unwrap();
        assert_eq!(r.weights, vec![0.0, 0.3, 0.0, 0.7]);
    }

    #[test]
    fn out_of_range_indices_are_errors() {
        let m = perfect();
        let z = belief(&m, &[0.5, 0.5]);
        assert!(matches!(joint_next(&m, &z, 5, 0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(joint_next(&m, &z, 0, 3), Err(Error::IndexOutOfRange { .. })));
        assert!(posterior(&m, &z, 0, 0, 9).is_err());
    }

    #[test]
    fn obs_marginal_examples() {
        let m = perfect();
        let z = belief(&m, &[0.5, 0.5]);
        assert_eq!(obs_marginal(&m, &z, 0, 0).unwrap().weights(), &[0.5, 0.5]);
        let u = uninformative();
        for w in [[0.1, 0.9], [1.0, 0.0]] {
            let z = belief(&u, &w);
            assert!(close(obs_marginal(&u, &z, 1, 0).unwrap().weights(), &[0.5, 0.5], 1e-15));
        }
    }

    #[test]
    fn posterior_examples() {
        let m = perfect();
        let z = belief(&m, &[0.5, 0.5]);
        let p = posterior(&m, &z, 0, 0, 0).unwrap();
        assert_eq!(p.belief.weights(), &[1.0, 0.0]);
        assert!(!p.fallback);

        let u = uninformative();
        let z = belief(&u, &[0.3, 0.7]);
        for y2 in 0..2 {
            let p = posterior(&u, &z, 0, 0, y2).unwrap();
            assert!(close(p.belief.weights(), &[0.3, 0.7], 1e-15));
        }

        // deterministic "0" observation queried at "1": predicted belief δ0
        let z = belief(&m, &[1.0, 0.0]);
        let p = posterior(&m, &z, 0, 0, 1).unwrap();
        assert!(p.fallback);
        assert_eq!(p.belief.weights(), &[1.0, 0.0]);
    }

    #[test]
    fn belief_transition_examples() {
        let m = perfect();
        let z = belief(&m, &[0.5, 0.5]);
        let t = belief_transition(&m, &z, 0, 0).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!((t[0].node.belief.weights(), t[0].node.obs, t[0].probability), (&[1.0, 0.0][..], 0, 0.5));
        assert_eq!((t[1].node.belief.weights(), t[1].node.obs, t[1].probability), (&[0.0, 1.0][..], 1, 0.5));

        let u = uninformative();
        let z = belief(&u, &[0.4, 0.6]);
        let t = belief_transition(&u, &z, 0, 0).unwrap();
        assert_eq!(t.len(), 2);
        for (k, tr) in t.iter().enumerate() {
            assert_eq!(tr.node.obs, k);
            assert!((tr.probability - 0.5).abs() < 1e-15);
            assert!(close(tr.node.belief.weights(), &[0.4, 0.6], 1e-15));
        }
    }

    /// Enumerates (w, w', y') triples directly from the POMDP₁ factors.
    #[allow(clippy::needless_range_loop)]
    fn hand_bayes(z: &[f64], p1: &[[f64; 2]; 2], q1: &[[f64; 2]; 2]) -> Vec<(Vec<f64>, usize, f64)> {
        let mut out = Vec::new();
        for y2 in 0..2 {
            let mut joint = [0.0; 2];
            for w in 0..2 {
                for (w2, j) in joint.iter_mut().enumerate() {
                    *j += z[w] * p1[w][w2] * q1[w][y2];
                }
            }
            let m = joint[0] + joint[1];
            if m > 0.0 {
                out.push((vec![joint[0] / m, joint[1] / m], y2, m));
            }
        }
        out
    }

    #[test]
    fn generic_transition_matches_hand_enumeration() {
        let m = mdpii_from_platzman(&generic());
        let p1 = [[0.7, 0.3], [0.3, 0.7]];
        let q1 = [[0.85, 0.15], [0.15, 0.85]];
        for zw in [[0.5, 0.5], [0.2, 0.8], [1.0, 0.0]] {
            let z = belief(&m, &zw);
            let t = belief_transition(&m, &z, 0, 0).unwrap();
            let oracle = hand_bayes(&zw, &p1, &q1);
            assert_eq!(t.len(), oracle.len());
            for (tr, (w, y2, p)) in t.iter().zip(&oracle) {
                assert_eq!(tr.node.obs, *y2);
                assert!((tr.probability - p).abs() < 1e-14);
                assert!(close(tr.node.belief.weights(), w, 1e-14));
            }
        }
        // frozen: z = (0.5, 0.5) gives m = (0.5, 0.5) and posterior (0.5, 0.5)
        // for both observations since P1 is symmetric; z = (0.2, 0.8):
        // m(0) = 0.2*0.85 + 0.8*0.15 = 0.29
        let z = belief(&m, &[0.2, 0.8]);
        let t = belief_transition(&m, &z, 0, 0).unwrap();
        assert!((t[0].probability - 0.29).abs() < 1e-15);
        assert!((t[0].node.belief.weights()[0] - (0.2 * 0.85 * 0.7 + 0.8 * 0.15 * 0.3) / 0.29).abs() < 1e-15);
    }

    #[test]
    fn cost_bar_examples() {
        let m = mdpii_from_platzman(&instances::tiger(0.85));
        let z = Belief::point_mass(m.states.clone(), 0).unwrap();
        assert_eq!(cost_bar(&m, &z, 0, 1).unwrap(), 100.0);
        let z = belief(&m, &[0.3, 0.7]);
        assert_eq!(cost_bar(&m, &z, 1, 0).unwrap(), 1.0);
        let (z1, z2) = (belief(&m, &[0.1, 0.9]), belief(&m, &[0.8, 0.2]));
        let zm = belief(&m, &[0.25 * 0.1 + 0.75 * 0.8, 0.25 * 0.9 + 0.75 * 0.2]);
        let lhs = cost_bar(&m, &zm, 0, 2).unwrap();
        let rhs = 0.25 * cost_bar(&m, &z1, 0, 2).unwrap() + 0.75 * cost_bar(&m, &z2, 0, 2).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn qhat_examples() {
        let u = instances::uninformative(2, 2, 1, instances::identity_transition(2, 1), vec![0.0, 0.0]);
        let z = Belief::from_weights(u.states.clone(), vec![0.3, 0.7]).unwrap();
        let q = qhat(&u, &z, 0).unwrap();
        assert_eq!(q.len(), 1);
        assert!((q[0].1 - 1.0).abs() < 1e-15);
        assert!(close(q[0].0.weights(), &[0.3, 0.7], 1e-15));

        let p = instances::perfect_observation(2, 1, instances::identity_transition(2, 1), vec![0.0, 0.0]);
        let z = Belief::from_weights(p.states.clone(), vec![0.5, 0.5]).unwrap();
        let q = qhat(&p, &z, 0).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!((q[0].0.weights(), q[0].1), (&[1.0, 0.0][..], 0.5));
        assert_eq!((q[1].0.weights(), q[1].1), (&[0.0, 1.0][..], 0.5));

        let g = generic();
        let z = Belief::from_weights(g.states.clone(), vec![0.2, 0.8]).unwrap();
        let q = qhat(&g, &z, 0).unwrap();
        let oracle = hand_bayes(&[0.2, 0.8], &[[0.7, 0.3], [0.3, 0.7]], &[[0.85, 0.15], [0.15, 0.85]]);
        assert_eq!(q.len(), oracle.len());
        for ((b, p), (w, _, po)) in q.iter().zip(&oracle) {
            assert!((p - po).abs() < 1e-14 && close(b.weights(), w, 1e-14));
        }
    }

    #[test]
    fn cost_hat_examples() {
        let t = instances::tiger(0.85);
        let z = Belief::point_mass(t.states.clone(), 1).unwrap();
        assert_eq!(cost_hat(&t, &z, 2).unwrap(), 100.0);
        let z = Belief::from_weights(t.states.clone(), vec![0.4, 0.6]).unwrap();
        assert_eq!(cost_hat(&t, &z, 0).unwrap(), 1.0);
        assert!((cost_hat(&t, &z, 1).unwrap() - 40.0).abs() < 1e-12);
        let mut bad = t.clone();
        bad.cost[0] = 7.0;
        assert!(cost_hat(&bad, &z, 0).is_err());
    }

    #[test]
    fn initial_belief_examples() {
        let mut m = mdpii_from_platzman(&instances::tiger(0.85));
        let p = Dist::new(m.states.clone(), vec![0.3, 0.7]).unwrap();
        let (z, pr) = initial_belief(&m, &p, 0).unwrap();
        assert!(close(z.belief.weights(), &[0.3, 0.7], 1e-15));
        assert!((pr - 0.5).abs() < 1e-15);

        let pm = perfect();
        let (z, pr) = initial_belief(&pm, &Dist::uniform(pm.states.clone()), 1).unwrap();
        assert_eq!(z.belief.weights(), &[0.0, 1.0]);
        assert_eq!(pr, 0.5);

        m.initial_obs = vec![0.9, 0.1, 0.2, 0.8];
        let p = Dist::uniform(m.states.clone());
        let (z, pr) = initial_belief(&m, &p, 0).unwrap();
        assert!((pr - 0.55).abs() < 1e-15);
        assert!(close(z.belief.weights(), &[9.0 / 11.0, 2.0 / 11.0], 1e-15));

        // y0 impossible under δ0 with a perfect P0
        let (z, pr) = initial_belief(&pm, &Dist::point_mass(pm.states.clone(), 0).unwrap(), 1).unwrap();
        assert!(z.fallback && pr == 0.0);
    }

    #[test]
    fn expand_examples() {
        let m = perfect();
        let root = BeliefNode::new(belief(&m, &[0.5, 0.5]), 0);
        let r = expand_reachable(&m, &[root.clone(), root.clone()], 0, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(r.horizon(), 0);
        assert_eq!(r.layer(0).len(), 1);

        let r = expand_reachable(&m, std::slice::from_ref(&root), 4, DEFAULT_NODE_CAP).unwrap();
        for t in 1..=4 {
            assert!(r.layer(t).len() <= 4);
            for n in r.layer(t) {
                assert!(n.belief.weights().contains(&1.0));
            }
        }

        let u = uninformative();
        let root = BeliefNode::new(belief(&u, &[0.3, 0.7]), 0);
        let other = BeliefNode::new(belief(&u, &[0.3, 0.7]), 1);
        let r = expand_reachable(&u, &[root.clone(), other.clone()], 3, DEFAULT_NODE_CAP).unwrap();
        for t in 0..=3 {
            let keys: Vec<_> = r.layer(t).iter().map(BeliefNode::key).collect();
            assert_eq!(keys, vec![root.key(), other.key()]);
        }
    }

    #[test]
    fn expand_enforces_node_cap() {
        let t = mdpii_from_platzman(&instances::tiger(0.85));
        let (root, _) = initial_belief(&t, &Dist::uniform(t.states.clone()), 0).unwrap();
        let err = expand_reachable(&t, &[BeliefNode::new(root.belief, 0)], 6, 10).unwrap_err();
        match err {
            Error::ResourceGuard(msg) => assert!(msg.contains("layer")),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn csv_exports_have_fixed_headers() {
        let t = mdpii_from_platzman(&instances::tiger(0.85));
        let root = BeliefNode::new(belief(&t, &[0.5, 0.5]), 0);
        let r = expand_reachable(&t, &[root], 2, DEFAULT_NODE_CAP).unwrap();
        let mut nodes = Vec::new();
        r.write_nodes_csv(&mut nodes, &t.observations).unwrap();
        let text = String::from_utf8(nodes).unwrap();
        assert!(text.starts_with("node_id,epoch,belief,obs\n0,0,0.5;0.5,hear-left\n"));
        assert_eq!(text.lines().count(), r.node_count() + 1);
        let mut edges = Vec::new();
        r.write_edges_csv(&mut edges, &t.actions).unwrap();
        let text = String::from_utf8(edges).unwrap();
        assert!(text.starts_with("node_id,action,child_id,probability\n0,listen,"));
    }

    #[test]
    fn platzman_arity_agrees_with_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = instances::random_platzman(&mut rng, 3, 2, 2);
            let e = mdpii_from_platzman(&p);
            let z = Belief::from_weights(p.states.clone(), instances::random_simplex(&mut rng, 3)).unwrap();
            for a in 0..2 {
                for y in 0..2 {
                    assert_eq!(joint_next_platzman(&p, &z, a).unwrap(), joint_next(&e, &z, y, a).unwrap());
                    for y2 in 0..2 {
                        assert_eq!(
                            posterior_platzman(&p, &z, a, y2).unwrap().belief.weights(),
                            posterior(&e, &z, y, a, y2).unwrap().belief.weights()
                        );
                    }
                }
                // qhat = y'-marginal of belief_transition of the embedding
                let q = qhat(&p, &z, a).unwrap();
                let mut merged: Vec<(Belief, f64)> = Vec::new();
                for t in belief_transition(&e, &z, 0, a).unwrap() {
                    match merged.iter_mut().find(|(b, _)| *b == t.node.belief) {
                        Some((_, pr)) => *pr += t.probability,
                        None => merged.push((t.node.belief, t.probability)),
                    }
                }
                assert_eq!(q.len(), merged.len());
                for ((b1, p1), (b2, p2)) in q.iter().zip(&merged) {
                    assert_eq!(b1.weights(), b2.weights());
                    assert_eq!(p1, p2);
                }
            }
        }
    }

    fn subsets(n: usize) -> Vec<Vec<usize>> {
        (0u32..1 << n).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn disintegration_identity(seed in 0u64..10_000, zr in prop::collection::vec(0.0f64..1.0, 3)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = instances::random_mdpii(&mut rng, 3, 3, 2);
            let s: f64 = zr.iter().sum::<f64>() + 1e-9;
            let z = belief(&m, &zr.iter().map(|v| (v + 1e-9 / 3.0) / s).collect::<Vec<_>>());
            for y in 0..3 {
                for a in 0..2 {
                    let r = joint_next(&m, &z, y, a).unwrap();
                    let marg = r.observation_marginal();
                    let posts: Vec<Posterior> = (0..3).map(|y2| posterior(&m, &z, y, a, y2).unwrap()).collect();
                    let trans = belief_transition(&m, &z, y, a).unwrap();
                    let total: f64 = trans.iter().map(|t| t.probability).sum();
                    prop_assert!((total - 1.0).abs() < 1e-12);
                    for b in subsets(3) {
                        for c in subsets(3) {
                            let lhs: f64 = c.iter().filter(|&&y2| marg[y2] > 0.0)
                                .map(|&y2| posts[y2].belief.dist().mass(b.iter().copied()) * marg[y2]).sum();
                            prop_assert!((lhs - r.mass(&b, &c)).abs() < 1e-12);
                        }
                    }
                }
            }
        }

        #[test]
        fn joint_next_linear_and_cost_affine(seed in 0u64..10_000, lambda in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = instances::random_mdpii(&mut rng, 3, 2, 2);
            let w1 = instances::random_simplex(&mut rng, 3);
            let w2 = instances::random_simplex(&mut rng, 3);
            let wm: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
            let (z1, z2, zm) = (belief(&m, &w1), belief(&m, &w2), belief(&m, &wm));
            for y in 0..2 {
                for a in 0..2 {
                    let r1 = joint_next(&m, &z1, y, a).unwrap();
                    let r2 = joint_next(&m, &z2, y, a).unwrap();
                    let rm = joint_next(&m, &zm, y, a).unwrap();
                    for k in 0..rm.weights.len() {
                        prop_assert!((rm.weights[k] - lambda * r1.weights[k] - (1.0 - lambda) * r2.weights[k]).abs() < 1e-12);
                    }
                    let c = cost_bar(&m, &zm, y, a).unwrap();
                    let ca = lambda * cost_bar(&m, &z1, y, a).unwrap() + (1.0 - lambda) * cost_bar(&m, &z2, y, a).unwrap();
                    prop_assert!((c - ca).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn permutation_equivariance(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = instances::random_mdpii(&mut rng, 3, 2, 2);
            let perm = [2usize, 0, 1];
            // relabel W by sigma: new state k corresponds to old perm[k]
            let mut pm = m.clone();
            let (nw, ny, na) = (3, 2, 2);
            for w in 0..nw { for y in 0..ny { for a in 0..na {
                let old = m.transition_row(perm[w], y, a);
                let r = (w * ny + y) * na + a;
                for w2 in 0..nw { for y2 in 0..ny {
                    pm.transition[r * nw * ny + w2 * ny + y2] = old[perm[w2] * ny + y2];
                }}
                pm.cost[r] = m.cost(perm[w], y, a);
            }}}
            let zw = instances::random_simplex(&mut rng, 3);
            let zp: Vec<f64> = (0..3).map(|k| zw[perm[k]]).collect();
            let (z, zpb) = (belief(&m, &zw), belief(&pm, &zp));
            for y in 0..2 { for a in 0..2 {
                prop_assert!((cost_bar(&m, &z, y, a).unwrap() - cost_bar(&pm, &zpb, y, a).unwrap()).abs() < 1e-12);
                for y2 in 0..2 {
                    let h = posterior(&m, &z, y, a, y2).unwrap();
                    let hp = posterior(&pm, &zpb, y, a, y2).unwrap();
                    for (k, &pk) in perm.iter().enumerate() {
                        prop_assert!((hp.belief.weights()[k] - h.belief.weights()[pk]).abs() < 1e-12);
                    }
                }
            }}
        }
    }
}
