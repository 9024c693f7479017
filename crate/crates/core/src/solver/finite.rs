//! Exact finite-horizon value iteration on the reachable belief nodes.

use std::collections::HashMap;
use std::io::{Read, Write};

use rayon::prelude::*;

use super::{argmin_set, check_alpha, eta, ValueTable, DEFAULT_TIE_TOL};
use crate::error::{Error, Result};
use crate::measures::Dist;
use crate::models::{MdpiiModel, Validate};
use crate::reduction::{
    csv_err, expand_reachable, BeliefNode, format_weights, initial_nodes, parse_weights, BeliefKey, NodeKey, ReachableSet,
    DEFAULT_NODE_CAP,
};

/// Markov policy `(φ_0, …, φ_{T-1})` over belief nodes.
#[derive(Debug, Clone, Default)]
pub struct PolicyTree {
    epochs: Vec<HashMap<NodeKey, usize>>,
}

impl PolicyTree {
    pub fn horizon(&self) -> usize {
        self.epochs.len()
    }

    pub fn action(&self, t: usize, key: &NodeKey) -> Option<usize> {
        self.epochs.get(t)?.get(key).copied()
    }

    pub fn epoch(&self, t: usize) -> &HashMap<NodeKey, usize> {
        &self.epochs[t]
    }

    /// Columns: `node_id,epoch,belief,obs,action`. Node ids follow the
    /// reachable-set export; only epochs `0..T-1` carry an action.
    pub fn write_csv<W: Write>(&self, out: W, model: &MdpiiModel, reachable: &ReachableSet) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_id", "epoch", "belief", "obs", "action"]).map_err(csv_err)?;
        for t in 0..self.horizon() {
            for (i, node) in reachable.layer(t).iter().enumerate() {
                let a = self.epochs[t][&node.key()];
                w.write_record([
                    reachable.node_id(t, i).to_string(),
                    t.to_string(),
                    format_weights(node.belief.weights()),
                    model.observations.label(node.obs).to_string(),
                    model.actions.label(a).to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format of [`PolicyTree::write_csv`]; the `node_id` column is
    /// ignored.
    pub fn read_csv<R: Read>(input: R, model: &MdpiiModel) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(parse_err)?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse(format!("policy file lacks a {name:?} column")))
        };
        let (ce, cb, co, ca) = (col("epoch")?, col("belief")?, col("obs")?, col("action")?);
        let mut epochs: Vec<HashMap<NodeKey, usize>> = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(parse_err)?;
            let at = |msg: String| Error::Parse(format!("policy row {}: {msg}", line + 2));
            let t: usize = rec[ce].parse().map_err(|e| at(format!("epoch: {e}")))?;
            let weights = parse_weights(&rec[cb])?;
            if weights.len() != model.num_states() {
                return Err(at(format!("belief has {} weights", weights.len())));
            }
            let y = model
                .observations
                .index_of(&rec[co])
                .ok_or_else(|| at(format!("unknown observation {:?}", &rec[co])))?;
            let a = model
                .actions
                .index_of(&rec[ca])
                .ok_or_else(|| at(format!("unknown action {:?}", &rec[ca])))?;
            if epochs.len() <= t {
                epochs.resize_with(t + 1, HashMap::new);
            }
            epochs[t].insert((BeliefKey::of(&weights), y), a);
        }
        Ok(Self { epochs })
    }
}

fn parse_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Value of one initial observation branch.
#[derive(Debug, Clone, PartialEq)]
pub struct RootValue {
    pub obs: usize,
    /// `Pr(y_0)`.
    pub probability: f64,
    /// Index of the root in layer 0.
    pub node: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct FiniteHorizonSolution {
    pub horizon: usize,
    pub alpha: f64,
    /// `Σ_{y0} Pr(y0) v_T(z0(y0), y0)`.
    pub value: f64,
    pub roots: Vec<RootValue>,
    pub policy: PolicyTree,
    pub reachable: ReachableSet,
    /// `values[k][t][i]` is `v_k` at node `i` of layer `t`, for `t ≤ T - k`.
    values: Vec<Vec<Vec<f64>>>,
}

impl FiniteHorizonSolution {
    /// `v_k` at node `i` of layer `t`; `None` outside `t ≤ T - k`.
    pub fn value_at(&self, k: usize, t: usize, i: usize) -> Option<f64> {
        self.values.get(k)?.get(t)?.get(i).copied()
    }

    /// `v_k` on every node where it is defined. `v_k` depends only on the
    /// node, not on its epoch, so the layers merge without conflict.
    pub fn value_table(&self, k: usize) -> ValueTable {
        let mut values = HashMap::new();
        if let Some(layers) = self.values.get(k) {
            for (t, vs) in layers.iter().enumerate() {
                for (node, v) in self.reachable.layer(t).iter().zip(vs) {
                    values.insert(node.key(), *v);
                }
            }
        }
        ValueTable { steps_to_go: k, values }
    }

    /// `max |v_k − min_a η_{v_{k−1}}|` over all `k ≥ 1` and nodes, recomputed
    /// through [`eta`] and key lookups instead of the edge lists.
    pub fn recursion_residual(&self, model: &MdpiiModel) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for k in 1..=self.horizon {
            let prev = self.value_table(k - 1);
            for t in 0..=self.horizon - k {
                for (i, node) in self.reachable.layer(t).iter().enumerate() {
                    let best = (0..model.num_actions())
                        .map(|a| eta(model, &prev, node, a, self.alpha))
                        .collect::<Result<Vec<_>>>()?
                        .into_iter()
                        .fold(f64::INFINITY, f64::min);
                    worst = worst.max((self.values[k][t][i] - best).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Columns: `node_id,epoch,steps_to_go,value`.
    pub fn write_values_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_id", "epoch", "steps_to_go", "value"]).map_err(csv_err)?;
        for (k, layers) in self.values.iter().enumerate() {
            for (t, vs) in layers.iter().enumerate() {
                for (i, v) in vs.iter().enumerate() {
                    w.write_record([
                        self.reachable.node_id(t, i).to_string(),
                        t.to_string(),
                        k.to_string(),
                        v.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Backward induction from `v_0 ≡ 0` over the nodes reachable from the
/// prior `p` in `T` steps.
///
/// The action at epoch `t` attains `v_{T−t}`, i.e. lies in the greedy set of
/// `v_{T−1−t}`; ties within [`DEFAULT_TIE_TOL`] go to the first action.
pub fn finite_horizon_solve(model: &MdpiiModel, p: &Dist, horizon: usize, alpha: f64) -> Result<FiniteHorizonSolution> {
    finite_horizon_solve_with_cap(model, p, horizon, alpha, DEFAULT_NODE_CAP)
}

pub fn finite_horizon_solve_with_cap(
    model: &MdpiiModel,
    p: &Dist,
    horizon: usize,
    alpha: f64,
    node_cap: usize,
) -> Result<FiniteHorizonSolution> {
    model.check()?;
    let roots = initial_nodes(model, p)?;
    solve_rooted(model, roots, horizon, alpha, node_cap)
}

/// Same recursion started from explicit weighted roots `(z, y)`; the
/// reported value is `Σ weight · v_T(z, y)`.
pub fn finite_horizon_solve_rooted(
    model: &MdpiiModel,
    roots: &[(BeliefNode, f64)],
    horizon: usize,
    alpha: f64,
) -> Result<FiniteHorizonSolution> {
    model.check()?;
    solve_rooted(model, roots.to_vec(), horizon, alpha, DEFAULT_NODE_CAP)
}

fn solve_rooted(
    model: &MdpiiModel,
    roots: Vec<(BeliefNode, f64)>,
    horizon: usize,
    alpha: f64,
    node_cap: usize,
) -> Result<FiniteHorizonSolution> {
    check_alpha(alpha, true)?;
    let nodes: Vec<_> = roots.iter().map(|(n, _)| n.clone()).collect();
    let reachable = expand_reachable(model, &nodes, horizon, node_cap)?;
    let na = model.num_actions();

    let costs: Vec<Vec<Vec<f64>>> = reachable
        .layers()
        .iter()
        .take(horizon)
        .map(|layer| {
            layer
                .par_iter()
                .map(|n| {
                    (0..na)
                        .map(|a| {
                            n.belief
                                .weights()
                                .iter()
                                .enumerate()
                                .map(|(w, z)| z * model.cost(w, n.obs, a))
                                .sum()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut values: Vec<Vec<Vec<f64>>> = Vec::with_capacity(horizon + 1);
    values.push(reachable.layers().iter().map(|l| vec![0.0; l.len()]).collect());
    let mut chosen: Vec<Vec<usize>> = vec![Vec::new(); horizon];
    for k in 1..=horizon {
        let prev = &values[k - 1];
        let mut layers = Vec::with_capacity(horizon - k + 1);
        for t in 0..=horizon - k {
            let rows: Vec<(f64, usize)> = (0..reachable.layer(t).len())
                .into_par_iter()
                .map(|i| {
                    let etas: Vec<f64> = (0..na)
                        .map(|a| {
                            let future: f64 = reachable
                                .edges(t, i, a)
                                .iter()
                                .map(|e| e.probability * prev[t + 1][e.child])
                                .sum();
                            costs[t][i][a] + alpha * future
                        })
                        .collect();
                    let a = argmin_set(&etas, DEFAULT_TIE_TOL)[0];
                    let best = etas.iter().copied().fold(f64::INFINITY, f64::min);
                    (best, a)
                })
                .collect();
            if k == horizon - t {
                chosen[t] = rows.iter().map(|r| r.1).collect();
            }
            layers.push(rows.into_iter().map(|r| r.0).collect());
        }
        values.push(layers);
    }

    let epochs = chosen
        .iter()
        .enumerate()
        .map(|(t, acts)| {
            reachable
                .layer(t)
                .iter()
                .zip(acts)
                .map(|(n, &a)| (n.key(), a))
                .collect()
        })
        .collect();

    let roots: Vec<RootValue> = roots
        .iter()
        .map(|(n, pr)| {
            let i = reachable.find(0, &n.key()).expect("root is in layer 0");
            RootValue {
                obs: n.obs,
                probability: *pr,
                node: i,
                value: values[horizon][0][i],
            }
        })
        .collect();
    let value = roots.iter().map(|r| r.probability * r.value).sum();
    Ok(FiniteHorizonSolution {
        horizon,
        alpha,
        value,
        roots,
        policy: PolicyTree { epochs },
        reachable,
        values,
    })
}
