//! Ready-made models: the tiger problem, degenerate observation structures,
//! and random instance generators used by tests and the CLI.

use std::sync::Arc;

use rand::Rng;

use crate::measures::FiniteSpace;
use crate::models::{
    platzman_from_pomdp1, platzman_from_pomdp2, MdpModel, MdpiiModel, PlatzmanModel, Pomdp1Spec,
    Pomdp2Spec,
};

fn space(labels: &[&str]) -> Arc<FiniteSpace> {
    Arc::new(FiniteSpace::new(labels.iter().copied()).expect("static labels"))
}

fn indexed(n: usize) -> Arc<FiniteSpace> {
    Arc::new(FiniteSpace::indexed(n).expect("n >= 1"))
}

/// Tiger behind one of two doors, as a POMDP₁.
///
/// Listening costs 1 and reports the tiger's side with probability
/// `accuracy`; opening the tiger's door costs 100, the other door 0. Opening
/// resets the tiger uniformly and yields an uninformative observation.
pub fn tiger_spec(accuracy: f64) -> Pomdp1Spec {
    let states = space(&["L", "R"]);
    let observations = space(&["hear-left", "hear-right"]);
    let actions = space(&["listen", "open-left", "open-right"]);
    let mut state_transition = Vec::new();
    let mut observation = Vec::new();
    let mut cost = Vec::new();
    for w in 0..2 {
        // listen
        state_transition.extend(if w == 0 { [1.0, 0.0] } else { [0.0, 1.0] });
        observation.extend(if w == 0 {
            [accuracy, 1.0 - accuracy]
        } else {
            [1.0 - accuracy, accuracy]
        });
        // open-left, open-right
        for _ in 0..2 {
            state_transition.extend([0.5, 0.5]);
            observation.extend([0.5, 0.5]);
        }
    }
    for w in 0..2 {
        for _y in 0..2 {
            cost.push(1.0);
            cost.push(if w == 0 { 100.0 } else { 0.0 });
            cost.push(if w == 1 { 100.0 } else { 0.0 });
        }
    }
    Pomdp1Spec {
        states,
        observations,
        actions,
        state_transition,
        observation,
        initial_obs: vec![0.5; 4],
        cost,
        discount: 1.0,
    }
}

pub fn tiger(accuracy: f64) -> PlatzmanModel {
    platzman_from_pomdp1(&tiger_spec(accuracy)).expect("tiger spec is valid")
}

/// POMDP₂ whose observation reveals the next state; `transition` is
/// `[w][a][w']` over `actions` actions, `cost` is `[w][a]`.
pub fn perfect_observation(n: usize, actions: usize, transition: Vec<f64>, cost: Vec<f64>) -> PlatzmanModel {
    let mut observation = Vec::new();
    for _a in 0..actions {
        for w2 in 0..n {
            observation.extend((0..n).map(|y| if y == w2 { 1.0 } else { 0.0 }));
        }
    }
    let initial_obs = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect();
    platzman_from_pomdp2(&Pomdp2Spec {
        states: indexed(n),
        observations: indexed(n),
        actions: indexed(actions),
        state_transition: transition,
        observation,
        initial_obs,
        cost: expand_cost(&cost, n, n, actions),
        discount: 0.9,
    })
    .expect("valid perfect-observation model")
}

/// Observations uniform over `ny` labels regardless of state and action.
pub fn uninformative(n: usize, ny: usize, actions: usize, transition: Vec<f64>, cost: Vec<f64>) -> PlatzmanModel {
    platzman_from_pomdp1(&Pomdp1Spec {
        states: indexed(n),
        observations: indexed(ny),
        actions: indexed(actions),
        state_transition: transition,
        observation: vec![1.0 / ny as f64; n * actions * ny],
        initial_obs: vec![1.0 / ny as f64; n * ny],
        cost: expand_cost(&cost, n, ny, actions),
        discount: 0.9,
    })
    .expect("valid uninformative model")
}

/// Identity transition table `[w][a][w']`.
pub fn identity_transition(n: usize, actions: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(n * actions * n);
    for w in 0..n {
        for _ in 0..actions {
            t.extend((0..n).map(|w2| if w2 == w { 1.0 } else { 0.0 }));
        }
    }
    t
}

/// Repeats a `[w][a]` cost table across observations: `[w][y][a]`.
pub fn expand_cost(cost: &[f64], n: usize, ny: usize, actions: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * ny * actions);
    for w in 0..n {
        for _ in 0..ny {
            out.extend_from_slice(&cost[w * actions..(w + 1) * actions]);
        }
    }
    out
}

fn random_rows<R: Rng + ?Sized>(rng: &mut R, rows: usize, width: usize, sparsity: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * width);
    for _ in 0..rows {
        let mut row: Vec<f64> = (0..width)
            .map(|_| if rng.gen::<f64>() < sparsity { 0.0 } else { rng.gen::<f64>() })
            .collect();
        if row.iter().all(|&v| v == 0.0) {
            row[rng.gen_range(0..width)] = 1.0;
        }
        let s: f64 = row.iter().sum();
        out.extend(row.into_iter().map(|v| v / s));
    }
    out
}

/// Random MDPII with costs in `[0, 10)`. About a quarter of kernel entries are
/// zero so that zero-probability branches get exercised.
pub fn random_mdpii<R: Rng + ?Sized>(rng: &mut R, nw: usize, ny: usize, na: usize) -> MdpiiModel {
    MdpiiModel {
        states: indexed(nw),
        observations: indexed(ny),
        actions: indexed(na),
        transition: random_rows(rng, nw * ny * na, nw * ny, 0.25),
        initial_obs: random_rows(rng, nw, ny, 0.2),
        cost: (0..nw * ny * na).map(|_| 10.0 * rng.gen::<f64>()).collect(),
        discount: 0.9,
    }
}

pub fn random_platzman<R: Rng + ?Sized>(rng: &mut R, nw: usize, ny: usize, na: usize) -> PlatzmanModel {
    PlatzmanModel {
        states: indexed(nw),
        observations: indexed(ny),
        actions: indexed(na),
        transition: random_rows(rng, nw * na, nw * ny, 0.25),
        initial_obs: random_rows(rng, nw, ny, 0.2),
        cost: (0..nw * ny * na).map(|_| 10.0 * rng.gen::<f64>()).collect(),
        discount: 0.9,
    }
}

/// Random Platzman model with observation-independent costs.
pub fn random_platzman_y_free<R: Rng + ?Sized>(rng: &mut R, nw: usize, ny: usize, na: usize) -> PlatzmanModel {
    let mut m = random_platzman(rng, nw, ny, na);
    let c: Vec<f64> = (0..nw * na).map(|_| 10.0 * rng.gen::<f64>()).collect();
    m.cost = expand_cost(&c, nw, ny, na);
    m
}

pub fn random_mdp<R: Rng + ?Sized>(rng: &mut R, nx: usize, na: usize) -> MdpModel {
    MdpModel {
        states: indexed(nx),
        actions: indexed(na),
        transition: random_rows(rng, nx * na, nx, 0.3),
        cost: (0..nx * na).map(|_| 10.0 * rng.gen::<f64>()).collect(),
        discount: 0.9,
    }
}

/// Random probability vector of length `n` with full support.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}
