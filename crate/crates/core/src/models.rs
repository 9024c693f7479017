//! Model classes and the constructions linking them.
//!
//! Every model stores its kernels as flat row-major tables. The index order of
//! each table is documented on its field and is the order used by the model
//! file format.
//!
//! ```text
//! MDPII ⊃ Platzman ⊃ {POMDP₁, POMDP₂}        MDP = MDPII with |W| = 1
//! ```

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::{FiniteSpace, NORMALIZATION_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Shape,
    Normalization,
    Negative,
    NonFinite,
    Discount,
    InitialDistribution,
}

/// One violated invariant, located by its table and coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.kind, self.location, self.detail)
    }
}

fn violation(kind: ViolationKind, location: String, detail: String) -> Violation {
    Violation {
        kind,
        location,
        detail,
    }
}

/// Checks `rows` consecutive probability rows of width `width`.
fn check_kernel(
    name: &str,
    table: &[f64],
    rows: usize,
    width: usize,
    locate: impl Fn(usize) -> String,
    out: &mut Vec<Violation>,
) {
    if table.len() != rows * width {
        out.push(violation(
            ViolationKind::Shape,
            name.to_string(),
            format!("{} entries, expected {}", table.len(), rows * width),
        ));
        return;
    }
    for r in 0..rows {
        let row = &table[r * width..(r + 1) * width];
        let loc = format!("{name}({})", locate(r));
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            out.push(violation(ViolationKind::NonFinite, loc, format!("entry {j}")));
            continue;
        }
        if let Some(j) = row.iter().position(|&v| v < 0.0) {
            out.push(violation(ViolationKind::Negative, loc, format!("entry {j} = {}", row[j])));
            continue;
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > NORMALIZATION_TOL {
            out.push(violation(ViolationKind::Normalization, loc, format!("row sums to {s}")));
        }
    }
}

fn check_costs(
    table: &[f64],
    len: usize,
    locate: impl Fn(usize) -> String,
    out: &mut Vec<Violation>,
) {
    if table.len() != len {
        out.push(violation(
            ViolationKind::Shape,
            "cost".into(),
            format!("{} entries, expected {len}", table.len()),
        ));
        return;
    }
    for (k, &c) in table.iter().enumerate() {
        if !c.is_finite() {
            out.push(violation(ViolationKind::NonFinite, format!("cost({})", locate(k)), format!("{c}")));
        } else if c < 0.0 {
            out.push(violation(ViolationKind::Negative, format!("cost({})", locate(k)), format!("{c}")));
        }
    }
}

fn check_discount(discount: f64, out: &mut Vec<Violation>) {
    if !discount.is_finite() || discount < 0.0 {
        out.push(violation(
            ViolationKind::Discount,
            "discount".into(),
            format!("{discount} is not a finite nonnegative number"),
        ));
    }
}

fn into_result(v: Vec<Violation>) -> Result<()> {
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(v))
    }
}

/// Reports every violated invariant; an empty list means the model is valid.
pub trait Validate {
    fn validate(&self) -> Vec<Violation>;

    fn check(&self) -> Result<()> {
        into_result(self.validate())
    }
}

/// Markov decision process with incomplete information.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpiiModel {
    /// Unobservable component `W`.
    pub states: Arc<FiniteSpace>,
    /// Observable component `Y`.
    pub observations: Arc<FiniteSpace>,
    pub actions: Arc<FiniteSpace>,
    /// `P(w', y' | w, y, a)`, indexed `[w][y][a][w'][y']`.
    pub transition: Vec<f64>,
    /// `P0(y | w)`, indexed `[w][y]`.
    pub initial_obs: Vec<f64>,
    /// `c(w, y, a)`, indexed `[w][y][a]`.
    pub cost: Vec<f64>,
    pub discount: f64,
}

impl MdpiiModel {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// Row `P(· | w, y, a)` over `W×Y`, entry `w' * |Y| + y'`.
    pub fn transition_row(&self, w: usize, y: usize, a: usize) -> &[f64] {
        let (ny, na) = (self.num_observations(), self.num_actions());
        let width = self.num_states() * ny;
        let r = (w * ny + y) * na + a;
        &self.transition[r * width..(r + 1) * width]
    }

    pub fn initial_row(&self, w: usize) -> &[f64] {
        let ny = self.num_observations();
        &self.initial_obs[w * ny..(w + 1) * ny]
    }

    pub fn cost(&self, w: usize, y: usize, a: usize) -> f64 {
        self.cost[(w * self.num_observations() + y) * self.num_actions() + a]
    }

    pub fn check_indices(&self, y: usize, a: usize) -> Result<()> {
        if y >= self.num_observations() {
            return Err(Error::IndexOutOfRange {
                what: "observation",
                index: y,
                size: self.num_observations(),
            });
        }
        if a >= self.num_actions() {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: a,
                size: self.num_actions(),
            });
        }
        Ok(())
    }

    /// True when `P(·|w,y,a)` does not depend on `y`.
    pub fn is_observation_independent(&self) -> bool {
        let (nw, ny, na) = (self.num_states(), self.num_observations(), self.num_actions());
        (0..nw).all(|w| {
            (0..na).all(|a| (1..ny).all(|y| self.transition_row(w, y, a) == self.transition_row(w, 0, a)))
        })
    }
}

impl Validate for MdpiiModel {
    fn validate(&self) -> Vec<Violation> {
        let (nw, ny, na) = (self.num_states(), self.num_observations(), self.num_actions());
        let mut out = Vec::new();
        check_kernel("transition", &self.transition, nw * ny * na, nw * ny, |r| {
            format!("w={},y={},a={}", self.states.label(r / (ny * na)), self.observations.label(r / na % ny), self.actions.label(r % na))
        }, &mut out);
        check_kernel("initial_obs", &self.initial_obs, nw, ny, |r| format!("w={}", self.states.label(r)), &mut out);
        check_costs(&self.cost, nw * ny * na, |k| {
            format!("w={},y={},a={}", self.states.label(k / (ny * na)), self.observations.label(k / na % ny), self.actions.label(k % na))
        }, &mut out);
        check_discount(self.discount, &mut out);
        out
    }
}

/// Platzman's model: an MDPII whose transition kernel ignores `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatzmanModel {
    pub states: Arc<FiniteSpace>,
    pub observations: Arc<FiniteSpace>,
    pub actions: Arc<FiniteSpace>,
    /// `P(w', y' | w, a)`, indexed `[w][a][w'][y']`.
    pub transition: Vec<f64>,
    /// `P0(y | w)`, indexed `[w][y]`.
    pub initial_obs: Vec<f64>,
    /// `c(w, y, a)`, indexed `[w][y][a]`.
    pub cost: Vec<f64>,
    pub discount: f64,
}

impl PlatzmanModel {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn transition_row(&self, w: usize, a: usize) -> &[f64] {
        let width = self.num_states() * self.num_observations();
        let r = w * self.num_actions() + a;
        &self.transition[r * width..(r + 1) * width]
    }

    pub fn cost(&self, w: usize, y: usize, a: usize) -> f64 {
        self.cost[(w * self.num_observations() + y) * self.num_actions() + a]
    }

    /// `c(w, a)` when the cost table does not depend on `y`.
    pub fn observation_free_cost(&self) -> Option<Vec<f64>> {
        let (nw, ny, na) = (self.num_states(), self.num_observations(), self.num_actions());
        let mut out = Vec::with_capacity(nw * na);
        for w in 0..nw {
            for a in 0..na {
                let c0 = self.cost(w, 0, a);
                if (1..ny).any(|y| self.cost(w, y, a) != c0) {
                    return None;
                }
                out.push(c0);
            }
        }
        Some(out)
    }

    /// Recovers a Platzman table from an MDPII whose kernel ignores `y`.
    pub fn from_mdpii(model: &MdpiiModel) -> Option<Self> {
        if !model.is_observation_independent() {
            return None;
        }
        let (nw, na) = (model.num_states(), model.num_actions());
        let mut transition = Vec::with_capacity(model.transition.len() / model.num_observations());
        for w in 0..nw {
            for a in 0..na {
                transition.extend_from_slice(model.transition_row(w, 0, a));
            }
        }
        Some(Self {
            states: model.states.clone(),
            observations: model.observations.clone(),
            actions: model.actions.clone(),
            transition,
            initial_obs: model.initial_obs.clone(),
            cost: model.cost.clone(),
            discount: model.discount,
        })
    }
}

impl Validate for PlatzmanModel {
    fn validate(&self) -> Vec<Violation> {
        let (nw, ny, na) = (self.num_states(), self.num_observations(), self.num_actions());
        let mut out = Vec::new();
        check_kernel("transition", &self.transition, nw * na, nw * ny, |r| {
            format!("w={},a={}", self.states.label(r / na), self.actions.label(r % na))
        }, &mut out);
        check_kernel("initial_obs", &self.initial_obs, nw, ny, |r| format!("w={}", self.states.label(r)), &mut out);
        check_costs(&self.cost, nw * ny * na, |k| {
            format!("w={},y={},a={}", self.states.label(k / (ny * na)), self.observations.label(k / na % ny), self.actions.label(k % na))
        }, &mut out);
        check_discount(self.discount, &mut out);
        out
    }
}

/// POMDP whose observation is drawn from the current state and action.
#[derive(Debug, Clone, PartialEq)]
pub struct Pomdp1Spec {
    pub states: Arc<FiniteSpace>,
    pub observations: Arc<FiniteSpace>,
    pub actions: Arc<FiniteSpace>,
    /// `P1(w' | w, a)`, indexed `[w][a][w']`.
    pub state_transition: Vec<f64>,
    /// `Q1(y' | w, a)`, indexed `[w][a][y']`.
    pub observation: Vec<f64>,
    pub initial_obs: Vec<f64>,
    pub cost: Vec<f64>,
    pub discount: f64,
}

impl Validate for Pomdp1Spec {
    fn validate(&self) -> Vec<Violation> {
        let (nw, ny, na) = (self.states.len(), self.observations.len(), self.actions.len());
        let mut out = Vec::new();
        let loc = |r: usize| format!("w={},a={}", self.states.label(r / na), self.actions.label(r % na));
        check_kernel("state_transition", &self.state_transition, nw * na, nw, loc, &mut out);
        check_kernel("observation", &self.observation, nw * na, ny, loc, &mut out);
        check_kernel("initial_obs", &self.initial_obs, nw, ny, |r| format!("w={}", self.states.label(r)), &mut out);
        check_costs(&self.cost, nw * ny * na, |k| format!("index {k}"), &mut out);
        check_discount(self.discount, &mut out);
        out
    }
}

/// POMDP whose observation is drawn from the action and the next state.
#[derive(Debug, Clone, PartialEq)]
pub struct Pomdp2Spec {
    pub states: Arc<FiniteSpace>,
    pub observations: Arc<FiniteSpace>,
    pub actions: Arc<FiniteSpace>,
    /// `P2(w' | w, a)`, indexed `[w][a][w']`.
    pub state_transition: Vec<f64>,
    /// `Q2(y' | a, w')`, indexed `[a][w'][y']`.
    pub observation: Vec<f64>,
    pub initial_obs: Vec<f64>,
    pub cost: Vec<f64>,
    pub discount: f64,
}

impl Validate for Pomdp2Spec {
    fn validate(&self) -> Vec<Violation> {
        let (nw, ny, na) = (self.states.len(), self.observations.len(), self.actions.len());
        let mut out = Vec::new();
        check_kernel("state_transition", &self.state_transition, nw * na, nw, |r| {
            format!("w={},a={}", self.states.label(r / na), self.actions.label(r % na))
        }, &mut out);
        check_kernel("observation", &self.observation, na * nw, ny, |r| {
            format!("a={},w'={}", self.actions.label(r / nw), self.states.label(r % nw))
        }, &mut out);
        check_kernel("initial_obs", &self.initial_obs, nw, ny, |r| format!("w={}", self.states.label(r)), &mut out);
        check_costs(&self.cost, nw * ny * na, |k| format!("index {k}"), &mut out);
        check_discount(self.discount, &mut out);
        out
    }
}

/// Fully observed finite MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel {
    pub states: Arc<FiniteSpace>,
    pub actions: Arc<FiniteSpace>,
    /// `P(x' | x, a)`, indexed `[x][a][x']`.
    pub transition: Vec<f64>,
    /// `c(x, a)`, indexed `[x][a]`.
    pub cost: Vec<f64>,
    pub discount: f64,
}

impl MdpModel {
    pub fn transition_row(&self, x: usize, a: usize) -> &[f64] {
        let n = self.states.len();
        let r = x * self.actions.len() + a;
        &self.transition[r * n..(r + 1) * n]
    }

    pub fn cost(&self, x: usize, a: usize) -> f64 {
        self.cost[x * self.actions.len() + a]
    }

    /// Embeds the MDP as an MDPII with a single unobservable state and
    /// `Y = X`; `initial` is the distribution of the (observed) initial state.
    pub fn to_mdpii(&self, initial: &[f64]) -> Result<MdpiiModel> {
        self.check()?;
        let nx = self.states.len();
        let initial = crate::measures::normalize(initial.to_vec(), nx)?;
        let na = self.actions.len();
        let mut transition = Vec::with_capacity(nx * na * nx);
        for x in 0..nx {
            for a in 0..na {
                transition.extend_from_slice(self.transition_row(x, a));
            }
        }
        Ok(MdpiiModel {
            states: Arc::new(FiniteSpace::new(["*"])?),
            observations: self.states.clone(),
            actions: self.actions.clone(),
            transition,
            initial_obs: initial,
            cost: self.cost.clone(),
            discount: self.discount,
        })
    }
}

impl Validate for MdpModel {
    fn validate(&self) -> Vec<Violation> {
        let (nx, na) = (self.states.len(), self.actions.len());
        let mut out = Vec::new();
        check_kernel("transition", &self.transition, nx * na, nx, |r| {
            format!("x={},a={}", self.states.label(r / na), self.actions.label(r % na))
        }, &mut out);
        check_costs(&self.cost, nx * na, |k| {
            format!("x={},a={}", self.states.label(k / na), self.actions.label(k % na))
        }, &mut out);
        check_discount(self.discount, &mut out);
        out
    }
}

/// `P(w', y' | w, a) = P1(w' | w, a) · Q1(y' | w, a)`.
pub fn platzman_from_pomdp1(spec: &Pomdp1Spec) -> Result<PlatzmanModel> {
    spec.check()?;
    let (nw, ny, na) = (spec.states.len(), spec.observations.len(), spec.actions.len());
    let mut transition = Vec::with_capacity(nw * na * nw * ny);
    for w in 0..nw {
        for a in 0..na {
            let p1 = &spec.state_transition[(w * na + a) * nw..(w * na + a + 1) * nw];
            let q1 = &spec.observation[(w * na + a) * ny..(w * na + a + 1) * ny];
            for &pw in p1 {
                transition.extend(q1.iter().map(|&qy| pw * qy));
            }
        }
    }
    Ok(PlatzmanModel {
        states: spec.states.clone(),
        observations: spec.observations.clone(),
        actions: spec.actions.clone(),
        transition,
        initial_obs: spec.initial_obs.clone(),
        cost: spec.cost.clone(),
        discount: spec.discount,
    })
}

/// `P(w', y' | w, a) = P2(w' | w, a) · Q2(y' | a, w')`.
pub fn platzman_from_pomdp2(spec: &Pomdp2Spec) -> Result<PlatzmanModel> {
    spec.check()?;
    let (nw, ny, na) = (spec.states.len(), spec.observations.len(), spec.actions.len());
    let mut transition = Vec::with_capacity(nw * na * nw * ny);
    for w in 0..nw {
        for a in 0..na {
            let p2 = &spec.state_transition[(w * na + a) * nw..(w * na + a + 1) * nw];
            for (w2, &pw) in p2.iter().enumerate() {
                let q2 = &spec.observation[(a * nw + w2) * ny..(a * nw + w2 + 1) * ny];
                transition.extend(q2.iter().map(|&qy| pw * qy));
            }
        }
    }
    Ok(PlatzmanModel {
        states: spec.states.clone(),
        observations: spec.observations.clone(),
        actions: spec.actions.clone(),
        transition,
        initial_obs: spec.initial_obs.clone(),
        cost: spec.cost.clone(),
        discount: spec.discount,
    })
}

/// Embeds a Platzman model as an MDPII by repeating its kernel for every `y`.
pub fn mdpii_from_platzman(model: &PlatzmanModel) -> MdpiiModel {
    let (nw, ny, na) = (model.num_states(), model.num_observations(), model.num_actions());
    let mut transition = Vec::with_capacity(nw * ny * na * nw * ny);
    for w in 0..nw {
        for _y in 0..ny {
            for a in 0..na {
                transition.extend_from_slice(model.transition_row(w, a));
            }
        }
    }
    MdpiiModel {
        states: model.states.clone(),
        observations: model.observations.clone(),
        actions: model.actions.clone(),
        transition,
        initial_obs: model.initial_obs.clone(),
        cost: model.cost.clone(),
        discount: model.discount,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    fn space(n: usize) -> Arc<FiniteSpace> {
        Arc::new(FiniteSpace::indexed(n).unwrap())
    }

    fn pomdp1(p1: Vec<f64>, q1: Vec<f64>) -> Pomdp1Spec {
        Pomdp1Spec {
            states: space(2),
            observations: space(2),
            actions: space(1),
            state_transition: p1,
            observation: q1,
            initial_obs: vec![0.5, 0.5, 0.5, 0.5],
            cost: vec![1.0; 4],
            discount: 0.9,
        }
    }

    #[test]
    fn well_formed_model_has_no_violations() {
        let m = instances::tiger(0.85);
        assert!(m.validate().is_empty());
        assert!(mdpii_from_platzman(&m).validate().is_empty());
    }

    #[test]
    fn reports_bad_row_and_negative_cost() {
        let mut m = mdpii_from_platzman(&instances::tiger(0.85));
        let width = m.num_states() * m.num_observations();
        // row (w=1, y=0, a=2): scale one entry so the row sums to 0.9
        let (w, y, a) = (1, 0, 2);
        let r = (w * m.num_observations() + y) * m.num_actions() + a;
        let row = &mut m.transition[r * width..(r + 1) * width];
        let k = row.iter().position(|&v| v >= 0.1).unwrap();
        row[k] -= 0.1;
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Normalization);
        assert!(v[0].location.contains("w=R") && v[0].location.contains("y=hear-left") && v[0].location.contains("a=open-right"), "{}", v[0]);

        let mut m = mdpii_from_platzman(&instances::tiger(0.85));
        m.cost[3] = -1.0;
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Negative);
    }

    #[test]
    fn pomdp1_product_examples() {
        // deterministic P1 to w*=1, Q1 to y*=0
        let m = platzman_from_pomdp1(&pomdp1(vec![0.0, 1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0, 0.0])).unwrap();
        assert_eq!(m.transition_row(0, 0), &[0.0, 0.0, 1.0, 0.0]);
        // uniform Q1
        let m = platzman_from_pomdp1(&pomdp1(vec![0.7, 0.3, 0.2, 0.8], vec![0.5, 0.5, 0.5, 0.5])).unwrap();
        assert_eq!(m.transition_row(1, 0), &[0.1, 0.1, 0.4, 0.4]);
        // outer product
        let m = platzman_from_pomdp1(&pomdp1(vec![0.7, 0.3, 0.7, 0.3], vec![0.4, 0.6, 0.4, 0.6])).unwrap();
        let expected = [0.28, 0.42, 0.12, 0.18];
        for (a, b) in m.transition_row(0, 0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(m.validate().is_empty());
    }

    #[test]
    fn pomdp2_examples() {
        let spec = |p2: Vec<f64>, q2: Vec<f64>| Pomdp2Spec {
            states: space(2),
            observations: space(2),
            actions: space(1),
            state_transition: p2,
            observation: q2,
            initial_obs: vec![1.0, 0.0, 0.0, 1.0],
            cost: vec![0.0; 4],
            discount: 1.0,
        };
        // perfect observation of the next state
        let m = platzman_from_pomdp2(&spec(vec![0.5, 0.5, 0.2, 0.8], vec![1.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(m.transition_row(0, 0), &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(m.transition_row(1, 0), &[0.2, 0.0, 0.0, 0.8]);
        // deterministic P2 to w*=1
        let m = platzman_from_pomdp2(&spec(vec![0.0, 1.0, 0.0, 1.0], vec![0.3, 0.7, 0.9, 0.1])).unwrap();
        assert_eq!(m.transition_row(0, 0), &[0.0, 0.0, 0.9, 0.1]);
    }

    #[test]
    fn invalid_spec_is_rejected_with_violations() {
        let err = platzman_from_pomdp1(&pomdp1(vec![0.7, 0.2, 0.5, 0.5], vec![0.5, 0.5, 0.5, 0.5]));
        match err {
            Err(Error::Invalid(v)) => assert_eq!(v.len(), 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn platzman_embedding_round_trip() {
        let m = instances::tiger(0.8);
        let e = mdpii_from_platzman(&m);
        for w in 0..2 {
            for a in 0..3 {
                assert_eq!(e.transition_row(w, 0, a), e.transition_row(w, 1, a));
            }
        }
        assert_eq!(PlatzmanModel::from_mdpii(&e).unwrap(), m);
        let mut e2 = e.clone();
        e2.transition.swap(0, 1);
        assert!(PlatzmanModel::from_mdpii(&e2).is_none());
    }

    #[test]
    fn single_observation_embedding_is_reindexing() {
        let m = PlatzmanModel {
            states: space(2),
            observations: space(1),
            actions: space(2),
            transition: vec![0.5, 0.5, 1.0, 0.0, 0.1, 0.9, 0.0, 1.0],
            initial_obs: vec![1.0, 1.0],
            cost: vec![1.0, 2.0, 3.0, 4.0],
            discount: 0.5,
        };
        let e = mdpii_from_platzman(&m);
        assert_eq!(e.transition, m.transition);
    }

    #[test]
    fn pomdp_marginals_are_exact() {
        let spec = pomdp1(vec![0.7, 0.3, 0.15, 0.85], vec![0.35, 0.65, 0.9, 0.1]);
        let m = platzman_from_pomdp1(&spec).unwrap();
        for w in 0..2 {
            let row = m.transition_row(w, 0);
            for w2 in 0..2 {
                let mw: f64 = row[w2 * 2] + row[w2 * 2 + 1];
                assert!((mw - spec.state_transition[w * 2 + w2]).abs() < 1e-15);
            }
            for y in 0..2 {
                let my: f64 = row[y] + row[2 + y];
                assert!((my - spec.observation[w * 2 + y]).abs() < 1e-15);
            }
        }
    }
}
