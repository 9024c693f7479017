//! JSON model files.
//!
//! One document per model with a `kind` field. Spaces are label arrays, or
//! objects `{"labels": [...], "metric": [[...]]}`. Kernels are nested arrays
//! in the index order listed per kind:
//!
//! | kind       | kernel fields                                               |
//! |------------|-------------------------------------------------------------|
//! | `mdp`      | `transition[x][a][x']`, `cost[x][a]`, optional `initial[x]` |
//! | `mdpii`    | `transition[w][y][a][w'][y']`                               |
//! | `platzman` | `transition[w][a][w'][y']`                                  |
//! | `pomdp1`   | `state_transition[w][a][w']`, `observation[w][a][y']`       |
//! | `pomdp2`   | `state_transition[w][a][w']`, `observation[a][w'][y']`      |
//!
//! All kinds but `mdp` also take `initial_observation[w][y]` and
//! `cost[w][y][a]` (or `cost[w][a]` when the cost ignores `y`). Every kind
//! takes `discount` and an optional `prior[w]`.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::measures::FiniteSpace;
use crate::models::{
    mdpii_from_platzman, platzman_from_pomdp1, platzman_from_pomdp2, MdpModel, MdpiiModel, PlatzmanModel,
    Pomdp1Spec, Pomdp2Spec, Validate,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum SpaceDoc {
    Labels(Vec<String>),
    WithMetric { labels: Vec<String>, metric: Option<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    kind: String,
    states: SpaceDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observations: Option<SpaceDoc>,
    actions: SpaceDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transition: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_transition: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observation: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_observation: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<Value>,
    cost: Value,
    discount: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prior: Option<Vec<f64>>,
}

/// A model in the class named by its file.
#[derive(Debug, Clone)]
pub enum Model {
    Mdp { model: MdpModel, initial: Vec<f64> },
    Mdpii(MdpiiModel),
    Platzman(PlatzmanModel),
    Pomdp1(Pomdp1Spec),
    Pomdp2(Pomdp2Spec),
}

#[derive(Debug, Clone)]
pub struct ModelFile {
    pub model: Model,
    /// Prior over the unobservable states, if the file declares one.
    pub prior: Option<Vec<f64>>,
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Mdp { .. } => "mdp",
            Model::Mdpii(_) => "mdpii",
            Model::Platzman(_) => "platzman",
            Model::Pomdp1(_) => "pomdp1",
            Model::Pomdp2(_) => "pomdp2",
        }
    }

    /// Platzman form, when the class has one.
    pub fn to_platzman(&self) -> Result<Option<PlatzmanModel>> {
        Ok(match self {
            Model::Mdp { .. } => None,
            Model::Mdpii(m) => PlatzmanModel::from_mdpii(m),
            Model::Platzman(m) => Some(m.clone()),
            Model::Pomdp1(s) => Some(platzman_from_pomdp1(s)?),
            Model::Pomdp2(s) => Some(platzman_from_pomdp2(s)?),
        })
    }

    pub fn to_mdpii(&self) -> Result<MdpiiModel> {
        match self {
            Model::Mdp { model, initial } => model.to_mdpii(initial),
            Model::Mdpii(m) => Ok(m.clone()),
            other => Ok(mdpii_from_platzman(&other.to_platzman()?.expect("observation model"))),
        }
    }

    pub fn validate(&self) -> Vec<crate::models::Violation> {
        match self {
            Model::Mdp { model, .. } => model.validate(),
            Model::Mdpii(m) => m.validate(),
            Model::Platzman(m) => m.validate(),
            Model::Pomdp1(s) => s.validate(),
            Model::Pomdp2(s) => s.validate(),
        }
    }
}

impl ModelFile {
    /// The declared prior, else uniform. For an MDP the only state is `*`.
    pub fn prior_or_uniform(&self, num_states: usize) -> Vec<f64> {
        self.prior
            .clone()
            .unwrap_or_else(|| vec![1.0 / num_states as f64; num_states])
    }
}

pub(crate) fn space(doc: &SpaceDoc, field: &str) -> Result<Arc<FiniteSpace>> {
    let err = |e: Error| Error::Parse(format!("{field}: {e}"));
    let s = match doc {
        SpaceDoc::Labels(l) => FiniteSpace::new(l.clone()).map_err(err)?,
        SpaceDoc::WithMetric { labels, metric } => {
            let s = FiniteSpace::new(labels.clone()).map_err(err)?;
            match metric {
                Some(rows) => {
                    let n = labels.len();
                    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                        return Err(Error::Parse(format!("{field}.metric must be {n}×{n}")));
                    }
                    s.with_metric(rows.concat()).map_err(err)?
                }
                None => s,
            }
        }
    };
    Ok(Arc::new(s))
}

/// Flattens a nested array of the given shape, naming the offending path.
pub(crate) fn flatten(v: &Value, shape: &[usize], field: &str) -> Result<Vec<f64>> {
    fn go(v: &Value, shape: &[usize], path: &mut String, out: &mut Vec<f64>) -> Result<()> {
        match shape.split_first() {
            None => match v.as_f64() {
                Some(x) => {
                    out.push(x);
                    Ok(())
                }
                None => Err(Error::Parse(format!("{path}: expected a number, found {v}"))),
            },
            Some((&n, rest)) => {
                let arr = v
                    .as_array()
                    .ok_or_else(|| Error::Parse(format!("{path}: expected an array of {n} entries")))?;
                if arr.len() != n {
                    return Err(Error::Parse(format!("{path}: expected {n} entries, found {}", arr.len())));
                }
                for (i, x) in arr.iter().enumerate() {
                    let len = path.len();
                    path.push_str(&format!("[{i}]"));
                    go(x, rest, path, out)?;
                    path.truncate(len);
                }
                Ok(())
            }
        }
    }
    let mut out = Vec::with_capacity(shape.iter().product());
    go(v, shape, &mut field.to_string(), &mut out)?;
    Ok(out)
}

fn depth(v: &Value) -> usize {
    match v {
        Value::Array(a) => 1 + a.first().map_or(0, depth),
        _ => 0,
    }
}

fn required<'a>(v: &'a Option<Value>, field: &str, kind: &str) -> Result<&'a Value> {
    v.as_ref()
        .ok_or_else(|| Error::Parse(format!("missing field `{field}` for kind {kind:?}")))
}

/// `cost[w][y][a]`, or `cost[w][a]` repeated over `y`.
fn observation_cost(v: &Value, nw: usize, ny: usize, na: usize) -> Result<Vec<f64>> {
    if depth(v) == 2 {
        let c = flatten(v, &[nw, na], "cost")?;
        Ok(crate::instances::expand_cost(&c, nw, ny, na))
    } else {
        flatten(v, &[nw, ny, na], "cost")
    }
}

fn parse_doc(doc: ModelDoc) -> Result<ModelFile> {
    let kind = doc.kind.as_str();
    let states = space(&doc.states, "states")?;
    let actions = space(&doc.actions, "actions")?;
    let (nw, na) = (states.len(), actions.len());
    let observations = match (&doc.observations, kind) {
        (None, "mdp") => None,
        (Some(o), _) => Some(space(o, "observations")?),
        (None, _) => return Err(Error::Parse(format!("missing field `observations` for kind {kind:?}"))),
    };
    let obs = || observations.clone().expect("checked");
    let ny = observations.as_ref().map_or(0, |o| o.len());
    let p0 = |doc: &ModelDoc| flatten(required(&doc.initial_observation, "initial_observation", kind)?, &[nw, ny], "initial_observation");
    let model = match kind {
        "mdp" => {
            let initial = match &doc.initial {
                Some(v) => flatten(v, &[nw], "initial")?,
                None => vec![1.0 / nw as f64; nw],
            };
            Model::Mdp {
                model: MdpModel {
                    states: states.clone(),
                    actions,
                    transition: flatten(required(&doc.transition, "transition", kind)?, &[nw, na, nw], "transition")?,
                    cost: flatten(&doc.cost, &[nw, na], "cost")?,
                    discount: doc.discount,
                },
                initial,
            }
        }
        "mdpii" => Model::Mdpii(MdpiiModel {
            states: states.clone(),
            observations: obs(),
            actions,
            transition: flatten(required(&doc.transition, "transition", kind)?, &[nw, ny, na, nw, ny], "transition")?,
            initial_obs: p0(&doc)?,
            cost: observation_cost(&doc.cost, nw, ny, na)?,
            discount: doc.discount,
        }),
        "platzman" => Model::Platzman(PlatzmanModel {
            states: states.clone(),
            observations: obs(),
            actions,
            transition: flatten(required(&doc.transition, "transition", kind)?, &[nw, na, nw, ny], "transition")?,
            initial_obs: p0(&doc)?,
            cost: observation_cost(&doc.cost, nw, ny, na)?,
            discount: doc.discount,
        }),
        "pomdp1" => Model::Pomdp1(Pomdp1Spec {
            states: states.clone(),
            observations: obs(),
            actions,
            state_transition: flatten(required(&doc.state_transition, "state_transition", kind)?, &[nw, na, nw], "state_transition")?,
            observation: flatten(required(&doc.observation, "observation", kind)?, &[nw, na, ny], "observation")?,
            initial_obs: p0(&doc)?,
            cost: observation_cost(&doc.cost, nw, ny, na)?,
            discount: doc.discount,
        }),
        "pomdp2" => Model::Pomdp2(Pomdp2Spec {
            states: states.clone(),
            observations: obs(),
            actions,
            state_transition: flatten(required(&doc.state_transition, "state_transition", kind)?, &[nw, na, nw], "state_transition")?,
            observation: flatten(required(&doc.observation, "observation", kind)?, &[na, nw, ny], "observation")?,
            initial_obs: p0(&doc)?,
            cost: observation_cost(&doc.cost, nw, ny, na)?,
            discount: doc.discount,
        }),
        other => {
            return Err(Error::Parse(format!(
                "unknown kind {other:?}; expected mdp, mdpii, platzman, pomdp1 or pomdp2"
            )))
        }
    };
    if let Some(p) = &doc.prior {
        if p.len() != nw {
            return Err(Error::Parse(format!("prior: expected {nw} entries, found {}", p.len())));
        }
    }
    Ok(ModelFile { model, prior: doc.prior })
}

/// Parses without validating kernel contents.
pub fn parse_model(text: &str) -> Result<ModelFile> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    parse_doc(doc)
}

/// Parses and validates a model document embedded in another file.
pub(crate) fn model_from_value(v: Value, field: &str) -> Result<ModelFile> {
    let doc: ModelDoc = serde_json::from_value(v).map_err(|e| Error::Parse(format!("{field}: {e}")))?;
    let file = parse_doc(doc)?;
    let v = file.model.validate();
    if !v.is_empty() {
        return Err(Error::Invalid(v));
    }
    Ok(file)
}

/// Parses and validates; violations are returned as [`Error::Invalid`].
pub fn load_model_str(text: &str) -> Result<ModelFile> {
    let file = parse_model(text)?;
    let v = file.model.validate();
    if !v.is_empty() {
        return Err(Error::Invalid(v));
    }
    if let Some(p) = &file.prior {
        crate::measures::normalize(p.clone(), p.len())
            .map_err(|e| Error::Parse(format!("prior: {e}")))?;
    }
    Ok(file)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path.as_ref())?;
    load_model_str(&text)
}

fn space_doc(s: &FiniteSpace) -> SpaceDoc {
    match s.metric() {
        None => SpaceDoc::Labels(s.labels().to_vec()),
        Some(m) => SpaceDoc::WithMetric {
            labels: s.labels().to_vec(),
            metric: Some(m.chunks(s.len()).map(<[f64]>::to_vec).collect()),
        },
    }
}

fn nest(flat: &[f64], shape: &[usize]) -> Value {
    match shape.split_first() {
        None => Value::from(flat[0]),
        Some((&n, rest)) => {
            let stride: usize = rest.iter().product();
            Value::Array((0..n).map(|i| nest(&flat[i * stride..(i + 1) * stride], rest)).collect())
        }
    }
}

/// Serializes an MDPII as a `mdpii` document.
pub fn mdpii_to_json(m: &MdpiiModel, prior: Option<&[f64]>) -> String {
    let (nw, ny, na) = (m.num_states(), m.num_observations(), m.num_actions());
    let doc = ModelDoc {
        kind: "mdpii".into(),
        states: space_doc(&m.states),
        observations: Some(space_doc(&m.observations)),
        actions: space_doc(&m.actions),
        transition: Some(nest(&m.transition, &[nw, ny, na, nw, ny])),
        state_transition: None,
        observation: None,
        initial_observation: Some(nest(&m.initial_obs, &[nw, ny])),
        initial: None,
        cost: nest(&m.cost, &[nw, ny, na]),
        discount: m.discount,
        prior: prior.map(<[f64]>::to_vec),
    };
    serde_json::to_string_pretty(&doc).expect("serializable")
}

/// Serializes a Platzman model as a `platzman` document.
pub fn platzman_to_json(m: &PlatzmanModel, prior: Option<&[f64]>) -> String {
    let (nw, ny, na) = (m.num_states(), m.num_observations(), m.num_actions());
    let doc = ModelDoc {
        kind: "platzman".into(),
        states: space_doc(&m.states),
        observations: Some(space_doc(&m.observations)),
        actions: space_doc(&m.actions),
        transition: Some(nest(&m.transition, &[nw, na, nw, ny])),
        state_transition: None,
        observation: None,
        initial_observation: Some(nest(&m.initial_obs, &[nw, ny])),
        initial: None,
        cost: nest(&m.cost, &[nw, ny, na]),
        discount: m.discount,
        prior: prior.map(<[f64]>::to_vec),
    };
    serde_json::to_string_pretty(&doc).expect("serializable")
}
