//! JSON family specifications for the continuity diagnostics.
//!
//! ```json
//! {
//!   "target": 0.0, "indices": [10, 100, 1000, 10000], "threshold": 0.01,
//!   "rule": "reciprocal",
//!   "kernel": {"kind": "affine", "s1": ["a", "b"], "s2": ["x", "y"],
//!              "base": [[0.25, 0.25], [0.25, 0.25]],
//!              "slope": [[0.1, -0.1], [0.0, 0.0]], "domain": [0, 1]}
//! }
//! ```
//!
//! `rule` is `"reciprocal"`, `"negative-reciprocal"` or `{"scaled": c}`.
//! Kernels are `affine`, `constant` (`table`), `jump` (`below`, `above`,
//! `at`) or `point-mass` (`s1`, `s1_star`, `grid`). Spaces without a metric
//! get the discrete one.
//!
//! The `belief` suite reads `model_family`, `belief` and `action`. A model
//! family is `{"kind": "smooth-pomdp1"}`, `{"kind": "separated-posterior"}`
//! or `{"kind": "interpolate", "from": model, "to": model}`, the convex
//! combination `(1 − θ)·from + θ·to` on `[0, 1]` of two model documents.
//!
//! The `mixture` suite reads `mixture: {"s3": [...], "components": [kernel, ...]}`
//! with one kernel per `s3` point, plus `limit` and `terms` (one mixing
//! distribution per index).

use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value;

use super::format::{flatten, model_from_value, space, SpaceDoc};
use crate::diagnostics::families::{affine, constant, jump, separated_posterior, shifting_point_mass, smooth_pomdp1};
use crate::diagnostics::{default_f_basis, default_subsets, equivalence_suite};
use crate::diagnostics::{
    belief_kernel_comodulus, mixture_preservation_check, BeliefKernelFamily, KernelFamily, MixtureFamily,
    SequenceRule, SequenceSpec, SuiteReport, DEFAULT_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::measures::{Dist, FiniteSpace};
use crate::models::PlatzmanModel;
use crate::reduction::Belief;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticSuite {
    Equivalence,
    Belief,
    Mixture,
}

impl FromStr for DiagnosticSuite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equivalence" => Ok(Self::Equivalence),
            "belief" => Ok(Self::Belief),
            "mixture" => Ok(Self::Mixture),
            other => Err(Error::InvalidArgument(format!(
                "unknown suite {other:?}; expected equivalence, belief or mixture"
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RuleDoc {
    Named(String),
    Scaled { scaled: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureDoc {
    s3: SpaceDoc,
    components: Vec<Value>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    #[serde(default)]
    target: f64,
    #[serde(default)]
    rule: Option<RuleDoc>,
    #[serde(default)]
    indices: Option<Vec<u64>>,
    #[serde(default)]
    threshold: Option<f64>,
    #[serde(default)]
    kernel: Option<Value>,
    #[serde(default)]
    model_family: Option<Value>,
    #[serde(default)]
    belief: Option<Vec<f64>>,
    #[serde(default)]
    action: Option<String>,
    #[serde(default)]
    mixture: Option<MixtureDoc>,
    #[serde(default)]
    limit: Option<Vec<f64>>,
    #[serde(default)]
    terms: Option<Vec<Vec<f64>>>,
}

/// A parsed family-spec file; sections are checked when a suite runs.
#[derive(Debug, Clone)]
pub struct FamilySpec {
    pub sequence: SequenceSpec,
    pub threshold: f64,
    doc: SpecDoc,
}

pub fn parse_family_spec(text: &str) -> Result<FamilySpec> {
    let doc: SpecDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let rule = match &doc.rule {
        None => SequenceRule::Reciprocal,
        Some(RuleDoc::Named(s)) if s == "reciprocal" => SequenceRule::Reciprocal,
        Some(RuleDoc::Named(s)) if s == "negative-reciprocal" => SequenceRule::NegativeReciprocal,
        Some(RuleDoc::Named(s)) => return Err(Error::Parse(format!("rule: unknown rule {s:?}"))),
        Some(RuleDoc::Scaled { scaled }) => SequenceRule::Scaled(*scaled),
    };
    let mut sequence = SequenceSpec::reciprocal(doc.target);
    sequence.rule = rule;
    if let Some(ix) = &doc.indices {
        sequence = sequence.with_indices(ix.clone());
    }
    sequence.points().map_err(|e| Error::Parse(format!("indices: {e}")))?;
    Ok(FamilySpec { sequence, threshold: doc.threshold.unwrap_or(DEFAULT_THRESHOLD), doc })
}

pub fn load_family_spec(path: impl AsRef<Path>) -> Result<FamilySpec> {
    parse_family_spec(&std::fs::read_to_string(path.as_ref())?)
}

fn diag_space(doc: &SpaceDoc, field: &str) -> Result<Arc<FiniteSpace>> {
    let s = space(doc, field)?;
    Ok(if s.metric().is_some() { s } else { Arc::new((*s).clone().with_discrete_metric()) })
}

fn field<'a>(v: &'a Value, name: &str, ctx: &str) -> Result<&'a Value> {
    v.get(name).ok_or_else(|| Error::Parse(format!("{ctx}: missing field `{name}`")))
}

fn space_field(v: &Value, name: &str, ctx: &str) -> Result<Arc<FiniteSpace>> {
    let doc: SpaceDoc =
        serde_json::from_value(field(v, name, ctx)?.clone()).map_err(|e| Error::Parse(format!("{ctx}.{name}: {e}")))?;
    diag_space(&doc, &format!("{ctx}.{name}"))
}

fn number(v: &Value, name: &str, ctx: &str) -> Result<f64> {
    field(v, name, ctx)?
        .as_f64()
        .ok_or_else(|| Error::Parse(format!("{ctx}.{name}: expected a number")))
}

/// Builds a kernel family from its JSON object.
pub fn kernel_from_value(v: &Value, ctx: &str) -> Result<KernelFamily> {
    let kind = field(v, "kind", ctx)?
        .as_str()
        .ok_or_else(|| Error::Parse(format!("{ctx}.kind: expected a string")))?;
    let s1 = space_field(v, "s1", ctx)?;
    let table = |name: &str, s2: &FiniteSpace| {
        flatten(field(v, name, ctx)?, &[s1.len(), s2.len()], &format!("{ctx}.{name}"))
    };
    match kind {
        "affine" => {
            let s2 = space_field(v, "s2", ctx)?;
            let d = flatten(field(v, "domain", ctx)?, &[2], &format!("{ctx}.domain"))?;
            affine(ctx, s1.clone(), s2.clone(), table("base", &s2)?, table("slope", &s2)?, (d[0], d[1]))
        }
        "constant" => {
            let s2 = space_field(v, "s2", ctx)?;
            constant(ctx, s1.clone(), s2.clone(), table("table", &s2)?)
        }
        "jump" => {
            let s2 = space_field(v, "s2", ctx)?;
            jump(ctx, s1.clone(), s2.clone(), table("below", &s2)?, table("above", &s2)?, number(v, "at", ctx)?)
        }
        "point-mass" => {
            let star = field(v, "s1_star", ctx)?
                .as_str()
                .ok_or_else(|| Error::Parse(format!("{ctx}.s1_star: expected a label")))?;
            let i = s1
                .index_of(star)
                .ok_or_else(|| Error::Parse(format!("{ctx}.s1_star: unknown label {star:?}")))?;
            let n = field(v, "grid", ctx)?
                .as_u64()
                .ok_or_else(|| Error::Parse(format!("{ctx}.grid: expected a positive integer")))?;
            shifting_point_mass(s1.clone(), i, n as usize)
        }
        other => Err(Error::Parse(format!(
            "{ctx}.kind: unknown kernel {other:?}; expected affine, constant, jump or point-mass"
        ))),
    }
}

fn lerp(a: &[f64], b: &[f64], th: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - th) * x + th * y).collect()
}

fn platzman_field(v: &Value, name: &str) -> Result<PlatzmanModel> {
    let ctx = format!("model_family.{name}");
    model_from_value(field(v, name, "model_family")?.clone(), &ctx)?
        .model
        .to_platzman()?
        .ok_or_else(|| Error::Parse(format!("{ctx}: an MDP has no observation kernel to vary")))
}

fn model_family(v: &Value) -> Result<BeliefKernelFamily> {
    let kind = field(v, "kind", "model_family")?.as_str().unwrap_or_default();
    match kind {
        "smooth-pomdp1" => smooth_pomdp1(),
        "separated-posterior" => separated_posterior(),
        "interpolate" => {
            let from = platzman_field(v, "from")?;
            let to = platzman_field(v, "to")?;
            if from.states.labels() != to.states.labels()
                || from.observations.labels() != to.observations.labels()
                || from.actions.labels() != to.actions.labels()
            {
                return Err(Error::SpaceMismatch("interpolated models must share their spaces".into()));
            }
            Ok(BeliefKernelFamily::new("interpolate", (0.0, 1.0), move |th| {
                Ok(PlatzmanModel {
                    transition: lerp(&from.transition, &to.transition, th),
                    initial_obs: lerp(&from.initial_obs, &to.initial_obs, th),
                    cost: lerp(&from.cost, &to.cost, th),
                    discount: from.discount,
                    ..from.clone()
                })
            }))
        }
        other => Err(Error::Parse(format!(
            "model_family.kind: unknown family {other:?}; expected smooth-pomdp1, separated-posterior or interpolate"
        ))),
    }
}

fn missing(name: &str, suite: &str) -> Error {
    Error::Parse(format!("missing field `{name}` for the {suite} suite"))
}

impl FamilySpec {
    pub fn run(&self, suite: DiagnosticSuite) -> Result<SuiteReport> {
        let (seq, thr) = (&self.sequence, self.threshold);
        match suite {
            DiagnosticSuite::Equivalence => {
                let v = self.doc.kernel.as_ref().ok_or_else(|| missing("kernel", "equivalence"))?;
                let fam = kernel_from_value(v, "kernel")?;
                let sets = default_subsets(&fam.s1);
                equivalence_suite(&fam, &default_f_basis(&fam.s1), &sets, &sets, seq, thr)
            }
            DiagnosticSuite::Belief => {
                let v = self.doc.model_family.as_ref().ok_or_else(|| missing("model_family", "belief"))?;
                let fam = model_family(v)?;
                let m = fam.model(seq.target)?;
                let z = self.doc.belief.clone().ok_or_else(|| missing("belief", "belief"))?;
                let z = Belief::from_weights(m.states.clone(), z)?;
                let a = match &self.doc.action {
                    None => 0,
                    Some(l) => m
                        .actions
                        .index_of(l)
                        .ok_or_else(|| Error::Parse(format!("action: unknown label {l:?}")))?,
                };
                belief_kernel_comodulus(&fam, &z, a, seq, thr)
            }
            DiagnosticSuite::Mixture => {
                let doc = self.doc.mixture.as_ref().ok_or_else(|| missing("mixture", "mixture"))?;
                let s3 = diag_space(&doc.s3, "mixture.s3")?;
                if doc.components.len() != s3.len() {
                    return Err(Error::Parse(format!(
                        "mixture.components: expected {} kernels, found {}",
                        s3.len(),
                        doc.components.len()
                    )));
                }
                let comps = doc
                    .components
                    .iter()
                    .enumerate()
                    .map(|(i, c)| kernel_from_value(c, &format!("mixture.components[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                let (s1, s2) = (comps[0].s1.clone(), comps[0].s2.clone());
                if comps.iter().any(|c| c.s1.labels() != s1.labels() || c.s2.labels() != s2.labels()) {
                    return Err(Error::SpaceMismatch("mixture components must share S1 and S2".into()));
                }
                let domain = comps
                    .iter()
                    .fold((f64::NEG_INFINITY, f64::INFINITY), |d, c| (d.0.max(c.domain.0), d.1.min(c.domain.1)));
                let fam = MixtureFamily::new("mixture", s1, s2, s3.clone(), domain, move |i, th| {
                    comps[i].evaluate(th)
                });
                let limit = self.doc.limit.clone().ok_or_else(|| missing("limit", "mixture"))?;
                let limit = Dist::new(s3.clone(), limit)?;
                let terms = self
                    .doc
                    .terms
                    .as_ref()
                    .ok_or_else(|| missing("terms", "mixture"))?
                    .iter()
                    .map(|t| Dist::new(s3.clone(), t.clone()))
                    .collect::<Result<Vec<_>>>()?;
                mixture_preservation_check(&fam, &limit, &terms, seq, thr)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::Agreement;

    #[test]
    fn affine_spec_vanishes() {
        let spec = parse_family_spec(
            r#"{"kernel": {"kind": "affine", "s1": ["a", "b"], "s2": ["x", "y"],
                "base": [[0.25, 0.25], [0.25, 0.25]], "slope": [[0.1, -0.1], [0.0, 0.0]],
                "domain": [0, 1]}}"#,
        )
        .unwrap();
        assert_eq!(spec.run(DiagnosticSuite::Equivalence).unwrap().agreement(), Agreement::AllVanish);
    }

    #[test]
    fn point_mass_spec_fails() {
        let spec = parse_family_spec(r#"{"target": 0.25, "kernel": {"kind": "point-mass", "s1": ["a"], "s1_star": "a", "grid": 3}}"#)
            .unwrap();
        assert_eq!(spec.run(DiagnosticSuite::Equivalence).unwrap().agreement(), Agreement::AllFail);
    }

    #[test]
    fn missing_section_names_the_field() {
        let spec = parse_family_spec("{}").unwrap();
        let e = spec.run(DiagnosticSuite::Belief).unwrap_err().to_string();
        assert!(e.contains("model_family"), "{e}");
    }
}
