use std::fmt;
use std::sync::Arc;

use super::moduli::{default_f_basis, suf_modulus_basis, TestFunction};
use super::{KernelFamily, ModulusReport, SequenceSpec, SuiteReport};
use crate::error::{Error, Result};
use crate::measures::{kr_distance, signed_extremes, Dist, FiniteSpace};
use crate::models::{PlatzmanModel, Validate};
use crate::reduction::{joint_next_platzman, posterior_platzman, qhat, Belief};

pub type ModelEvaluator = dyn Fn(f64) -> Result<PlatzmanModel> + Send + Sync;

/// `θ ↦` Platzman model over fixed state, observation and action spaces.
#[derive(Clone)]
pub struct BeliefKernelFamily {
    pub name: String,
    pub domain: (f64, f64),
    evaluator: Arc<ModelEvaluator>,
}

impl fmt::Debug for BeliefKernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BeliefKernelFamily")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .finish()
    }
}

impl BeliefKernelFamily {
    pub fn new(
        name: impl Into<String>,
        domain: (f64, f64),
        evaluator: impl Fn(f64) -> Result<PlatzmanModel> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            evaluator: Arc::new(evaluator),
        }
    }

    pub fn model(&self, theta: f64) -> Result<PlatzmanModel> {
        if !(self.domain.0..=self.domain.1).contains(&theta) {
            return Err(Error::InvalidArgument(format!(
                "parameter {theta} outside {:?} for family {}",
                self.domain, self.name
            )));
        }
        let m = (self.evaluator)(theta)?;
        m.check()?;
        Ok(m)
    }

    /// `θ ↦ P(·, · | w, a; θ)` as a kernel family on `W × Y`.
    pub fn transition_family(&self, w: usize, a: usize) -> Result<KernelFamily> {
        let probe = self.model(self.domain.0)?;
        let this = self.clone();
        KernelFamily::new(
            format!("{}:P(.|w={},a={})", self.name, probe.states.label(w), probe.actions.label(a)),
            probe.states.clone(),
            probe.observations.clone(),
            self.domain,
            move |th| Ok(this.model(th)?.transition_row(w, a).to_vec()),
        )
    }
}

fn same_spaces(a: &PlatzmanModel, b: &PlatzmanModel) -> Result<()> {
    if a.states.labels() != b.states.labels()
        || a.observations.labels() != b.observations.labels()
        || a.actions.labels() != b.actions.labels()
    {
        return Err(Error::SpaceMismatch("family members use different spaces".into()));
    }
    Ok(())
}

/// Posterior and observation probability per next observation; `None` where
/// the observation has probability zero.
fn branches(model: &PlatzmanModel, z: &Belief, a: usize) -> Result<Vec<Option<(Belief, f64)>>> {
    let m = joint_next_platzman(model, z, a)?.observation_marginal();
    (0..model.num_observations())
        .map(|y| {
            if m[y] > 0.0 {
                Ok(Some((posterior_platzman(model, z, a, y)?.belief, m[y])))
            } else {
                Ok(None)
            }
        })
        .collect()
}

fn kr_beliefs(a: &Belief, b: &Belief) -> Result<f64> {
    kr_distance(a.dist(), b.dist())
}

/// KR distance between two finitely supported measures on `P(W)`, with the
/// KR metric of `W` on the beliefs.
fn kr_on_beliefs(mu: &[(Belief, f64)], nu: &[(Belief, f64)]) -> Result<f64> {
    let mut support: Vec<Belief> = Vec::new();
    for (b, _) in mu.iter().chain(nu) {
        if !support.iter().any(|s| s == b) {
            support.push(b.clone());
        }
    }
    let k = support.len();
    let mut metric = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            let d = kr_beliefs(&support[i], &support[j])?;
            metric[i * k + j] = d;
            metric[j * k + i] = d;
        }
    }
    let space = Arc::new(FiniteSpace::indexed(k)?.with_metric(metric)?);
    let weights = |m: &[(Belief, f64)]| {
        let mut w = vec![0.0; k];
        for (b, p) in m {
            w[support.iter().position(|s| s == b).expect("in support")] += p;
        }
        w
    };
    kr_distance(&Dist::new(space.clone(), weights(mu))?, &Dist::new(space, weights(nu))?)
}

/// Compares continuity of the transition kernel with continuity of the
/// induced belief kernel at `(z, a)`.
///
/// Reports:
/// - `transition_suf`: semi-uniform Feller modulus of `P(· | w, a; θ)` for
///   every `w`, over the exhaustive sign basis on `W`.
/// - `belief_suf`: the same modulus for the belief kernel, with test
///   functions `f(z') = min(1, KR(z', r))` for references `r` among the point
///   masses, `z`, and the posteriors at the limit parameter.
/// - `belief_kr` (informational): KR distance between `q̂(· | z, a; θ_n)` and
///   `q̂(· | z, a; θ)` on `P(W)`.
///
/// The suite passes when the first two vanish together or fail together.
pub fn belief_kernel_comodulus(
    fam: &BeliefKernelFamily,
    z: &Belief,
    a: usize,
    seq: &SequenceSpec,
    threshold: f64,
) -> Result<SuiteReport> {
    let base = fam.model(seq.target)?;
    let points = seq.points()?;
    let models = points
        .iter()
        .map(|&(_, th)| {
            let m = fam.model(th)?;
            same_spaces(&base, &m)?;
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    if a >= base.num_actions() {
        return Err(Error::IndexOutOfRange {
            what: "action",
            index: a,
            size: base.num_actions(),
        });
    }

    let mut transition = ModulusReport::new("transition_suf", seq.indices.clone(), threshold);
    let basis: Vec<TestFunction> = default_f_basis(&base.states);
    for w in 0..base.num_states() {
        let r = suf_modulus_basis(&fam.transition_family(w, a)?, &basis, seq, threshold)?;
        for e in r.entries {
            transition.push(e.n, format!("w={},{}", base.states.label(w), e.test_object_id), e.value);
        }
    }

    let limit = branches(&base, z, a)?;
    let mut refs: Vec<(String, Belief)> = (0..base.num_states())
        .map(|w| Ok((format!("ref=delta:{}", base.states.label(w)), Belief::point_mass(base.states.clone(), w)?)))
        .collect::<Result<_>>()?;
    refs.push(("ref=z".into(), z.clone()));
    for (y, b) in limit.iter().enumerate() {
        if let Some((h, _)) = b {
            if !refs.iter().any(|(_, r)| r.key() == h.key()) {
                refs.push((format!("ref=posterior:{}", base.observations.label(y)), h.clone()));
            }
        }
    }
    let test = |h: &Belief, r: &Belief| -> Result<f64> { Ok(kr_beliefs(h, r)?.min(1.0)) };
    let limit_terms: Vec<Vec<f64>> = refs
        .iter()
        .map(|(_, r)| {
            limit
                .iter()
                .map(|b| match b {
                    Some((h, m)) => Ok(test(h, r)? * m),
                    None => Ok(0.0),
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut belief = ModulusReport::new("belief_suf", seq.indices.clone(), threshold);
    let mut gap = ModulusReport::new("belief_kr", seq.indices.clone(), threshold);
    let qhat_limit: Vec<(Belief, f64)> = qhat(&base, z, a)?;
    for ((n, _), m) in points.iter().zip(&models) {
        let br = branches(m, z, a)?;
        for ((id, r), lim) in refs.iter().zip(&limit_terms) {
            let diff = br
                .iter()
                .zip(lim)
                .map(|(b, l)| match b {
                    Some((h, p)) => Ok(test(h, r)? * p - l),
                    None => Ok(-l),
                })
                .collect::<Result<Vec<f64>>>()?;
            belief.push(*n, id.clone(), signed_extremes(&diff).sup_abs());
        }
        gap.push(*n, "q-hat", kr_on_beliefs(&qhat(m, z, a)?, &qhat_limit)?);
    }
    Ok(SuiteReport {
        reports: vec![transition, belief, gap],
        informational: vec!["belief_kr".into()],
    })
}

