use std::fmt;
use std::sync::Arc;

use super::moduli::{default_f_basis, suf_modulus_basis};
use super::{KernelFamily, ModulusReport, SequenceSpec, SuiteReport};
use crate::error::{Error, Result};
use crate::measures::{signed_extremes, Dist, FiniteSpace, NORMALIZATION_TOL};

pub type MixtureEvaluator = dyn Fn(usize, f64) -> Result<Vec<f64>> + Send + Sync;

/// Base kernel `Ξ(s1, s2 | s3, s4)` with `s3` in a finite space and `s4` in
/// an interval; mixing over `s3` gives `Ψ̄(· | μ, s4) = Σ_{s3} Ξ(· | s3, s4) μ(s3)`.
#[derive(Clone)]
pub struct MixtureFamily {
    pub name: String,
    pub s1: Arc<FiniteSpace>,
    pub s2: Arc<FiniteSpace>,
    pub s3: Arc<FiniteSpace>,
    pub domain: (f64, f64),
    evaluator: Arc<MixtureEvaluator>,
}

impl fmt::Debug for MixtureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MixtureFamily")
            .field("name", &self.name)
            .field("s3", &self.s3.labels())
            .field("domain", &self.domain)
            .finish()
    }
}

impl MixtureFamily {
    pub fn new(
        name: impl Into<String>,
        s1: Arc<FiniteSpace>,
        s2: Arc<FiniteSpace>,
        s3: Arc<FiniteSpace>,
        domain: (f64, f64),
        evaluator: impl Fn(usize, f64) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            s1,
            s2,
            s3,
            domain,
            evaluator: Arc::new(evaluator),
        }
    }

    /// `θ ↦ Ξ(· | s3, θ)`.
    pub fn base_family(&self, s3: usize) -> Result<KernelFamily> {
        let ev = self.evaluator.clone();
        KernelFamily::new(
            format!("{}[s3={}]", self.name, self.s3.label(s3)),
            self.s1.clone(),
            self.s2.clone(),
            self.domain,
            move |th| ev(s3, th),
        )
    }

    pub fn mixed(&self, mu: &[f64], s4: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.s1.len() * self.s2.len()];
        for (s3, &w) in mu.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let t = self.base_family(s3)?.evaluate(s4)?;
            for (o, v) in out.iter_mut().zip(t) {
                *o += w * v;
            }
        }
        Ok(out)
    }
}

fn check_mixing(fam: &MixtureFamily, d: &Dist) -> Result<()> {
    if d.len() != fam.s3.len() {
        return Err(Error::SpaceMismatch(format!(
            "mixing distribution over {} points, S3 has {}",
            d.len(),
            fam.s3.len()
        )));
    }
    debug_assert!((d.mass(0..d.len()) - 1.0).abs() <= NORMALIZATION_TOL);
    Ok(())
}

/// Semi-uniform Feller moduli of the mixed kernel along `(μ_n, s4_n)` and of
/// the base kernel along `s4_n` at every `s3` charged by `μ` or some `μ_n`.
///
/// `terms[i]` is `μ_n` for `n = seq.indices[i]`; `seq` drives `s4`.
pub fn mixture_preservation_check(
    fam: &MixtureFamily,
    limit: &Dist,
    terms: &[Dist],
    seq: &SequenceSpec,
    threshold: f64,
) -> Result<SuiteReport> {
    check_mixing(fam, limit)?;
    if terms.len() != seq.indices.len() {
        return Err(Error::SpaceMismatch(format!(
            "{} mixing terms for {} sequence indices",
            terms.len(),
            seq.indices.len()
        )));
    }
    for t in terms {
        check_mixing(fam, t)?;
    }
    let basis = default_f_basis(&fam.s1);
    let n2 = fam.s2.len();
    let base_table = fam.mixed(limit.weights(), seq.target)?;
    let mut mixed = ModulusReport::new("mixed_suf", seq.indices.clone(), threshold);
    for ((n, s4), mu) in seq.points()?.into_iter().zip(terms) {
        let t = fam.mixed(mu.weights(), s4)?;
        let diff: Vec<f64> = t.iter().zip(&base_table).map(|(a, b)| a - b).collect();
        for f in &basis {
            let mut g = vec![0.0; n2];
            for (row, &fv) in diff.chunks(n2).zip(&f.values) {
                for (o, d) in g.iter_mut().zip(row) {
                    *o += fv * d;
                }
            }
            mixed.push(n, f.id.clone(), signed_extremes(&g).sup_abs());
        }
    }
    let mut base = ModulusReport::new("base_suf", seq.indices.clone(), threshold);
    let relevant = (0..fam.s3.len())
        .filter(|&s3| limit.weights()[s3] > 0.0 || terms.iter().any(|t| t.weights()[s3] > 0.0));
    for s3 in relevant {
        let r = suf_modulus_basis(&fam.base_family(s3)?, &basis, seq, threshold)?;
        for e in r.entries {
            base.push(e.n, format!("s3={},{}", fam.s3.label(s3), e.test_object_id), e.value);
        }
    }
    Ok(SuiteReport {
        reports: vec![mixed, base],
        informational: vec![],
    })
}
