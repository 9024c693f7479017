//! Continuity moduli of parametrized kernel families on finite spaces.
//!
//! A family `θ ↦ Ψ(·, · | θ)` on `S1 × S2` is probed along a sequence
//! `θ_n → θ`. Every modulus is an exact finite supremum: over `B ⊆ S2` the
//! extremal sets are the positive or negative parts of a difference vector.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::{FiniteSpace, NORMALIZATION_TOL};
use crate::reduction::csv_err;

mod belief;
pub mod families;
mod mixture;
mod moduli;

pub use belief::{belief_kernel_comodulus, BeliefKernelFamily};
pub use mixture::{mixture_preservation_check, MixtureFamily};
pub use moduli::{
    boundary_modulus, closed_set_modulus, default_f_basis, default_subsets, equivalence_suite, joint_kr_distances,
    marginal_tv_modulus, suf_modulus, suf_modulus_basis, wtv_modulus, SetFamily, TestFunction,
};

/// Default threshold for the vanishing verdict.
pub const DEFAULT_THRESHOLD: f64 = 1e-2;

/// Roundoff allowed when checking that a series does not increase.
pub const MONOTONE_SLACK: f64 = 1e-14;

pub type KernelEvaluator = dyn Fn(f64) -> Result<Vec<f64>> + Send + Sync;

/// `θ ↦ Ψ(s1, s2 | θ)` as row-major `[s1][s2]` tables on a closed interval.
#[derive(Clone)]
pub struct KernelFamily {
    pub name: String,
    pub s1: Arc<FiniteSpace>,
    pub s2: Arc<FiniteSpace>,
    pub domain: (f64, f64),
    evaluator: Arc<KernelEvaluator>,
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelFamily")
            .field("name", &self.name)
            .field("s1", &self.s1.labels())
            .field("s2", &self.s2.labels())
            .field("domain", &self.domain)
            .finish()
    }
}

impl KernelFamily {
    pub fn new(
        name: impl Into<String>,
        s1: Arc<FiniteSpace>,
        s2: Arc<FiniteSpace>,
        domain: (f64, f64),
        evaluator: impl Fn(f64) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Result<Self> {
        if domain.0.is_nan() || domain.1.is_nan() || domain.0 > domain.1 {
            return Err(Error::InvalidArgument(format!("empty parameter domain {domain:?}")));
        }
        Ok(Self {
            name: name.into(),
            s1,
            s2,
            domain,
            evaluator: Arc::new(evaluator),
        })
    }

    /// `Ψ(· | θ)` checked to be a distribution on `S1 × S2`.
    pub fn evaluate(&self, theta: f64) -> Result<Vec<f64>> {
        if !(self.domain.0..=self.domain.1).contains(&theta) {
            return Err(Error::InvalidArgument(format!(
                "parameter {theta} outside {:?} for family {}",
                self.domain, self.name
            )));
        }
        let t = (self.evaluator)(theta)?;
        let n = self.s1.len() * self.s2.len();
        if t.len() != n {
            return Err(Error::SpaceMismatch(format!("family {} returned {} entries, expected {n}", self.name, t.len())));
        }
        let sum: f64 = t.iter().sum();
        if t.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "family {} at θ = {theta} is not a distribution (total {sum})",
                self.name
            )));
        }
        Ok(t)
    }

    /// `Ψ(· | θ_n) − Ψ(· | θ)` for every index of `seq`, in index order.
    pub fn differences(&self, seq: &SequenceSpec) -> Result<Vec<(u64, Vec<f64>)>> {
        let base = self.evaluate(seq.target)?;
        seq.points()?
            .into_iter()
            .map(|(n, th)| {
                let t = self.evaluate(th)?;
                Ok((n, t.iter().zip(&base).map(|(a, b)| a - b).collect()))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceRule {
    /// `θ + 1/n`.
    Reciprocal,
    /// `θ − 1/n`.
    NegativeReciprocal,
    /// `θ + c/n`.
    Scaled(f64),
}

/// Sequence `θ_n → θ` sampled at the indices `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub target: f64,
    pub rule: SequenceRule,
    pub indices: Vec<u64>,
}

impl SequenceSpec {
    /// `θ + 1/n` for `n ∈ {10, 10², 10³, 10⁴}`.
    pub fn reciprocal(target: f64) -> Self {
        Self {
            target,
            rule: SequenceRule::Reciprocal,
            indices: vec![10, 100, 1_000, 10_000],
        }
    }

    pub fn with_indices(mut self, indices: Vec<u64>) -> Self {
        self.indices = indices;
        self
    }

    pub fn term(&self, n: u64) -> f64 {
        let h = 1.0 / n as f64;
        match self.rule {
            SequenceRule::Reciprocal => self.target + h,
            SequenceRule::NegativeReciprocal => self.target - h,
            SequenceRule::Scaled(c) => self.target + c * h,
        }
    }

    pub fn points(&self) -> Result<Vec<(u64, f64)>> {
        if self.indices.is_empty() || self.indices.contains(&0) {
            return Err(Error::InvalidArgument("sequence needs positive indices".into()));
        }
        Ok(self.indices.iter().map(|&n| (n, self.term(n))).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Vanishing,
    NonVanishing,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Vanishing => "vanishing",
            Verdict::NonVanishing => "non-vanishing",
        })
    }
}

/// `series` vanishes when its last value is below `threshold` and it does
/// not increase over its last three entries.
pub fn verdict(series: &[f64], threshold: f64) -> Verdict {
    let Some(&last) = series.last() else {
        return Verdict::NonVanishing;
    };
    let tail = &series[series.len().saturating_sub(3)..];
    let monotone = tail.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK);
    if last < threshold && monotone {
        Verdict::Vanishing
    } else {
        Verdict::NonVanishing
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulusEntry {
    pub n: u64,
    pub test_object_id: String,
    pub value: f64,
}

/// Values of one modulus per sequence index and test object.
#[derive(Debug, Clone)]
pub struct ModulusReport {
    pub name: String,
    pub indices: Vec<u64>,
    pub entries: Vec<ModulusEntry>,
    pub threshold: f64,
}

impl ModulusReport {
    pub(crate) fn new(name: impl Into<String>, indices: Vec<u64>, threshold: f64) -> Self {
        Self {
            name: name.into(),
            indices,
            entries: Vec::new(),
            threshold,
        }
    }

    pub(crate) fn push(&mut self, n: u64, id: impl Into<String>, value: f64) {
        self.entries.push(ModulusEntry {
            n,
            test_object_id: id.into(),
            value,
        });
    }

    /// Largest `|value|` over test objects, per index.
    pub fn series(&self) -> Vec<f64> {
        self.indices
            .iter()
            .map(|&n| {
                self.entries
                    .iter()
                    .filter(|e| e.n == n)
                    .map(|e| e.value.abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    pub fn values_for(&self, id: &str) -> Vec<f64> {
        self.indices
            .iter()
            .filter_map(|&n| self.entries.iter().find(|e| e.n == n && e.test_object_id == id).map(|e| e.value))
            .collect()
    }

    pub fn verdict(&self) -> Verdict {
        verdict(&self.series(), self.threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agreement {
    AllVanish,
    AllFail,
    Disagree,
}

/// Several moduli judged together. `reports` listed in `informational` are
/// exported but do not enter the agreement.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub reports: Vec<ModulusReport>,
    pub informational: Vec<String>,
}

impl SuiteReport {
    pub fn report(&self, name: &str) -> Option<&ModulusReport> {
        self.reports.iter().find(|r| r.name == name)
    }

    pub fn agreement(&self) -> Agreement {
        let vs: Vec<Verdict> = self
            .reports
            .iter()
            .filter(|r| !self.informational.contains(&r.name))
            .map(ModulusReport::verdict)
            .collect();
        if vs.iter().all(|&v| v == Verdict::Vanishing) {
            Agreement::AllVanish
        } else if vs.iter().all(|&v| v == Verdict::NonVanishing) {
            Agreement::AllFail
        } else {
            Agreement::Disagree
        }
    }

    pub fn pass(&self) -> bool {
        self.agreement() != Agreement::Disagree
    }

    /// Columns: `n,modulus_name,test_object_id,value,verdict`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_reports_csv(out, &self.reports)
    }
}

pub fn write_reports_csv<W: Write>(out: W, reports: &[ModulusReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "modulus_name", "test_object_id", "value", "verdict"]).map_err(csv_err)?;
    for r in reports {
        let v = r.verdict().to_string();
        for e in &r.entries {
            w.write_record([e.n.to_string(), r.name.clone(), e.test_object_id.clone(), e.value.to_string(), v.clone()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
