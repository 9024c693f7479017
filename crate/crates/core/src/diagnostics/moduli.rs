use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{KernelFamily, ModulusReport, SequenceSpec, SuiteReport, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::measures::{kr_distance, signed_extremes, Dist, FiniteSpace};

/// Up to this many points in `S1`, bases and set lists are exhaustive.
pub const EXHAUSTIVE_LIMIT: usize = 12;

const RANDOM_SIGNS: usize = 64;
const BASIS_SEED: u64 = 0x5eed;

/// Bounded test function `f` on `S1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub id: String,
    pub values: Vec<f64>,
}

/// Subset of `S1`, given by indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SetFamily {
    pub id: String,
    pub members: Vec<usize>,
}

impl SetFamily {
    pub fn new(space: &FiniteSpace, members: Vec<usize>) -> Self {
        let labels: Vec<&str> = members.iter().map(|&i| space.label(i)).collect();
        Self {
            id: format!("{{{}}}", labels.join(",")),
            members,
        }
    }

    pub fn complement(&self, space: &FiniteSpace) -> Self {
        Self::new(space, (0..space.len()).filter(|i| !self.members.contains(i)).collect())
    }
}

fn sign_id(signs: &[f64]) -> String {
    signs.iter().map(|&s| if s > 0.0 { '+' } else { '-' }).collect()
}

/// `1_A − 1_{A^c}` for every `A ⊆ S1` when `|S1| ≤ 12`; otherwise 64 seeded
/// random sign vectors plus the coordinate indicators.
pub fn default_f_basis(s1: &FiniteSpace) -> Vec<TestFunction> {
    let n = s1.len();
    if n <= EXHAUSTIVE_LIMIT {
        return (0u32..1 << n)
            .map(|mask| {
                let values: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
                TestFunction {
                    id: format!("f={}", sign_id(&values)),
                    values,
                }
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(BASIS_SEED);
    let mut out: Vec<TestFunction> = (0..RANDOM_SIGNS)
        .map(|k| TestFunction {
            id: format!("random-sign-{k}"),
            values: (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect(),
        })
        .collect();
    out.extend((0..n).map(|i| TestFunction {
        id: format!("indicator={}", s1.label(i)),
        values: (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect(),
    }));
    out
}

/// Every subset of `S1` when `|S1| ≤ 12`; otherwise `∅`, `S1`, singletons and
/// their complements.
pub fn default_subsets(s1: &FiniteSpace) -> Vec<SetFamily> {
    let n = s1.len();
    if n <= EXHAUSTIVE_LIMIT {
        return (0u32..1 << n)
            .map(|mask| SetFamily::new(s1, (0..n).filter(|i| mask >> i & 1 == 1).collect()))
            .collect();
    }
    let mut out = vec![SetFamily::new(s1, vec![]), SetFamily::new(s1, (0..n).collect())];
    for i in 0..n {
        let single = SetFamily::new(s1, vec![i]);
        out.push(single.complement(s1));
        out.push(single);
    }
    out
}

/// `Σ_{s1} f(s1) D(s1, ·)`.
fn integrate(diff: &[f64], f: &[f64], n2: usize) -> Vec<f64> {
    let mut out = vec![0.0; n2];
    for (row, &fv) in diff.chunks(n2).zip(f) {
        if fv != 0.0 {
            for (o, d) in out.iter_mut().zip(row) {
                *o += fv * d;
            }
        }
    }
    out
}

fn restrict(diff: &[f64], members: &[usize], n2: usize) -> Vec<f64> {
    let mut out = vec![0.0; n2];
    for &s1 in members {
        for (o, d) in out.iter_mut().zip(&diff[s1 * n2..(s1 + 1) * n2]) {
            *o += d;
        }
    }
    out
}

fn check_members(fam: &KernelFamily, sets: &[SetFamily]) -> Result<()> {
    let n1 = fam.s1.len();
    for s in sets {
        if let Some(&i) = s.members.iter().find(|&&i| i >= n1) {
            return Err(Error::IndexOutOfRange {
                what: "set member",
                index: i,
                size: n1,
            });
        }
    }
    Ok(())
}

/// `sup_B |Σ_{s2∈B} Σ_{s1} f(s1) (Ψ(s1, s2 | θ_n) − Ψ(s1, s2 | θ))|` for each
/// `f` in `basis`.
pub fn suf_modulus_basis(
    fam: &KernelFamily,
    basis: &[TestFunction],
    seq: &SequenceSpec,
    threshold: f64,
) -> Result<ModulusReport> {
    if basis.is_empty() {
        return Err(Error::InvalidArgument("test-function basis is empty".into()));
    }
    for f in basis {
        if f.values.len() != fam.s1.len() {
            return Err(Error::SpaceMismatch(format!("test function {} has wrong length", f.id)));
        }
        if f.values.iter().any(|v| v.is_nan() || v.abs() > 1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("test function {} exceeds 1 in absolute value", f.id)));
        }
    }
    let n2 = fam.s2.len();
    let mut report = ModulusReport::new("suf", seq.indices.clone(), threshold);
    for (n, diff) in fam.differences(seq)? {
        for f in basis {
            report.push(n, f.id.clone(), signed_extremes(&integrate(&diff, &f.values, n2)).sup_abs());
        }
    }
    Ok(report)
}

pub fn suf_modulus(fam: &KernelFamily, f: &[f64], seq: &SequenceSpec) -> Result<ModulusReport> {
    let tf = TestFunction {
        id: "f".into(),
        values: f.to_vec(),
    };
    suf_modulus_basis(fam, &[tf], seq, DEFAULT_THRESHOLD)
}

fn set_modulus(
    name: &str,
    fam: &KernelFamily,
    sets: &[SetFamily],
    seq: &SequenceSpec,
    threshold: f64,
    reduce: impl Fn(&[f64]) -> f64,
) -> Result<ModulusReport> {
    check_members(fam, sets)?;
    let n2 = fam.s2.len();
    let mut report = ModulusReport::new(name, seq.indices.clone(), threshold);
    for (n, diff) in fam.differences(seq)? {
        for s in sets {
            report.push(n, s.id.clone(), reduce(&restrict(&diff, &s.members, n2)));
        }
    }
    Ok(report)
}

/// `inf_B (Ψ(O×B | θ_n) − Ψ(O×B | θ))`, which is `≤ 0`.
pub(crate) fn wtv_sets(fam: &KernelFamily, sets: &[SetFamily], seq: &SequenceSpec, threshold: f64) -> Result<ModulusReport> {
    set_modulus("wtv", fam, sets, seq, threshold, |d| signed_extremes(d).neg_sum)
}

/// `sup_B (Ψ(C×B | θ_n) − Ψ(C×B | θ))`, which is `≥ 0`.
pub(crate) fn closed_sets(fam: &KernelFamily, sets: &[SetFamily], seq: &SequenceSpec, threshold: f64) -> Result<ModulusReport> {
    set_modulus("closed_set", fam, sets, seq, threshold, |d| signed_extremes(d).pos_sum)
}

/// `sup_B |Ψ(A×B | θ_n) − Ψ(A×B | θ)|`.
pub(crate) fn boundary_sets(fam: &KernelFamily, sets: &[SetFamily], seq: &SequenceSpec, threshold: f64) -> Result<ModulusReport> {
    set_modulus("boundary", fam, sets, seq, threshold, |d| signed_extremes(d).sup_abs())
}

pub fn wtv_modulus(fam: &KernelFamily, open: &[usize], seq: &SequenceSpec) -> Result<ModulusReport> {
    wtv_sets(fam, &[SetFamily::new(&fam.s1, open.to_vec())], seq, DEFAULT_THRESHOLD)
}

pub fn closed_set_modulus(fam: &KernelFamily, closed: &[usize], seq: &SequenceSpec) -> Result<ModulusReport> {
    closed_sets(fam, &[SetFamily::new(&fam.s1, closed.to_vec())], seq, DEFAULT_THRESHOLD)
}

/// Every `A ⊆ S1` has empty boundary in a finite space, so the condition on
/// sets with null boundary runs over all subsets.
pub fn boundary_modulus(fam: &KernelFamily, sets: &[SetFamily], seq: &SequenceSpec) -> Result<ModulusReport> {
    boundary_sets(fam, sets, seq, DEFAULT_THRESHOLD)
}

/// `TV(Ψ(S1, · | θ_n), Ψ(S1, · | θ))`.
pub fn marginal_tv_modulus(fam: &KernelFamily, seq: &SequenceSpec) -> Result<ModulusReport> {
    let n2 = fam.s2.len();
    let all: Vec<usize> = (0..fam.s1.len()).collect();
    let mut report = ModulusReport::new("marginal_tv", seq.indices.clone(), DEFAULT_THRESHOLD);
    for (n, diff) in fam.differences(seq)? {
        let m = restrict(&diff, &all, n2);
        report.push(n, "S1", 0.5 * m.iter().map(|v| v.abs()).sum::<f64>());
    }
    Ok(report)
}

/// Runs the semi-uniform Feller, WTV, closed-set and boundary-set moduli and
/// judges whether they vanish together. The marginal modulus is exported as
/// informational: it is implied by the others but not equivalent to them.
pub fn equivalence_suite(
    fam: &KernelFamily,
    basis: &[TestFunction],
    open_sets: &[SetFamily],
    closed: &[SetFamily],
    seq: &SequenceSpec,
    threshold: f64,
) -> Result<SuiteReport> {
    if basis.is_empty() {
        return Err(Error::InvalidArgument("test-function basis is empty".into()));
    }
    let boundary: Vec<SetFamily> = if fam.s1.len() <= EXHAUSTIVE_LIMIT {
        default_subsets(&fam.s1)
    } else {
        open_sets.iter().chain(closed).cloned().collect()
    };
    let mut marginal = marginal_tv_modulus(fam, seq)?;
    marginal.threshold = threshold;
    Ok(SuiteReport {
        reports: vec![
            suf_modulus_basis(fam, basis, seq, threshold)?,
            wtv_sets(fam, open_sets, seq, threshold)?,
            closed_sets(fam, closed, seq, threshold)?,
            boundary_sets(fam, &boundary, seq, threshold)?,
            marginal,
        ],
        informational: vec!["marginal_tv".into()],
    })
}

/// `S1 × S2` with labels `s1|s2` and the sum metric.
pub(crate) fn product_space(s1: &FiniteSpace, s2: &FiniteSpace) -> Result<FiniteSpace> {
    let (d1, d2) = (s1.metric().ok_or(Error::MissingMetric)?, s2.metric().ok_or(Error::MissingMetric)?);
    let (n1, n2) = (s1.len(), s2.len());
    let labels: Vec<String> = (0..n1 * n2)
        .map(|k| format!("{}|{}", s1.label(k / n2), s2.label(k % n2)))
        .collect();
    let mut metric = vec![0.0; n1 * n1 * n2 * n2];
    for i in 0..n1 * n2 {
        for j in 0..n1 * n2 {
            metric[i * n1 * n2 + j] = d1[(i / n2) * n1 + j / n2] + d2[(i % n2) * n2 + j % n2];
        }
    }
    FiniteSpace::new(labels)?.with_metric(metric)
}

/// KR distance between `Ψ(· | θ_n)` and `Ψ(· | θ)` on `S1 × S2` with the sum
/// of the two metrics.
pub fn joint_kr_distances(fam: &KernelFamily, seq: &SequenceSpec) -> Result<Vec<(u64, f64)>> {
    let space = std::sync::Arc::new(product_space(&fam.s1, &fam.s2)?);
    let base = Dist::new(space.clone(), fam.evaluate(seq.target)?)?;
    let tables = seq
        .points()?
        .into_iter()
        .map(|(n, th)| Ok((n, fam.evaluate(th)?)))
        .collect::<Result<Vec<_>>>()?;
    tables
        .into_par_iter()
        .map(|(n, t)| Ok((n, kr_distance(&Dist::new(space.clone(), t)?, &base)?)))
        .collect()
}
