//! Probability vectors on labelled finite spaces and the distances between them.
//!
//! Total variation is computed exactly as half the L1 distance. The
//! Kantorovich–Rubinshtein distance
//!
//! ```text
//! sup { Σ f(s) (μ(s) − ν(s)) : |f(s) − f(t)| ≤ d(s, t), |f| ≤ 1 }
//! ```
//!
//! is a linear program over the vector `(f(s))_s`. It is solved through its
//! equality-form dual (a flow problem with one row per label) by the bundled
//! simplex in [`crate::lp`]; the optimal `f` is recovered from the simplex
//! multipliers and returned as a certificate.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lp;

/// Renormalization window for distribution constructors.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Largest space accepted by the Kantorovich–Rubinshtein program.
pub const KR_MAX_LABELS: usize = 64;

/// Ordered, distinct labels with an optional metric.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpace {
    labels: Vec<String>,
    metric: Option<Vec<f64>>,
}

impl FiniteSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidSpace("no labels".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidSpace(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self {
            labels,
            metric: None,
        })
    }

    /// Labels `"0"`, `"1"`, ... `"n-1"`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    /// Attaches a row-major `n x n` distance matrix.
    pub fn with_metric(mut self, metric: Vec<f64>) -> Result<Self> {
        let n = self.len();
        if metric.len() != n * n {
            return Err(Error::InvalidSpace(format!(
                "metric has {} entries, expected {}",
                metric.len(),
                n * n
            )));
        }
        for i in 0..n {
            if metric[i * n + i] != 0.0 {
                return Err(Error::InvalidSpace(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let d = metric[i * n + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidSpace(format!("bad distance at ({i},{j})")));
                }
                if (d - metric[j * n + i]).abs() > 1e-12 {
                    return Err(Error::InvalidSpace(format!("asymmetric at ({i},{j})")));
                }
                if i != j && d == 0.0 {
                    return Err(Error::InvalidSpace(format!("zero distance at ({i},{j})")));
                }
                for k in 0..n {
                    if d > metric[i * n + k] + metric[k * n + j] + 1e-12 {
                        return Err(Error::InvalidSpace(format!(
                            "triangle inequality fails for ({i},{k},{j})"
                        )));
                    }
                }
            }
        }
        self.metric = Some(metric);
        Ok(self)
    }

    /// Distance 1 between any two distinct labels.
    pub fn with_discrete_metric(self) -> Self {
        let n = self.len();
        let metric = (0..n * n)
            .map(|k| if k / n == k % n { 0.0 } else { 1.0 })
            .collect();
        Self {
            metric: Some(metric),
            ..self
        }
    }

    /// Points on the real line with `|x - y|` as the distance.
    pub fn on_line(labels: Vec<String>, positions: &[f64]) -> Result<Self> {
        let space = Self::new(labels)?;
        if positions.len() != space.len() {
            return Err(Error::InvalidSpace("one position per label required".into()));
        }
        let n = positions.len();
        let metric = (0..n * n)
            .map(|k| (positions[k / n] - positions[k % n]).abs())
            .collect();
        space.with_metric(metric)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn metric(&self) -> Option<&[f64]> {
        self.metric.as_deref()
    }

    pub fn distance(&self, i: usize, j: usize) -> Option<f64> {
        self.metric.as_ref().map(|m| m[i * self.len() + j])
    }
}

/// A probability vector over a [`FiniteSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dist {
    space: Arc<FiniteSpace>,
    weights: Vec<f64>,
}

impl Dist {
    /// Validates and renormalizes. Sums within [`NORMALIZATION_TOL`] of one are
    /// rescaled; anything further off is rejected.
    pub fn new(space: Arc<FiniteSpace>, weights: Vec<f64>) -> Result<Self> {
        let weights = normalize(weights, space.len())?;
        Ok(Self { space, weights })
    }

    pub fn point_mass(space: Arc<FiniteSpace>, index: usize) -> Result<Self> {
        if index >= space.len() {
            return Err(Error::IndexOutOfRange {
                what: "label",
                index,
                size: space.len(),
            });
        }
        let mut weights = vec![0.0; space.len()];
        weights[index] = 1.0;
        Ok(Self { space, weights })
    }

    pub fn uniform(space: Arc<FiniteSpace>) -> Self {
        let n = space.len();
        Self {
            weights: vec![1.0 / n as f64; n],
            space,
        }
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Mass of a set of label indices.
    pub fn mass(&self, indices: impl IntoIterator<Item = usize>) -> f64 {
        indices.into_iter().map(|i| self.weights[i]).sum()
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, w) in self.weights.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}: {w}", self.space.label(i))?;
        }
        write!(f, ")")
    }
}

/// Checks nonnegativity and renormalizes a raw weight vector.
pub fn normalize(mut weights: Vec<f64>, expected_len: usize) -> Result<Vec<f64>> {
    if weights.len() != expected_len {
        return Err(Error::InvalidDistribution(format!(
            "{} weights for a space of {} labels",
            weights.len(),
            expected_len
        )));
    }
    for (i, w) in weights.iter_mut().enumerate() {
        if !w.is_finite() {
            return Err(Error::InvalidDistribution(format!("weight {i} is not finite")));
        }
        if *w < 0.0 {
            if *w > -1e-15 {
                *w = 0.0;
            } else {
                return Err(Error::InvalidDistribution(format!("weight {i} is negative ({w})")));
            }
        }
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
    }
    if total != 1.0 {
        for w in weights.iter_mut() {
            *w /= total;
        }
    }
    Ok(weights)
}

fn same_space(mu: &Dist, nu: &Dist) -> Result<()> {
    if Arc::ptr_eq(&mu.space, &nu.space) || mu.space == nu.space {
        Ok(())
    } else {
        Err(Error::SpaceMismatch(format!(
            "{} labels vs {} labels",
            mu.space.len(),
            nu.space.len()
        )))
    }
}

/// Half the L1 distance between two weight vectors of equal length.
pub fn tv_weights(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `sup_C |μ(C) − ν(C)|`.
pub fn tv_distance(mu: &Dist, nu: &Dist) -> Result<f64> {
    same_space(mu, nu)?;
    Ok(tv_weights(&mu.weights, &nu.weights))
}

/// Positive and negative parts of a signed vector.
///
/// For a finite second coordinate the extremal sets of `Σ_{i∈B} d_i` are "all
/// positive entries" and "all negative entries".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedExtremes {
    pub pos_sum: f64,
    pub neg_sum: f64,
}

impl SignedExtremes {
    /// `sup_B |Σ_{i∈B} d_i|`.
    pub fn sup_abs(&self) -> f64 {
        self.pos_sum.max(-self.neg_sum)
    }
}

pub fn signed_extremes(diff: &[f64]) -> SignedExtremes {
    let mut pos_sum = 0.0;
    let mut neg_sum = 0.0;
    for &d in diff {
        if d > 0.0 {
            pos_sum += d;
        } else {
            neg_sum += d;
        }
    }
    SignedExtremes { pos_sum, neg_sum }
}

/// Convex combination `Σ_k weights_k · dists_k`.
pub fn mix(dists: &[Dist], weights: &Dist) -> Result<Dist> {
    let first = dists
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
    if weights.len() != dists.len() {
        return Err(Error::SpaceMismatch(format!(
            "{} mixture weights for {} distributions",
            weights.len(),
            dists.len()
        )));
    }
    let mut out = vec![0.0; first.len()];
    for (d, &lambda) in dists.iter().zip(weights.weights()) {
        same_space(first, d)?;
        for (o, w) in out.iter_mut().zip(&d.weights) {
            *o += lambda * w;
        }
    }
    Dist::new(first.space.clone(), out)
}

/// Optimal value and maximizing test function of a Lipschitz program.
#[derive(Debug, Clone)]
pub struct LipschitzSolution {
    pub value: f64,
    pub witness: Vec<f64>,
}

/// `sup { Σ f (a − b) : |f(i) − f(j)| ≤ d(i, j), |f| ≤ bound }` over a
/// row-major metric.
pub fn lipschitz_program(a: &[f64], b: &[f64], metric: &[f64], bound: f64) -> Result<LipschitzSolution> {
    let n = a.len();
    if b.len() != n || metric.len() != n * n {
        return Err(Error::SpaceMismatch("inconsistent program dimensions".into()));
    }
    if n > KR_MAX_LABELS {
        return Err(Error::InvalidArgument(format!(
            "Lipschitz program limited to {KR_MAX_LABELS} labels, got {n}"
        )));
    }
    let c: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();

    // Dual columns: flows (i -> j) for ordered pairs, then upper and lower box
    // slacks per label.
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let ncols = pairs.len() + 2 * n;
    let mut cost = Vec::with_capacity(ncols);
    cost.extend(pairs.iter().map(|&(i, j)| metric[i * n + j]));
    cost.extend(std::iter::repeat_n(bound, 2 * n));

    let sign: Vec<f64> = c.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
    let mut rows = vec![vec![0.0; ncols]; n];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        rows[i][k] = sign[i];
        rows[j][k] = -sign[j];
    }
    let off = pairs.len();
    let mut basis = Vec::with_capacity(n);
    for i in 0..n {
        rows[i][off + i] = sign[i];
        rows[i][off + n + i] = -sign[i];
        basis.push(if sign[i] > 0.0 { off + i } else { off + n + i });
    }
    let rhs: Vec<f64> = c.iter().map(|v| v.abs()).collect();

    let sol = lp::solve(rows, rhs, &cost, basis, 200_000)?;
    let witness = sol.duals.iter().zip(&sign).map(|(p, s)| p * s).collect();
    Ok(LipschitzSolution {
        value: sol.objective.max(0.0),
        witness,
    })
}

fn metric_of(mu: &Dist, nu: &Dist) -> Result<Vec<f64>> {
    same_space(mu, nu)?;
    mu.space
        .metric()
        .map(<[f64]>::to_vec)
        .ok_or(Error::MissingMetric)
}

/// Kantorovich–Rubinshtein distance, with the maximizing `f` as witness.
pub fn kr_solution(mu: &Dist, nu: &Dist) -> Result<LipschitzSolution> {
    let metric = metric_of(mu, nu)?;
    lipschitz_program(&mu.weights, &nu.weights, &metric, 1.0)
}

pub fn kr_distance(mu: &Dist, nu: &Dist) -> Result<f64> {
    kr_solution(mu, nu).map(|s| s.value)
}

/// Lipschitz program without the `|f| ≤ 1` bound (the transport cost).
///
/// A box of half-width equal to the diameter is imposed instead; it never
/// binds, because shifting an optimal `f` by a constant leaves the objective
/// unchanged and brings its range into `[−diam/2, diam/2]`.
pub fn lipschitz_transport_distance(mu: &Dist, nu: &Dist) -> Result<f64> {
    let metric = metric_of(mu, nu)?;
    let diameter = metric.iter().cloned().fold(0.0, f64::max);
    lipschitz_program(&mu.weights, &nu.weights, &metric, diameter.max(1.0)).map(|s| s.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_point(d: f64) -> Arc<FiniteSpace> {
        Arc::new(
            FiniteSpace::new(["a", "b"])
                .unwrap()
                .with_metric(vec![0.0, d, d, 0.0])
                .unwrap(),
        )
    }

    fn dist(space: &Arc<FiniteSpace>, w: &[f64]) -> Dist {
        Dist::new(space.clone(), w.to_vec()).unwrap()
    }

    #[test]
    fn tv_examples() {
        let s = two_point(1.0);
        let a = Dist::point_mass(s.clone(), 0).unwrap();
        let b = Dist::point_mass(s.clone(), 1).unwrap();
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        assert_eq!(tv_distance(&dist(&s, &[0.5, 0.5]), &a).unwrap(), 0.5);
    }

    #[test]
    fn tv_rejects_mismatched_spaces() {
        let s2 = two_point(1.0);
        let s3 = Arc::new(FiniteSpace::indexed(3).unwrap());
        let err = tv_distance(&Dist::uniform(s2), &Dist::uniform(s3));
        assert!(matches!(err, Err(Error::SpaceMismatch(_))));
    }

    #[test]
    fn kr_two_point_closed_form() {
        // |μ_a − ν_a| · min(d, 2)
        for &(d, expected) in &[(0.3, 0.3), (5.0, 2.0), (2.0, 2.0), (1.0, 1.0)] {
            let s = two_point(d);
            let a = Dist::point_mass(s.clone(), 0).unwrap();
            let b = Dist::point_mass(s.clone(), 1).unwrap();
            let v = kr_distance(&a, &b).unwrap();
            assert!((v - expected).abs() < 1e-12, "d={d}: {v}");
        }
        let s = two_point(0.7);
        let v = kr_distance(&dist(&s, &[0.9, 0.1]), &dist(&s, &[0.4, 0.6])).unwrap();
        assert!((v - 0.5 * 0.7).abs() < 1e-12);
    }

    #[test]
    fn kr_identical_is_zero() {
        let s = two_point(0.4);
        let m = dist(&s, &[0.25, 0.75]);
        assert_eq!(kr_distance(&m, &m).unwrap(), 0.0);
    }

    #[test]
    fn kr_requires_metric() {
        let s = Arc::new(FiniteSpace::indexed(2).unwrap());
        let m = Dist::uniform(s);
        assert!(matches!(kr_distance(&m, &m), Err(Error::MissingMetric)));
    }

    #[test]
    fn kr_witness_is_feasible() {
        let s = Arc::new(
            FiniteSpace::on_line((0..5).map(|i| i.to_string()).collect(), &[0.0, 0.1, 0.5, 1.7, 3.0])
                .unwrap(),
        );
        let mu = dist(&s, &[0.1, 0.2, 0.3, 0.1, 0.3]);
        let nu = dist(&s, &[0.4, 0.0, 0.1, 0.4, 0.1]);
        let sol = kr_solution(&mu, &nu).unwrap();
        let n = 5;
        for i in 0..n {
            assert!(sol.witness[i].abs() <= 1.0 + 1e-9);
            for j in 0..n {
                assert!(sol.witness[i] - sol.witness[j] <= s.distance(i, j).unwrap() + 1e-9);
            }
        }
        let primal: f64 = (0..n)
            .map(|i| sol.witness[i] * (mu.weights()[i] - nu.weights()[i]))
            .sum();
        assert!((primal - sol.value).abs() < 1e-9);
    }

    #[test]
    fn signed_extremes_examples() {
        let e = signed_extremes(&[0.2, -0.5, 0.1]);
        assert!((e.pos_sum - 0.3).abs() < 1e-15);
        assert_eq!(e.neg_sum, -0.5);
        assert_eq!(e.sup_abs(), 0.5);
        assert_eq!(signed_extremes(&[0.0, 0.0]), SignedExtremes { pos_sum: 0.0, neg_sum: 0.0 });
        assert_eq!(signed_extremes(&[1.0, 1.0]), SignedExtremes { pos_sum: 2.0, neg_sum: 0.0 });
    }

    #[test]
    fn mix_examples() {
        let s = two_point(1.0);
        let idx1 = Arc::new(FiniteSpace::indexed(1).unwrap());
        let idx2 = Arc::new(FiniteSpace::indexed(2).unwrap());
        let d = dist(&s, &[0.2, 0.8]);
        assert_eq!(mix(std::slice::from_ref(&d), &Dist::uniform(idx1)).unwrap(), d);
        let a = Dist::point_mass(s.clone(), 0).unwrap();
        let b = Dist::point_mass(s.clone(), 1).unwrap();
        let m = mix(&[a.clone(), b.clone()], &Dist::uniform(idx2.clone())).unwrap();
        assert_eq!(m.weights(), &[0.5, 0.5]);
        let m = mix(&[a, b], &dist(&idx2, &[0.3, 0.7])).unwrap();
        assert!((m.weights()[0] - 0.3).abs() < 1e-15 && (m.weights()[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn mix_rejects_length_mismatch() {
        let s = two_point(1.0);
        let idx2 = Arc::new(FiniteSpace::indexed(2).unwrap());
        assert!(mix(&[Dist::uniform(s)], &Dist::uniform(idx2)).is_err());
    }

    #[test]
    fn constructor_renormalizes_small_drift_only() {
        let s = two_point(1.0);
        let d = Dist::new(s.clone(), vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(Dist::new(s.clone(), vec![0.5, 0.4]).is_err());
        assert!(Dist::new(s, vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn metric_validation() {
        let base = || FiniteSpace::indexed(3).unwrap();
        assert!(base().with_metric(vec![0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0]).is_err());
        assert!(base().with_metric(vec![0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0]).is_ok());
        assert!(base().with_metric(vec![0.0, 1.0, 2.0, 1.5, 0.0, 1.0, 2.0, 1.0, 0.0]).is_err());
        assert!(FiniteSpace::new(["x", "x"]).is_err());
        assert!(FiniteSpace::new(Vec::<String>::new()).is_err());
    }

    fn random_space(n: usize, pos: &[f64]) -> Arc<FiniteSpace> {
        Arc::new(FiniteSpace::on_line((0..n).map(|i| i.to_string()).collect(), pos).unwrap())
    }

    fn simplex_vec(raw: &[f64]) -> Vec<f64> {
        let s: f64 = raw.iter().sum();
        raw.iter().map(|x| x / s).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn distances_are_metrics(
            pos in prop::collection::vec(0.0f64..3.0, 4),
            a in prop::collection::vec(0.01f64..1.0, 4),
            b in prop::collection::vec(0.01f64..1.0, 4),
            c in prop::collection::vec(0.01f64..1.0, 4),
        ) {
            let mut pos = pos;
            pos.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for i in 1..4 { if pos[i] <= pos[i-1] { pos[i] = pos[i-1] + 1e-3; } }
            let s = random_space(4, &pos);
            let (a, b, c) = (dist(&s, &simplex_vec(&a)), dist(&s, &simplex_vec(&b)), dist(&s, &simplex_vec(&c)));
            let kab = kr_distance(&a, &b).unwrap();
            let kba = kr_distance(&b, &a).unwrap();
            prop_assert!((kab - kba).abs() < 1e-12);
            prop_assert!(kr_distance(&a, &a).unwrap().abs() < 1e-12);
            prop_assert!(kab <= kr_distance(&a, &c).unwrap() + kr_distance(&c, &b).unwrap() + 1e-9);
            let tab = tv_distance(&a, &b).unwrap();
            prop_assert!((tab - tv_distance(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!(tab <= tv_distance(&a, &c).unwrap() + tv_distance(&c, &b).unwrap() + 1e-9);
            prop_assert!(kab <= 2.0 * tab + 1e-12);
            prop_assert!(kab <= lipschitz_transport_distance(&a, &b).unwrap() + 1e-12);
        }

        #[test]
        fn signed_extremes_match_subset_enumeration(v in prop::collection::vec(-1.0f64..1.0, 1..=12)) {
            let e = signed_extremes(&v);
            let n = v.len();
            let mut best: f64 = 0.0;
            for mask in 0u32..(1 << n) {
                let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| v[i]).sum();
                best = best.max(s.abs());
            }
            prop_assert!((e.sup_abs() - best).abs() < 1e-12);
        }

        #[test]
        fn mix_is_affine(lambda in 0.0f64..1.0, a in prop::collection::vec(0.01f64..1.0, 3), b in prop::collection::vec(0.01f64..1.0, 3)) {
            let s = Arc::new(FiniteSpace::indexed(3).unwrap());
            let idx2 = Arc::new(FiniteSpace::indexed(2).unwrap());
            let (mu, nu) = (dist(&s, &simplex_vec(&a)), dist(&s, &simplex_vec(&b)));
            let m = mix(&[mu.clone(), nu.clone()], &dist(&idx2, &[lambda, 1.0 - lambda])).unwrap();
            let direct: Vec<f64> = mu.weights().iter().zip(nu.weights()).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
            prop_assert!(tv_weights(m.weights(), &direct) < 1e-12);
        }
    }
}
