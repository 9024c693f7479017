//! Value iteration on a regular lattice over the belief simplex.
//!
//! Vertices are the beliefs `z = n / k` with `n ∈ ℕ^{|W|}`, `Σ n = k`. Values
//! off the lattice are interpolated barycentrically on the Freudenthal
//! triangulation: with `y_j = k Σ_{i≥j} z_i` the lattice becomes the integer
//! points of `{k ≥ y_1 ≥ … ≥ y_d ≥ 0}`, and each unit cube splits into the
//! simplices selected by the order of the fractional parts of `y`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;

use super::{argmin_set, check_alpha, DEFAULT_TIE_TOL};
use crate::error::{Error, Result};
use crate::measures::FiniteSpace;
use crate::models::{PlatzmanModel, Validate};
use crate::reduction::{csv_err, qhat, Belief};

/// Largest lattice the grid solver will allocate.
pub const GRID_VERTEX_LIMIT: usize = 1_000_000;

const MAX_ITERATIONS: usize = 1_000_000;
const SNAP_EPS: f64 = 1e-12;

fn binomial(n: usize, r: usize) -> Option<usize> {
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

#[derive(Debug, Clone)]
pub struct SimplexGrid {
    dim: usize,
    resolution: usize,
    /// Lexicographically ascending.
    vertices: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl SimplexGrid {
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        if dim == 0 || resolution == 0 {
            return Err(Error::InvalidArgument("grid needs dim >= 1 and resolution >= 1".into()));
        }
        let count = binomial(resolution + dim - 1, dim - 1).filter(|&c| c <= GRID_VERTEX_LIMIT);
        if count.is_none() {
            return Err(Error::ResourceGuard(format!(
                "grid of resolution {resolution} in dimension {dim} exceeds {GRID_VERTEX_LIMIT} vertices"
            )));
        }
        let mut vertices = Vec::with_capacity(count.unwrap_or(0));
        let mut cur = vec![0u32; dim];
        fn fill(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if pos + 1 == cur.len() {
                cur[pos] = left;
                out.push(cur.clone());
                return;
            }
            for v in 0..=left {
                cur[pos] = v;
                fill(pos + 1, left - v, cur, out);
            }
        }
        fill(0, resolution as u32, &mut cur, &mut vertices);
        let index = vertices.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        Ok(Self {
            dim,
            resolution,
            vertices,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, i: usize) -> &[u32] {
        &self.vertices[i]
    }

    pub fn find(&self, counts: &[u32]) -> Option<usize> {
        self.index.get(counts).copied()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        let k = self.resolution as f64;
        self.vertices[i].iter().map(|&n| n as f64 / k).collect()
    }

    /// Vertices of the cell containing `z` with their barycentric weights;
    /// zero weights are dropped.
    pub fn interpolate(&self, z: &[f64]) -> Result<Vec<(usize, f64)>> {
        if z.len() != self.dim {
            return Err(Error::SpaceMismatch(format!(
                "belief of length {} on a grid of dimension {}",
                z.len(),
                self.dim
            )));
        }
        let d = self.dim - 1;
        if d == 0 {
            return Ok(vec![(0, 1.0)]);
        }
        let k = self.resolution as f64;
        let mut y = vec![0.0; d];
        let mut acc = 0.0;
        for j in (1..=d).rev() {
            acc += z[j];
            let v = (k * acc).clamp(0.0, k);
            // snap roundoff so that lattice points map to a single vertex
            y[j - 1] = if (v - v.round()).abs() <= SNAP_EPS { v.round() } else { v };
        }
        let base: Vec<i64> = y.iter().map(|v| v.floor() as i64).collect();
        let frac: Vec<f64> = y.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]));

        let mut out = Vec::with_capacity(d + 1);
        let mut cur = base;
        for i in 0..=d {
            if i > 0 {
                cur[order[i - 1]] += 1;
            }
            let hi = if i == 0 { 1.0 } else { frac[order[i - 1]] };
            let lo = if i == d { 0.0 } else { frac[order[i]] };
            let w = hi - lo;
            if w <= 0.0 {
                continue;
            }
            let idx = self.vertex_of_cumulative(&cur).ok_or_else(|| {
                Error::InvalidArgument(format!("belief {z:?} is outside the simplex"))
            })?;
            out.push((idx, w));
        }
        Ok(out)
    }

    fn vertex_of_cumulative(&self, y: &[i64]) -> Option<usize> {
        let k = self.resolution as i64;
        let d = y.len();
        let mut counts = Vec::with_capacity(d + 1);
        counts.push(k - y[0]);
        for j in 0..d {
            counts.push(y[j] - if j + 1 < d { y[j + 1] } else { 0 });
        }
        if counts.iter().any(|&c| c < 0) {
            return None;
        }
        let counts: Vec<u32> = counts.into_iter().map(|c| c as u32).collect();
        self.find(&counts)
    }

    /// Closest vertex in L1; ties go to the lexicographically first vertex.
    pub fn nearest_vertex(&self, z: &[f64]) -> usize {
        let k = self.resolution as f64;
        let mut best = (f64::INFINITY, 0);
        for (i, v) in self.vertices.iter().enumerate() {
            let d: f64 = v.iter().zip(z).map(|(&n, &zi)| (n as f64 / k - zi).abs()).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Freudenthal,
}

/// Stationary policy on grid vertices. The observation argument is accepted
/// for uniformity but ignored: the grid solver works with observation-free
/// costs, where an optimal action depends on the belief alone.
#[derive(Debug, Clone)]
pub struct StationaryGridPolicy {
    pub grid: SimplexGrid,
    /// Action per vertex.
    pub actions: Vec<usize>,
    pub interpolation: Interpolation,
}

impl StationaryGridPolicy {
    /// Action of the nearest vertex in L1.
    pub fn action(&self, z: &[f64], _obs: usize) -> usize {
        self.actions[self.grid.nearest_vertex(z)]
    }

    /// Reads the format of [`GridSolution::write_csv`]; the `value` column is
    /// ignored. Every lattice vertex must appear once.
    pub fn read_csv<R: Read>(input: R, actions: &FiniteSpace) -> Result<Self> {
        let parse = |e: csv::Error| Error::Parse(e.to_string());
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(parse)?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse(format!("grid policy file lacks a {name:?} column")))
        };
        let (cv, ca) = (col("vertex")?, col("action")?);
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(parse)?;
            let at = |msg: String| Error::Parse(format!("grid policy row {}: {msg}", line + 2));
            let counts = rec[cv]
                .split(';')
                .map(|c| c.trim().parse::<u32>().map_err(|e| at(format!("vertex: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let a = actions
                .index_of(&rec[ca])
                .ok_or_else(|| at(format!("unknown action {:?}", &rec[ca])))?;
            rows.push((counts, a));
        }
        let first = rows.first().ok_or_else(|| Error::Parse("grid policy file has no rows".into()))?;
        let (dim, k) = (first.0.len(), first.0.iter().sum::<u32>() as usize);
        let grid = SimplexGrid::new(dim, k)?;
        let mut table = vec![None; grid.len()];
        for (line, (counts, a)) in rows.iter().enumerate() {
            let i = grid
                .find(counts)
                .ok_or_else(|| Error::Parse(format!("grid policy row {}: not a vertex of the k = {k} lattice", line + 2)))?;
            if table[i].replace(*a).is_some() {
                return Err(Error::Parse(format!("grid policy row {}: duplicate vertex", line + 2)));
            }
        }
        let actions = table
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Parse(format!("grid policy file misses vertices of the k = {k} lattice")))?;
        Ok(Self { grid, actions, interpolation: Interpolation::Freudenthal })
    }
}

type SparseRow = Vec<(usize, f64)>;

/// One Bellman backup on the lattice, precomputed per vertex and action as
/// `ĉ(z, a)` plus a sparse interpolated transition row.
#[derive(Debug, Clone)]
pub struct GridOperator {
    alpha: f64,
    costs: Vec<Vec<f64>>,
    rows: Vec<Vec<Vec<(usize, f64)>>>,
}

impl GridOperator {
    pub fn new(model: &PlatzmanModel, grid: &SimplexGrid, alpha: f64) -> Result<Self> {
        if grid.dim() != model.num_states() {
            return Err(Error::SpaceMismatch("grid dimension differs from |W|".into()));
        }
        let c = model
            .observation_free_cost()
            .ok_or_else(|| Error::InvalidArgument("grid solver requires observation-independent costs".into()))?;
        let na = model.num_actions();
        let states: Arc<FiniteSpace> = model.states.clone();
        let built: Vec<(Vec<f64>, Vec<SparseRow>)> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let z = grid.point(i);
                let belief = Belief::from_weights(states.clone(), z.clone())?;
                let mut costs = Vec::with_capacity(na);
                let mut rows = Vec::with_capacity(na);
                for a in 0..na {
                    costs.push(z.iter().enumerate().map(|(w, zw)| zw * c[w * na + a]).sum());
                    let mut acc: Vec<(usize, f64)> = Vec::new();
                    if alpha > 0.0 {
                        for (child, p) in qhat(model, &belief, a)? {
                            for (v, lw) in grid.interpolate(child.weights())? {
                                acc.push((v, p * lw));
                            }
                        }
                        acc.sort_by_key(|e| e.0);
                        acc.dedup_by(|e, prev| {
                            if e.0 == prev.0 {
                                prev.1 += e.1;
                                true
                            } else {
                                false
                            }
                        });
                    }
                    rows.push(acc);
                }
                Ok((costs, rows))
            })
            .collect::<Result<Vec<_>>>()?;
        let (costs, rows) = built.into_iter().unzip();
        Ok(Self { alpha, costs, rows })
    }

    /// `(T v, greedy action per vertex)`.
    pub fn apply(&self, v: &[f64]) -> (Vec<f64>, Vec<usize>) {
        self.costs
            .par_iter()
            .zip(&self.rows)
            .map(|(costs, rows)| {
                let etas: Vec<f64> = costs
                    .iter()
                    .zip(rows)
                    .map(|(c, row)| c + self.alpha * row.iter().map(|&(j, p)| p * v[j]).sum::<f64>())
                    .collect();
                let a = argmin_set(&etas, DEFAULT_TIE_TOL)[0];
                (etas.iter().copied().fold(f64::INFINITY, f64::min), a)
            })
            .unzip()
    }
}

#[derive(Debug, Clone)]
pub struct GridSolution {
    pub values: Vec<f64>,
    pub policy: StationaryGridPolicy,
    pub operator: GridOperator,
    pub iterations: usize,
    /// Sup-norm change of the final iteration.
    pub last_step: f64,
    /// Bound on the sup-norm distance to the fixed point of the grid operator.
    pub error_bound: f64,
}

impl GridSolution {
    pub fn grid(&self) -> &SimplexGrid {
        &self.policy.grid
    }

    /// Columns: `vertex,value,action`; `vertex` lists the lattice counts
    /// separated by `;`.
    pub fn write_csv<W: Write>(&self, out: W, actions: &FiniteSpace) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["vertex", "value", "action"]).map_err(csv_err)?;
        for (i, v) in self.values.iter().enumerate() {
            let counts: Vec<String> = self.grid().vertex(i).iter().map(u32::to_string).collect();
            w.write_record([
                counts.join(";"),
                v.to_string(),
                actions.label(self.policy.actions[i]).to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Discounted value iteration from `v ≡ 0` on the lattice of resolution
/// `resolution`, stopping once a step is at most `tol (1 − α) / (2α)`.
///
/// The result approximates the belief-MDP value only up to the
/// interpolation error of the lattice.
pub fn infinite_horizon_grid_solve(
    model: &PlatzmanModel,
    resolution: usize,
    alpha: f64,
    tol: f64,
) -> Result<GridSolution> {
    model.check()?;
    check_alpha(alpha, false)?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let grid = SimplexGrid::new(model.num_states(), resolution)?;
    let operator = GridOperator::new(model, &grid, alpha)?;
    let threshold = if alpha > 0.0 { tol * (1.0 - alpha) / (2.0 * alpha) } else { f64::INFINITY };
    let mut values = vec![0.0; grid.len()];
    let mut iterations = 0;
    loop {
        let (next, actions) = operator.apply(&values);
        iterations += 1;
        let step = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        if step <= threshold {
            let error_bound = if alpha > 0.0 { alpha * step / (1.0 - alpha) } else { 0.0 };
            return Ok(GridSolution {
                values,
                policy: StationaryGridPolicy {
                    grid,
                    actions,
                    interpolation: Interpolation::Freudenthal,
                },
                operator,
                iterations,
                last_step: step,
                error_bound,
            });
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::ResourceGuard(format!(
                "grid value iteration did not reach {threshold:e} within {MAX_ITERATIONS} iterations"
            )));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vertex_counts_and_order() {
        let g = SimplexGrid::new(3, 2).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.vertex(0), &[0, 0, 2]);
        assert_eq!(g.vertex(5), &[2, 0, 0]);
        assert_eq!(SimplexGrid::new(3, 20).unwrap().len(), 231);
        assert_eq!(SimplexGrid::new(1, 7).unwrap().len(), 1);
        assert!(matches!(SimplexGrid::new(30, 100), Err(Error::ResourceGuard(_))));
    }

    #[test]
    fn vertices_interpolate_to_themselves() {
        let g = SimplexGrid::new(4, 5).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.interpolate(&g.point(i)).unwrap(), vec![(i, 1.0)]);
        }
    }

    #[test]
    fn nearest_vertex_ties_are_lexicographic() {
        let g = SimplexGrid::new(2, 1).unwrap();
        // (0,1) and (1,0) are both at L1 distance 1
        assert_eq!(g.vertex(g.nearest_vertex(&[0.5, 0.5])), &[0, 1]);
        assert_eq!(g.vertex(g.nearest_vertex(&[0.6, 0.4])), &[1, 0]);
    }

    proptest! {
        #[test]
        fn interpolation_reproduces_the_point(
            raw in prop::collection::vec(0.0f64..1.0, 2..6),
            k in 1usize..12,
        ) {
            let s: f64 = raw.iter().sum::<f64>() + 1e-9;
            let z: Vec<f64> = raw.iter().map(|v| (v + 1e-9 / raw.len() as f64) / s).collect();
            let g = SimplexGrid::new(z.len(), k).unwrap();
            let cell = g.interpolate(&z).unwrap();
            let wsum: f64 = cell.iter().map(|c| c.1).sum();
            prop_assert!((wsum - 1.0).abs() < 1e-12);
            prop_assert!(cell.len() <= z.len());
            for (i, &z_i) in z.iter().enumerate() {
                let zi: f64 = cell.iter().map(|&(v, w)| w * g.point(v)[i]).sum();
                prop_assert!((zi - z_i).abs() < 1e-12);
            }
            // affine functions are reproduced exactly
            let f = |p: &[f64]| p.iter().enumerate().map(|(i, x)| (i as f64 + 1.5) * x).sum::<f64>();
            let fi: f64 = cell.iter().map(|&(v, w)| w * f(&g.point(v))).sum();
            prop_assert!((fi - f(&z)).abs() < 1e-10);
        }
    }
}
