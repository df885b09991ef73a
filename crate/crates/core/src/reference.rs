//! Reference solutions: the closed-form local solution for a uniform
//! potential, a weighted shortest-path oracle for general potentials, and
//! the sup-norm error between a trajectory and a reference.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{sample_points, BoundarySpec, Density, ManifoldSpec, PointCloud};
use crate::solver::{Field, FieldSpec};
use crate::spatial::CellGrid;

/// Neighbor count of the shortest-path graph.
pub const DEFAULT_KNN: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    /// Shortest paths on a kNN graph over `resolution` points.
    Dijkstra { resolution: usize, k: usize },
}

/// Reference values at every vertex of a cloud. `time` is `None` for a
/// steady state.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleField {
    pub values: Vec<f64>,
    pub time: Option<f64>,
    pub provenance: Provenance,
}

/// Checks that `(P, f₀) = (1, 0)`, the regime with a closed-form solution.
pub fn check_uniform_regime(potential: &FieldSpec, initial: &FieldSpec) -> Result<()> {
    match (potential, initial) {
        (FieldSpec::Constant { value: p }, FieldSpec::Constant { value: f0 }) if *p == 1.0 && *f0 == 0.0 => Ok(()),
        _ => Err(Error::Oracle(format!(
            "closed form needs a unit potential and zero initial data, got {potential:?} and {initial:?}"
        ))),
    }
}

/// `min(t, d_M(x, Γ))`, the solution for `P ≡ 1`, `f₀ ≡ 0`.
pub fn local_solution_uniform(spec: &ManifoldSpec, gamma: &BoundarySpec, x: &[f64], t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Oracle(format!("time must be non-negative, got {t}")));
    }
    let d = crate::manifold::distance_to_boundary(spec, gamma, x)?;
    Ok(t.min(d))
}

/// Closed-form reference at each requested time, for every point of `cloud`.
pub fn closed_form_fields(
    cloud: &PointCloud,
    gamma: &BoundarySpec,
    potential: &FieldSpec,
    initial: &FieldSpec,
    times: &[f64],
) -> Result<Vec<OracleField>> {
    check_uniform_regime(potential, initial)?;
    gamma.validate(&cloud.spec)?;
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::Oracle(format!("time must be non-negative, got {t}")));
    }
    let dist = gamma.resolve(&cloud.spec);
    let d: Vec<f64> = (0..cloud.len()).into_par_iter().map(|i| dist.distance(cloud.point(i))).collect();
    Ok(times
        .iter()
        .map(|&t| OracleField {
            values: d.iter().map(|d| t.min(*d)).collect(),
            time: Some(t),
            provenance: Provenance::ClosedForm,
        })
        .collect())
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Symmetrized kNN adjacency under `d_M`, as sorted, deduplicated rows.
fn knn_adjacency(cloud: &PointCloud, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = cloud.len();
    let spec = &cloud.spec;
    let side = (spec.volume() / n as f64).powf(1.0 / spec.intrinsic_dim() as f64);
    let grid = CellGrid::new(cloud, side);
    let knn: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let q = cloud.point(i);
            grid.k_nearest(q, k + 1, |j| spec.geodesic_unchecked(q, cloud.point(j)))
                .into_iter()
                .filter(|(j, _)| *j != i)
                .take(k)
                .collect()
        })
        .collect();
    let mut adj: Vec<Vec<(usize, f64)>> = knn.clone();
    for (i, row) in knn.iter().enumerate() {
        for &(j, d) in row {
            adj[j].push((i, d));
        }
    }
    for row in &mut adj {
        row.sort_by_key(|a| a.0);
        row.dedup_by_key(|e| e.0);
    }
    adj
}

/// Multi-source shortest-path distance from `sources` on the symmetrized
/// kNN graph of `cloud`, with edge cost `d_M(u, v)·(P(u) + P(v))/2`.
pub fn dijkstra_weighted_distance(
    cloud: &PointCloud,
    potential: &[f64],
    sources: &[usize],
    k: usize,
) -> Result<OracleField> {
    let n = cloud.len();
    if potential.len() != n {
        return Err(Error::Oracle(format!("potential has {} values for {n} points", potential.len())));
    }
    if sources.is_empty() {
        return Err(Error::Oracle("no source vertices".into()));
    }
    if k == 0 {
        return Err(Error::Oracle("k must be at least 1".into()));
    }
    let mut is_source = vec![false; n];
    for &s in sources {
        if s >= n {
            return Err(Error::Oracle(format!("source {s} out of range for {n} points")));
        }
        is_source[s] = true;
    }
    if let Some(i) = (0..n).find(|&i| !is_source[i] && !(potential[i] > 0.0 && potential[i].is_finite())) {
        return Err(Error::Oracle(format!("potential must be positive off the sources, got {} at {i}", potential[i])));
    }
    let adj = knn_adjacency(cloud, k);
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    for (s, _) in is_source.iter().enumerate().filter(|(_, b)| **b) {
        dist[s] = 0.0;
        heap.push(Entry { cost: 0.0, vertex: s });
    }
    while let Some(Entry { cost, vertex }) = heap.pop() {
        if cost > dist[vertex] {
            continue;
        }
        for &(j, d) in &adj[vertex] {
            let next = cost + d * 0.5 * (potential[vertex] + potential[j]);
            if next < dist[j] {
                dist[j] = next;
                heap.push(Entry { cost: next, vertex: j });
            }
        }
    }
    if let Some(i) = dist.iter().position(|d| d.is_infinite()) {
        return Err(Error::Oracle(format!("kNN graph (k = {k}) is disconnected: vertex {i} unreachable")));
    }
    Ok(OracleField { values: dist, time: None, provenance: Provenance::Dijkstra { resolution: n, k } })
}

/// Steady-state reference for a general potential at the points of `query`.
///
/// Runs the shortest-path oracle on the union of a sample of `Γ`, the query
/// points and `dense_n` extra uniform points drawn with `seed`. Sources are
/// the `Γ` sample plus every point at distance zero from `Γ`.
pub fn weighted_distance_oracle(
    query: &PointCloud,
    gamma: &BoundarySpec,
    potential: &FieldSpec,
    dense_n: usize,
    seed: u64,
    k: usize,
) -> Result<OracleField> {
    let spec = &query.spec;
    gamma.validate(spec)?;
    let dense = sample_points(spec, dense_n, Density::Uniform, seed)?;
    let total = query.len() + dense_n;
    let spacing = 0.5 * (spec.volume() / total as f64).powf(1.0 / spec.intrinsic_dim() as f64);
    let seeds = gamma.sample(spec, spacing);
    let mut coords: Vec<f64> = seeds.iter().flatten().copied().collect();
    coords.extend_from_slice(&query.coords);
    coords.extend_from_slice(&dense.coords);
    let union = PointCloud::raw(spec.clone(), coords);
    let dist = gamma.resolve(spec);
    let sources: Vec<usize> = (0..union.len())
        .filter(|&i| i < seeds.len() || dist.distance(union.point(i)) == 0.0)
        .collect();
    let p: Vec<f64> = union.points().map(|x| potential.eval(x)).collect();
    let all = dijkstra_weighted_distance(&union, &p, &sources, k)?;
    Ok(OracleField {
        values: all.values[seeds.len()..seeds.len() + query.len()].to_vec(),
        time: None,
        provenance: all.provenance,
    })
}

/// One row of `errors.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub n: usize,
    pub epsilon: f64,
    pub dt: f64,
    pub sup_error: f64,
    pub boundary_hausdorff: f64,
    /// Wall time of the trial, when recording it was requested.
    pub runtime_seconds: Option<f64>,
    pub seed: u64,
}

/// `max |f − g|` over all vertices of two equally sized fields.
pub fn field_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Oracle(format!("field sizes differ: {} vs {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Sup-norm error over all vertices and snapshots. Oracle fields are paired
/// with snapshots in order; timed oracles must match the snapshot times.
pub fn sup_error(trajectory: &[Field], oracle: &[OracleField]) -> Result<f64> {
    if trajectory.len() != oracle.len() {
        return Err(Error::Oracle(format!(
            "{} snapshots but {} oracle fields",
            trajectory.len(),
            oracle.len()
        )));
    }
    let mut worst = 0.0f64;
    for (f, o) in trajectory.iter().zip(oracle) {
        if let Some(t) = o.time {
            if (t - f.time).abs() > 1e-9 * t.abs().max(1.0) {
                return Err(Error::Oracle(format!("oracle time {t} does not match snapshot time {}", f.time)));
            }
        }
        worst = worst.max(field_distance(&f.values, &o.values)?);
    }
    Ok(worst)
}
