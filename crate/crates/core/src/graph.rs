//! Kernel-weighted geometric graphs on sampled point clouds.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{weight, Kernel, KernelConstants};
use crate::manifold::{BoundarySpec, ManifoldSpec, PointCloud};
use crate::spatial::CellGrid;

/// One stored neighbor of a vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dtilde: f64,
    pub weight: f64,
}

/// Weighted graph with neighbor lists in compressed row form. Row `i` holds
/// every `j ≠ i` with `d̃(i, j) ≤ ε·r_eta`, sorted by `j`.
#[derive(Debug, Clone)]
pub struct Graph {
    cloud: Arc<PointCloud>,
    kernel: Kernel,
    constants: KernelConstants,
    epsilon: f64,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    dtilde: Vec<f64>,
    weights: Vec<f64>,
    boundary: Vec<bool>,
}

impl Graph {
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn shared_cloud(&self) -> Arc<PointCloud> {
        Arc::clone(&self.cloud)
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.cloud.spec
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn constants(&self) -> &KernelConstants {
        &self.constants
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of stored directed entries (twice the number of edges).
    pub fn directed_edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Parallel slices `(targets, dtilde, weights)` for vertex `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64], &[f64]) {
        let r = self.offsets[i]..self.offsets[i + 1];
        (&self.targets[r.clone()], &self.dtilde[r.clone()], &self.weights[r])
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = Neighbor> + '_ {
        let (t, d, w) = self.row(i);
        t.iter().zip(d).zip(w).map(|((&j, &dtilde), &weight)| Neighbor { index: j as usize, dtilde, weight })
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.iter().filter(|b| **b).count()
    }

    pub fn set_boundary_mask(&mut self, mask: Vec<bool>) -> Result<()> {
        if mask.len() != self.len() {
            return Err(Error::Graph(format!("mask has {} entries for {} vertices", mask.len(), self.len())));
        }
        self.boundary = mask;
        Ok(())
    }

    pub fn with_boundary_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        self.set_boundary_mask(mask)?;
        Ok(self)
    }
}

/// Builds the `ε`-graph of `cloud`: neighbors are found by cell-grid binning
/// with cell side `ε·r_eta` and kept when `d̃ ≤ ε·r_eta`.
pub fn build_graph(
    cloud: impl Into<Arc<PointCloud>>,
    kernel: &Kernel,
    constants: &KernelConstants,
    epsilon: f64,
) -> Result<Graph> {
    let cloud: Arc<PointCloud> = cloud.into();
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Graph(format!("epsilon must be positive, got {epsilon}")));
    }
    if cloud.is_empty() {
        return Err(Error::Graph("cannot build a graph on an empty cloud".into()));
    }
    let n = cloud.len();
    let cutoff = epsilon * kernel.r_eta;
    let grid = CellGrid::new(&cloud, cutoff);
    let spec = &cloud.spec;
    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let q = cloud.point(i);
            let mut row = Vec::new();
            grid.for_each_candidate(q, cutoff, |j| {
                if j != i {
                    let d = spec.dtilde_unchecked(q, cloud.point(j));
                    if d <= cutoff {
                        row.push((j as u32, d));
                    }
                }
            });
            row.sort_unstable_by_key(|e| e.0);
            row
        })
        .collect();
    Ok(assemble(cloud, kernel, constants, epsilon, rows))
}

/// Reference construction by a double loop over all pairs.
pub fn build_graph_brute_force(
    cloud: impl Into<Arc<PointCloud>>,
    kernel: &Kernel,
    constants: &KernelConstants,
    epsilon: f64,
) -> Result<Graph> {
    let cloud: Arc<PointCloud> = cloud.into();
    if !(epsilon > 0.0) || cloud.is_empty() {
        return Err(Error::Graph("brute-force build needs epsilon > 0 and a non-empty cloud".into()));
    }
    let cutoff = epsilon * kernel.r_eta;
    let rows = (0..cloud.len())
        .map(|i| {
            (0..cloud.len())
                .filter(|&j| j != i)
                .filter_map(|j| {
                    let d = cloud.spec.dtilde_unchecked(cloud.point(i), cloud.point(j));
                    (d <= cutoff).then_some((j as u32, d))
                })
                .collect()
        })
        .collect();
    Ok(assemble(cloud, kernel, constants, epsilon, rows))
}

fn assemble(
    cloud: Arc<PointCloud>,
    kernel: &Kernel,
    constants: &KernelConstants,
    epsilon: f64,
    rows: Vec<Vec<(u32, f64)>>,
) -> Graph {
    let total: usize = rows.iter().map(Vec::len).sum();
    let mut offsets = Vec::with_capacity(rows.len() + 1);
    let mut targets = Vec::with_capacity(total);
    let mut dtilde = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    offsets.push(0);
    for row in rows {
        for (j, d) in row {
            targets.push(j);
            dtilde.push(d);
            weights.push(weight(constants, kernel, epsilon, d));
        }
        offsets.push(targets.len());
    }
    let n = offsets.len() - 1;
    Graph {
        cloud,
        kernel: *kernel,
        constants: *constants,
        epsilon,
        offsets,
        targets,
        dtilde,
        weights,
        boundary: vec![false; n],
    }
}

/// Result of [`mark_boundary`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMarking {
    pub mask: Vec<bool>,
    /// `a·ε^(1+ν)/2`.
    pub threshold: f64,
}

impl BoundaryMarking {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|b| **b).count()
    }
}

/// `Γ_n = {u_i : d_M(u_i, Γ) ≤ a·ε^(1+ν)/2}`.
///
/// An empty `Γ_n` is allowed and logged as a warning; the solver then runs a
/// pure initial-value evolution.
pub fn mark_boundary(cloud: &PointCloud, gamma: &BoundarySpec, a: f64, epsilon: f64, nu: f64) -> Result<BoundaryMarking> {
    if !(a > 0.0 && epsilon > 0.0 && nu > 0.0) {
        return Err(Error::Graph(format!("boundary marking needs a, epsilon, nu > 0 (got {a}, {epsilon}, {nu})")));
    }
    gamma.validate(&cloud.spec)?;
    let threshold = boundary_threshold(a, epsilon, nu);
    let dist = gamma.resolve(&cloud.spec);
    let mask: Vec<bool> = (0..cloud.len()).into_par_iter().map(|i| dist.distance(cloud.point(i)) <= threshold).collect();
    let marking = BoundaryMarking { mask, threshold };
    if marking.count() == 0 {
        log::warn!("no vertex within {threshold:.3e} of the boundary set; running without boundary vertices");
    }
    Ok(marking)
}

pub fn boundary_threshold(a: f64, epsilon: f64, nu: f64) -> f64 {
    a * epsilon.powf(1.0 + nu) / 2.0
}

/// `ε_n` coupling the kernel scale to the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub n: usize,
    pub m_star: usize,
    pub nu: f64,
    pub tau: f64,
    pub k1: f64,
    pub epsilon_n: f64,
}

/// `(log n / n)^(1/m*) · (1+τ)^(1/m*)`, the `K1`-free part of `ε_n^(1+ν)`.
pub fn schedule_base(n: usize, m_star: usize, tau: f64) -> f64 {
    let m = m_star as f64;
    let nf = n as f64;
    (1.0 + tau).powf(1.0 / m) * (nf.ln() / nf).powf(1.0 / m)
}

/// `ε_n = [K1·(1+τ)^(1/m*)·(log n / n)^(1/m*)]^(1/(1+ν))`.
pub fn epsilon_schedule(n: usize, m_star: usize, nu: f64, tau: f64, k1: f64) -> Result<EpsilonSchedule> {
    if n < 3 {
        return Err(Error::Graph(format!("the epsilon schedule needs n >= 3, got {n}")));
    }
    if m_star == 0 || !(nu > 0.0 && tau > 0.0 && k1 > 0.0) {
        return Err(Error::Graph("epsilon schedule parameters must be positive".into()));
    }
    let epsilon_n = (k1 * schedule_base(n, m_star, tau)).powf(1.0 / (1.0 + nu));
    Ok(EpsilonSchedule { n, m_star, nu, tau, k1, epsilon_n })
}

/// Outcome of [`covering_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverCheck {
    pub holds: bool,
    pub worst_gap: f64,
    /// `a·ε^(1+ν)/8`.
    pub threshold: f64,
}

/// Minimum number of probes accepted by [`covering_check`].
pub const MIN_PROBES: usize = 1000;

/// Largest geodesic distance from a quasi-uniform probe to its nearest vertex.
pub fn worst_gap(cloud: &PointCloud, probe_count: usize) -> Result<f64> {
    if probe_count < MIN_PROBES {
        return Err(Error::Graph(format!("covering check needs at least {MIN_PROBES} probes, got {probe_count}")));
    }
    if cloud.is_empty() {
        return Err(Error::Graph("covering check on an empty cloud".into()));
    }
    let spec = &cloud.spec;
    let probes = spec.quasi_uniform_points(probe_count);
    let spacing = (spec.volume() / cloud.len() as f64).powf(1.0 / spec.intrinsic_dim() as f64);
    let grid = CellGrid::new(cloud, spacing);
    let gap = probes
        .par_chunks(cloud.dim)
        .map(|q| grid.nearest(q, |j| spec.geodesic_unchecked(q, cloud.point(j))).map_or(f64::INFINITY, |(_, d)| d))
        .reduce(|| 0.0, f64::max);
    Ok(gap)
}

/// Checks `max_x d_M(x, V_n) ≤ a·ε^(1+ν)/8` on `probe_count` probes.
pub fn covering_check(cloud: &PointCloud, a: f64, epsilon: f64, nu: f64, probe_count: usize) -> Result<CoverCheck> {
    let worst_gap = worst_gap(cloud, probe_count)?;
    let threshold = a * epsilon.powf(1.0 + nu) / 8.0;
    Ok(CoverCheck { holds: worst_gap <= threshold, worst_gap, threshold })
}

/// Largest distance from a point of `from` to its nearest point in `to`.
pub(crate) fn directed_hausdorff(spec: &ManifoldSpec, from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    let m = spec.embedding_dim();
    let target = PointCloud::raw(spec.clone(), to.iter().flatten().copied().collect());
    let spacing = (spec.volume() / to.len() as f64).powf(1.0 / spec.intrinsic_dim() as f64);
    let grid = CellGrid::new(&target, spacing.min(spec.diameter()));
    debug_assert!(from.iter().all(|p| p.len() == m));
    from.par_iter()
        .map(|q| grid.nearest(q, |j| spec.geodesic_unchecked(q, target.point(j))).map_or(f64::INFINITY, |(_, d)| d))
        .reduce(|| 0.0, f64::max)
}

/// Symmetric Hausdorff distance between a sample of `Γ` and the boundary
/// vertices `Γ_n` of `graph`.
pub fn hausdorff_boundary(gamma_sample: &[Vec<f64>], graph: &Graph) -> Result<f64> {
    hausdorff_to_mask(gamma_sample, graph.cloud(), graph.boundary_mask())
}

pub(crate) fn hausdorff_to_mask(gamma_sample: &[Vec<f64>], cloud: &PointCloud, mask: &[bool]) -> Result<f64> {
    if gamma_sample.is_empty() {
        return Err(Error::Graph("boundary sample is empty".into()));
    }
    let marked: Vec<Vec<f64>> =
        mask.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| cloud.point(i).to_vec()).collect();
    if marked.is_empty() {
        return Err(Error::Graph("graph has no boundary vertices".into()));
    }
    let spec = &cloud.spec;
    Ok(directed_hausdorff(spec, gamma_sample, &marked).max(directed_hausdorff(spec, &marked, gamma_sample)))
}

/// Hausdorff distance between `Γ` and the marked vertices, exact in the
/// vertex-to-`Γ` direction and sampled in the other.
pub fn hausdorff_to_boundary(gamma: &BoundarySpec, gamma_sample: &[Vec<f64>], cloud: &PointCloud, mask: &[bool]) -> Result<f64> {
    if gamma_sample.is_empty() {
        return Err(Error::Graph("boundary sample is empty".into()));
    }
    let marked: Vec<Vec<f64>> =
        mask.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| cloud.point(i).to_vec()).collect();
    if marked.is_empty() {
        return Err(Error::Graph("graph has no boundary vertices".into()));
    }
    let spec = &cloud.spec;
    let dist = gamma.resolve(spec);
    let outward = marked.par_iter().map(|x| dist.distance(x)).reduce(|| 0.0, f64::max);
    Ok(directed_hausdorff(spec, gamma_sample, &marked).max(outward))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{kernel_constants, make_kernel, DEFAULT_GRID_STEP};
    use crate::manifold::{sample_points, Density};
    use approx::assert_abs_diff_eq;

    fn tri() -> (Kernel, KernelConstants) {
        let k = make_kernel("triangular", &[], None).unwrap();
        (k, kernel_constants(&k, DEFAULT_GRID_STEP).unwrap())
    }

    fn line(xs: &[f64]) -> PointCloud {
        let spec = ManifoldSpec::EuclideanBox { lower: vec![0.0], upper: vec![1.0] };
        PointCloud::from_coords(spec, xs.to_vec()).unwrap()
    }

    #[test]
    fn two_point_support() {
        let (k, c) = tri();
        let g = build_graph(line(&[0.0, 0.05]), &k, &c, 0.1).unwrap();
        assert_eq!(g.degree(0), 1);
        assert_eq!(g.degree(1), 1);
        assert!(g.neighbors(0).next().unwrap().weight > 0.0);
        let g = build_graph(line(&[0.0, 0.15]), &k, &c, 0.1).unwrap();
        assert_eq!(g.directed_edge_count(), 0);
    }

    fn same_rows(a: &Graph, b: &Graph) {
        assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            assert_eq!(a.row(i), b.row(i), "row {i}");
        }
    }

    #[test]
    fn grid_equals_brute_force() {
        let (k, c) = tri();
        let specs = [
            ManifoldSpec::unit_sphere(),
            ManifoldSpec::FlatTorus { periods: vec![1.0, 1.0] },
            ManifoldSpec::EuclideanBox { lower: vec![0.0, 0.0], upper: vec![2.0, 1.0] },
        ];
        for spec in &specs {
            for seed in 0..20u64 {
                let n = 20 + (seed as usize * 37) % 181;
                let cloud = Arc::new(sample_points(spec, n, Density::Uniform, seed).unwrap());
                for eps in [0.07, 0.5] {
                    same_rows(
                        &build_graph(cloud.clone(), &k, &c, eps).unwrap(),
                        &build_graph_brute_force(cloud.clone(), &k, &c, eps).unwrap(),
                    );
                }
            }
        }
    }

    #[test]
    fn neighbor_lists_are_symmetric() {
        let (k, c) = tri();
        let cloud = sample_points(&ManifoldSpec::unit_sphere(), 300, Density::Uniform, 5).unwrap();
        let g = build_graph(cloud, &k, &c, 0.3).unwrap();
        for i in 0..g.len() {
            for nb in g.neighbors(i) {
                let back = g.neighbors(nb.index).find(|b| b.index == i).expect("symmetric");
                assert_eq!(back.dtilde, nb.dtilde);
                assert_eq!(back.weight, nb.weight);
                assert!(nb.dtilde <= 0.3);
            }
        }
    }

    #[test]
    fn boundary_threshold_and_marking() {
        assert_abs_diff_eq!(boundary_threshold(0.5, 0.1, 0.5), 7.9057e-3, epsilon = 1e-7);
        let cloud = line(&[0.0, 0.5, 1.0]);
        let on = BoundarySpec::PointSet { points: vec![vec![0.5]] };
        let m = mark_boundary(&cloud, &on, 0.5, 0.1, 0.5).unwrap();
        assert_eq!(m.mask, vec![false, true, false]);
        let far = BoundarySpec::PointSet { points: vec![vec![0.25]] };
        assert_eq!(mark_boundary(&cloud, &far, 0.5, 0.1, 0.5).unwrap().count(), 0);
    }

    #[test]
    fn schedule_values() {
        let s = epsilon_schedule(1000, 2, 0.5, 1.0, 1.0).unwrap();
        let by_hand = (2f64.sqrt() * (1000f64.ln() / 1000.0).sqrt()).powf(2.0 / 3.0);
        assert_abs_diff_eq!(s.epsilon_n, by_hand, epsilon = 1e-15);
        assert_abs_diff_eq!(s.epsilon_n, 0.2400, epsilon = 1e-4);
        let doubled = epsilon_schedule(1000, 2, 0.5, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(doubled.epsilon_n / s.epsilon_n, 2f64.powf(1.0 / 1.5), epsilon = 1e-12);
        assert!(epsilon_schedule(2, 2, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn covering() {
        let s = ManifoldSpec::unit_sphere();
        let single = sample_points(&s, 1, Density::Uniform, 1).unwrap();
        let c = covering_check(&single, 0.5, 0.5, 0.5, 1000).unwrap();
        assert!(!c.holds);
        assert!(c.worst_gap > 3.0, "single point leaves a gap near pi, got {}", c.worst_gap);
        assert!(covering_check(&single, 0.5, 0.5, 0.5, 10).is_err());

        let dense = sample_points(&s, 20000, Density::Uniform, 1).unwrap();
        let c = covering_check(&dense, 0.5, 2.0, 0.5, 2000).unwrap();
        assert!(c.holds, "{c:?}");
    }

    #[test]
    fn hausdorff_cases() {
        let (k, c) = tri();
        let s = ManifoldSpec::unit_sphere();
        let north = vec![0.0, 0.0, 1.0];
        let near = vec![0.01f64.sin(), 0.0, 0.01f64.cos()];
        let cloud = PointCloud::from_coords(s.clone(), [north.clone(), near.clone(), vec![0.0, 0.0, -1.0]].concat()).unwrap();
        let g = build_graph(cloud, &k, &c, 0.1).unwrap();
        let g0 = g.clone().with_boundary_mask(vec![true, false, false]).unwrap();
        assert_eq!(hausdorff_boundary(std::slice::from_ref(&north), &g0).unwrap(), 0.0);
        let g1 = g.clone().with_boundary_mask(vec![true, true, false]).unwrap();
        assert_abs_diff_eq!(hausdorff_boundary(std::slice::from_ref(&north), &g1).unwrap(), 0.01, epsilon = 1e-15);
        assert!(hausdorff_boundary(&[north], &g).is_err());
    }
}
