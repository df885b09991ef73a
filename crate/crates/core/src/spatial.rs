//! Uniform cell-grid binning in embedding coordinates.
//!
//! The grid only produces candidates; callers filter them with the exact
//! metric. Distances in embedding space never exceed `d̃` (chord on the
//! sphere, periodic on the torus, Euclidean in the box), so every pair with
//! `d̃ ≤ r` shows up among the candidates of a radius-`r` query.

use crate::manifold::{ManifoldSpec, PointCloud};

#[derive(Debug, Clone)]
struct Axis {
    lo: f64,
    width: f64,
    cells: usize,
    periodic: bool,
}

impl Axis {
    #[inline]
    fn cell_of(&self, v: f64) -> usize {
        let k = ((v - self.lo) / self.width).floor();
        if self.periodic {
            (k as i64).rem_euclid(self.cells as i64) as usize
        } else {
            (k.max(0.0) as usize).min(self.cells - 1)
        }
    }

    /// Cell indices within `reach` cells of `c` (deduplicated).
    fn span(&self, c: usize, reach: usize, out: &mut Vec<usize>) {
        out.clear();
        if self.periodic {
            if 2 * reach + 1 >= self.cells {
                out.extend(0..self.cells);
            } else {
                let n = self.cells as i64;
                for o in -(reach as i64)..=(reach as i64) {
                    out.push((c as i64 + o).rem_euclid(n) as usize);
                }
            }
        } else {
            let lo = c.saturating_sub(reach);
            let hi = (c + reach).min(self.cells - 1);
            out.extend(lo..=hi);
        }
    }
}

/// Points of a cloud binned into a regular grid of cells.
#[derive(Debug, Clone)]
pub struct CellGrid {
    axes: Vec<Axis>,
    /// CSR layout: points of cell `c` are `order[start[c]..start[c+1]]`.
    start: Vec<usize>,
    order: Vec<u32>,
    dim: usize,
}

impl CellGrid {
    /// Bins `cloud` with cells of side at least `min_side`. The number of
    /// cells is capped near `4n` so tiny radii do not blow up memory.
    pub fn new(cloud: &PointCloud, min_side: f64) -> Self {
        let n = cloud.len();
        let extents: Vec<(f64, f64, bool)> = match &cloud.spec {
            ManifoldSpec::Sphere { dim, radius } => vec![(-radius, 2.0 * radius, false); dim + 1],
            ManifoldSpec::FlatTorus { periods } => periods.iter().map(|p| (0.0, *p, true)).collect(),
            ManifoldSpec::EuclideanBox { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| (*l, u - l, false)).collect()
            }
        };
        let m = extents.len();
        let budget = (4 * n + 64) as f64;
        let mut side = min_side.max(f64::MIN_POSITIVE);
        loop {
            let total: f64 = extents.iter().map(|(_, ext, _)| (ext / side).floor().max(1.0)).product();
            if total <= budget {
                break;
            }
            side *= 1.25;
        }
        let axes: Vec<Axis> = extents
            .iter()
            .map(|&(lo, ext, periodic)| {
                let cells = ((ext / side).floor() as usize).max(1);
                Axis { lo, width: ext / cells as f64, cells, periodic }
            })
            .collect();

        let mut key = Vec::with_capacity(n);
        for p in cloud.points() {
            key.push(linear(&axes, p));
        }
        let total: usize = axes.iter().map(|a| a.cells).product();
        let mut start = vec![0usize; total + 1];
        for &k in &key {
            start[k + 1] += 1;
        }
        for c in 0..total {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut order = vec![0u32; n];
        for (i, &k) in key.iter().enumerate() {
            order[fill[k]] = i as u32;
            fill[k] += 1;
        }
        CellGrid { axes, start, order, dim: m }
    }

    fn min_width(&self) -> f64 {
        self.axes.iter().map(|a| a.width).fold(f64::INFINITY, f64::min)
    }

    /// Calls `visit(j)` for every point whose cell lies within `radius` of
    /// the cell containing `q` along each axis.
    pub fn for_each_candidate(&self, q: &[f64], radius: f64, mut visit: impl FnMut(usize)) {
        let reach: Vec<usize> = self
            .axes
            .iter()
            .map(|a| {
                let r = (radius / a.width).ceil();
                if r.is_finite() { (r as usize).min(a.cells) } else { a.cells }
            })
            .collect();
        let mut spans: Vec<Vec<usize>> = vec![Vec::new(); self.dim];
        for (k, a) in self.axes.iter().enumerate() {
            a.span(a.cell_of(q[k]), reach[k], &mut spans[k]);
        }
        let mut idx = vec![0usize; self.dim];
        loop {
            let mut cell = 0usize;
            for k in (0..self.dim).rev() {
                cell = cell * self.axes[k].cells + spans[k][idx[k]];
            }
            for &j in &self.order[self.start[cell]..self.start[cell + 1]] {
                visit(j as usize);
            }
            let mut k = 0;
            loop {
                if k == self.dim {
                    return;
                }
                idx[k] += 1;
                if idx[k] < spans[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    /// Nearest point to `q` under `dist`, which must dominate the embedding
    /// distance used for binning. Returns `(index, distance)`.
    pub fn nearest(&self, q: &[f64], mut dist: impl FnMut(usize) -> f64) -> Option<(usize, f64)> {
        self.k_nearest(q, 1, &mut dist).into_iter().next()
    }

    /// The `k` nearest points to `q`, sorted by distance then index.
    pub fn k_nearest(&self, q: &[f64], k: usize, mut dist: impl FnMut(usize) -> f64) -> Vec<(usize, f64)> {
        let n = self.order.len();
        let k = k.min(n);
        if k == 0 {
            return Vec::new();
        }
        let mut radius = self.min_width();
        loop {
            let mut found: Vec<(usize, f64)> = Vec::new();
            self.for_each_candidate(q, radius, |j| {
                let d = dist(j);
                if d <= radius {
                    found.push((j, d));
                }
            });
            let exhaustive = self.axes.iter().all(|a| (radius / a.width).ceil() as usize >= a.cells);
            if found.len() >= k || exhaustive {
                if exhaustive && found.len() < k {
                    found.clear();
                    for j in 0..n {
                        found.push((j, dist(j)));
                    }
                }
                found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                found.truncate(k);
                return found;
            }
            radius *= 2.0;
        }
    }
}

fn linear(axes: &[Axis], p: &[f64]) -> usize {
    let mut key = 0usize;
    for (k, a) in axes.iter().enumerate().rev() {
        key = key * a.cells + a.cell_of(p[k]);
    }
    key
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{sample_points, Density};

    fn brute(cloud: &PointCloud, q: &[f64], k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> =
            cloud.points().enumerate().map(|(j, p)| (j, cloud.spec.dtilde_unchecked(q, p))).collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    #[test]
    fn knn_matches_brute_force() {
        for spec in [
            ManifoldSpec::unit_sphere(),
            ManifoldSpec::FlatTorus { periods: vec![1.0, 2.0] },
            ManifoldSpec::EuclideanBox { lower: vec![0.0, -1.0, 0.0], upper: vec![1.0, 1.0, 0.5] },
        ] {
            let cloud = sample_points(&spec, 500, Density::Uniform, 3).unwrap();
            let probes = sample_points(&spec, 50, Density::Uniform, 4).unwrap();
            let grid = CellGrid::new(&cloud, 0.05);
            for q in probes.points() {
                let got = grid.k_nearest(q, 7, |j| spec.dtilde_unchecked(q, cloud.point(j)));
                assert_eq!(got, brute(&cloud, q, 7));
            }
        }
    }

    #[test]
    fn candidates_cover_radius_ball() {
        let spec = ManifoldSpec::FlatTorus { periods: vec![1.0, 1.0] };
        let cloud = sample_points(&spec, 400, Density::Uniform, 9).unwrap();
        let grid = CellGrid::new(&cloud, 0.1);
        for i in 0..cloud.len() {
            let q = cloud.point(i);
            let mut seen = vec![false; cloud.len()];
            grid.for_each_candidate(q, 0.1, |j| seen[j] = true);
            for (j, p) in cloud.points().enumerate() {
                if spec.dtilde_unchecked(q, p) <= 0.1 {
                    assert!(seen[j]);
                }
            }
        }
    }
}
