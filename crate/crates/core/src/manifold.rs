//! Closed-form manifolds: round spheres, flat tori and Euclidean boxes.
//!
//! Each manifold provides the intrinsic geodesic distance `d_M`, the
//! extrinsic surrogate `d̃` used by the graph weights, uniform and
//! radially-biased sampling, and distances to boundary sets.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual allowed when checking that a point lies on a manifold.
pub const ON_MANIFOLD_TOL: f64 = 1e-12;

/// Points are drawn in blocks, each block from its own RNG stream, so the
/// cloud does not depend on how the blocks are scheduled.
const SAMPLE_BLOCK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ManifoldSpec {
    /// Round sphere of intrinsic dimension `dim` and radius `radius`,
    /// embedded in `R^(dim+1)` and centered at the origin.
    Sphere { dim: usize, radius: f64 },
    /// Flat torus `Π [0, p_k)` with the given periods.
    FlatTorus { periods: Vec<f64> },
    /// Axis-aligned box `Π [lower_k, upper_k]` with the Euclidean metric.
    EuclideanBox { lower: Vec<f64>, upper: Vec<f64> },
}

impl ManifoldSpec {
    pub fn unit_sphere() -> Self {
        ManifoldSpec::Sphere { dim: 2, radius: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ManifoldSpec::Sphere { dim, radius } => {
                if *dim < 1 {
                    return Err(Error::Manifold("sphere dimension must be at least 1".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::Manifold(format!("sphere radius must be positive, got {radius}")));
                }
            }
            ManifoldSpec::FlatTorus { periods } => {
                if periods.is_empty() {
                    return Err(Error::Manifold("torus needs at least one period".into()));
                }
                if let Some(p) = periods.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
                    return Err(Error::Manifold(format!("torus periods must be positive, got {p}")));
                }
            }
            ManifoldSpec::EuclideanBox { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::Manifold("box corners must be non-empty and of equal length".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(u - l > 0.0 && (u - l).is_finite())) {
                    return Err(Error::Manifold("box extents must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Dimension `m` of the ambient coordinates.
    pub fn embedding_dim(&self) -> usize {
        match self {
            ManifoldSpec::Sphere { dim, .. } => dim + 1,
            ManifoldSpec::FlatTorus { periods } => periods.len(),
            ManifoldSpec::EuclideanBox { lower, .. } => lower.len(),
        }
    }

    /// Intrinsic dimension `m*`.
    pub fn intrinsic_dim(&self) -> usize {
        match self {
            ManifoldSpec::Sphere { dim, .. } => *dim,
            other => other.embedding_dim(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            ManifoldSpec::Sphere { radius, .. } => PI * radius,
            ManifoldSpec::FlatTorus { periods } => periods.iter().map(|p| (p / 2.0).powi(2)).sum::<f64>().sqrt(),
            ManifoldSpec::EuclideanBox { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| (u - l).powi(2)).sum::<f64>().sqrt()
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            ManifoldSpec::Sphere { dim, radius } => {
                // |S^k| = 2π^((k+1)/2) / Γ((k+1)/2) · R^k
                let k = *dim as f64;
                2.0 * PI.powf((k + 1.0) / 2.0) / gamma_half_integer(*dim + 1) * radius.powf(k)
            }
            ManifoldSpec::FlatTorus { periods } => periods.iter().product(),
            ManifoldSpec::EuclideanBox { lower, upper } => lower.iter().zip(upper).map(|(l, u)| u - l).product(),
        }
    }

    /// A canonical interior point: the north pole of a sphere, the center of
    /// a torus or box.
    pub fn canonical_point(&self) -> Vec<f64> {
        match self {
            ManifoldSpec::Sphere { dim, radius } => {
                let mut p = vec![0.0; dim + 1];
                p[*dim] = *radius;
                p
            }
            ManifoldSpec::FlatTorus { periods } => periods.iter().map(|p| p / 2.0).collect(),
            ManifoldSpec::EuclideanBox { lower, upper } => lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect(),
        }
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.embedding_dim() {
            return Err(Error::Manifold(format!(
                "point has {} coordinates, manifold embeds in dimension {}",
                x.len(),
                self.embedding_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Manifold("point has non-finite coordinates".into()));
        }
        match self {
            ManifoldSpec::Sphere { radius, .. } => {
                let r = norm(x);
                if (r - radius).abs() >= ON_MANIFOLD_TOL * radius.max(1.0) {
                    return Err(Error::Manifold(format!("point norm {r} is off the sphere of radius {radius}")));
                }
            }
            ManifoldSpec::FlatTorus { periods } => {
                for (v, p) in x.iter().zip(periods) {
                    if *v < -ON_MANIFOLD_TOL || *v > p + ON_MANIFOLD_TOL {
                        return Err(Error::Manifold(format!("coordinate {v} outside the fundamental domain [0, {p})")));
                    }
                }
            }
            ManifoldSpec::EuclideanBox { lower, upper } => {
                for ((v, l), u) in x.iter().zip(lower).zip(upper) {
                    if *v < l - ON_MANIFOLD_TOL || *v > u + ON_MANIFOLD_TOL {
                        return Err(Error::Manifold(format!("coordinate {v} outside the box [{l}, {u}]")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Intrinsic distance without input validation.
    #[inline]
    pub fn geodesic_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            ManifoldSpec::Sphere { radius, .. } => {
                // 2·atan2(|x−y|, |x+y|) equals arccos(<x,y>/R²) but keeps full
                // precision for nearby and antipodal pairs.
                let (mut diff, mut sum) = (0.0, 0.0);
                for (a, b) in x.iter().zip(y) {
                    diff += (a - b) * (a - b);
                    sum += (a + b) * (a + b);
                }
                2.0 * radius * diff.sqrt().atan2(sum.sqrt())
            }
            ManifoldSpec::FlatTorus { periods } => {
                let mut acc = 0.0;
                for ((a, b), p) in x.iter().zip(y).zip(periods) {
                    let d = (a - b).abs().rem_euclid(*p);
                    let d = d.min(p - d);
                    acc += d * d;
                }
                acc.sqrt()
            }
            ManifoldSpec::EuclideanBox { .. } => euclid(x, y),
        }
    }

    /// Extrinsic distance `d̃` without input validation: the chord on the
    /// sphere, the exact metric on torus and box.
    #[inline]
    pub fn dtilde_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            ManifoldSpec::Sphere { .. } => euclid(x, y),
            _ => self.geodesic_unchecked(x, y),
        }
    }

    pub fn geodesic_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.geodesic_unchecked(x, y))
    }

    pub fn extrinsic_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.dtilde_unchecked(x, y))
    }

    /// Maps an intrinsic distance to the matching extrinsic one. On the
    /// sphere the chord is a monotone function of the arc, so this also maps
    /// `d_M(x, Γ)` to `d̃(x, Γ)`.
    pub fn dtilde_from_geodesic(&self, d: f64) -> f64 {
        match self {
            ManifoldSpec::Sphere { radius, .. } => 2.0 * radius * (d / (2.0 * radius)).min(PI / 2.0).sin(),
            _ => d,
        }
    }

    /// Local accuracy of `d̃` on pairs inside the kernel support.
    ///
    /// On a sphere of radius `R`, `d_M − chord ≤ d_M³ / (24 R²)`; over pairs
    /// with `d_M ≤ 1.1·ε·r_eta` this gives `C_M = (1.1·r_eta)³/(24 R²)` with
    /// exponent `ξ = 2`. Torus and box have `C_M = 0`.
    pub fn local_dtilde_error(&self, epsilon: f64, r_eta: f64) -> DtildeError {
        match self {
            ManifoldSpec::Sphere { radius, .. } => {
                let c_m = (1.1 * r_eta).powi(3) / (24.0 * radius * radius);
                DtildeError { c_m, xi: 2.0, bound: c_m * epsilon.powi(3) }
            }
            _ => DtildeError { c_m: 0.0, xi: 2.0, bound: 0.0 },
        }
    }

    /// Projects arbitrary coordinates onto the manifold (normalization on
    /// the sphere, wrapping on the torus, clamping in the box).
    pub fn project(&self, x: &mut [f64]) {
        match self {
            ManifoldSpec::Sphere { radius, .. } => {
                let r = norm(x);
                if r > 0.0 {
                    x.iter_mut().for_each(|v| *v *= radius / r);
                } else {
                    let last = x.len() - 1;
                    x.iter_mut().for_each(|v| *v = 0.0);
                    x[last] = *radius;
                }
            }
            ManifoldSpec::FlatTorus { periods } => {
                for (v, p) in x.iter_mut().zip(periods) {
                    *v = v.rem_euclid(*p);
                    if *v >= *p {
                        *v = 0.0;
                    }
                }
            }
            ManifoldSpec::EuclideanBox { lower, upper } => {
                for ((v, l), u) in x.iter_mut().zip(lower).zip(upper) {
                    *v = v.clamp(*l, *u);
                }
            }
        }
    }

    fn draw_uniform(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            ManifoldSpec::Sphere { radius, .. } => loop {
                for v in out.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let r = norm(out);
                if r > 1e-12 {
                    out.iter_mut().for_each(|v| *v *= radius / r);
                    return;
                }
            },
            ManifoldSpec::FlatTorus { periods } => {
                for (v, p) in out.iter_mut().zip(periods) {
                    *v = rng.random::<f64>() * p;
                }
            }
            ManifoldSpec::EuclideanBox { lower, upper } => {
                for ((v, l), u) in out.iter_mut().zip(lower).zip(upper) {
                    *v = l + rng.random::<f64>() * (u - l);
                }
            }
        }
    }

    /// Deterministic, well-spread points on the manifold: a Fibonacci lattice
    /// on the 2-sphere, a regular cell-centered lattice on tori and boxes.
    /// Higher-dimensional spheres fall back to a fixed-seed uniform draw.
    pub fn quasi_uniform_points(&self, count: usize) -> Vec<f64> {
        let m = self.embedding_dim();
        match self {
            ManifoldSpec::Sphere { dim: 2, radius } => {
                let golden = PI * (3.0 - 5f64.sqrt());
                let mut out = Vec::with_capacity(count * 3);
                for i in 0..count {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * i as f64;
                    out.extend_from_slice(&[radius * r * phi.cos(), radius * r * phi.sin(), radius * z]);
                }
                out
            }
            ManifoldSpec::Sphere { .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f1b0);
                let mut out = vec![0.0; count * m];
                for chunk in out.chunks_mut(m) {
                    self.draw_uniform(&mut rng, chunk);
                }
                out
            }
            ManifoldSpec::FlatTorus { periods } => lattice(periods.iter().map(|p| (0.0, *p)).collect(), count),
            ManifoldSpec::EuclideanBox { lower, upper } => {
                lattice(lower.iter().zip(upper).map(|(l, u)| (*l, *u)).collect(), count)
            }
        }
    }
}

fn lattice(ranges: Vec<(f64, f64)>, count: usize) -> Vec<f64> {
    let m = ranges.len();
    let per_axis = (count.max(1) as f64).powf(1.0 / m as f64).ceil().max(1.0) as usize;
    let total = per_axis.pow(m as u32);
    let mut out = Vec::with_capacity(total * m);
    for flat in 0..total {
        let mut rest = flat;
        for (lo, hi) in &ranges {
            let k = rest % per_axis;
            rest /= per_axis;
            out.push(lo + (k as f64 + 0.5) * (hi - lo) / per_axis as f64);
        }
    }
    out
}

fn gamma_half_integer(twice: usize) -> f64 {
    // Γ(twice/2) for a positive integer `twice`.
    if twice.is_multiple_of(2) {
        (1..twice / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < twice as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

#[inline]
pub(crate) fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

#[inline]
fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Local bound `|d̃ − d_M| ≤ C_M·ε^(1+ξ)` on kernel-support pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtildeError {
    pub c_m: f64,
    pub xi: f64,
    /// `C_M·ε^(1+ξ)` at the queried ε.
    pub bound: f64,
}

/// Sampling density on a manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "density", rename_all = "kebab-case")]
pub enum Density {
    #[default]
    Uniform,
    /// Unnormalized density `floor + (1 − floor)·max(0, 1 − d_M(x, c)/width)`
    /// around the canonical point `c`, sampled by rejection.
    RadialBump { floor: f64, width: f64 },
}

impl Density {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Density::Uniform => Ok(()),
            Density::RadialBump { floor, width } => {
                if !(floor > 0.0) {
                    return Err(Error::Density(format!("density infimum must be positive, floor = {floor}")));
                }
                if floor > 1.0 || !(width > 0.0) {
                    return Err(Error::Density(format!("radial bump needs floor in (0, 1] and width > 0, got ({floor}, {width})")));
                }
                Ok(())
            }
        }
    }
}

/// Vertex coordinates sampled from a manifold, stored row-major `n × m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub spec: ManifoldSpec,
    pub dim: usize,
    pub coords: Vec<f64>,
    pub seed: u64,
    pub density: Density,
    /// Fraction of proposals accepted by rejection sampling (1 for uniform).
    pub acceptance_rate: f64,
}

impl PointCloud {
    /// Wraps explicit coordinates, checking that every row is on the manifold.
    pub fn from_coords(spec: ManifoldSpec, coords: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let dim = spec.embedding_dim();
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::Manifold(format!("{} coordinates do not split into rows of {dim}", coords.len())));
        }
        for row in coords.chunks(dim) {
            spec.check_point(row)?;
        }
        Ok(PointCloud { spec, dim, coords, seed: 0, density: Density::Uniform, acceptance_rate: 1.0 })
    }

    /// Wraps coordinates that are already known to be on the manifold.
    pub(crate) fn raw(spec: ManifoldSpec, coords: Vec<f64>) -> Self {
        let dim = spec.embedding_dim();
        PointCloud { spec, dim, coords, seed: 0, density: Density::Uniform, acceptance_rate: 1.0 }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::Chunks<'_, f64> {
        self.coords.chunks(self.dim)
    }
}

/// RNG for stream `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `n` i.i.d. points from `density` on `spec`. Deterministic in `seed`.
pub fn sample_points(spec: &ManifoldSpec, n: usize, density: Density, seed: u64) -> Result<PointCloud> {
    spec.validate()?;
    density.validate()?;
    if n == 0 {
        return Err(Error::Manifold("cannot sample an empty point cloud".into()));
    }
    let m = spec.embedding_dim();
    let center = spec.canonical_point();
    let blocks: Vec<(Vec<f64>, u64, u64)> = (0..n.div_ceil(SAMPLE_BLOCK))
        .into_par_iter()
        .map(|b| {
            let count = SAMPLE_BLOCK.min(n - b * SAMPLE_BLOCK);
            let mut rng = stream_rng(seed, b as u64);
            let mut out = vec![0.0; count * m];
            let (mut proposed, mut accepted) = (0u64, 0u64);
            for row in out.chunks_mut(m) {
                loop {
                    spec.draw_uniform(&mut rng, row);
                    proposed += 1;
                    let keep = match density {
                        Density::Uniform => true,
                        Density::RadialBump { floor, width } => {
                            let bump = (1.0 - spec.geodesic_unchecked(row, &center) / width).max(0.0);
                            rng.random::<f64>() < floor + (1.0 - floor) * bump
                        }
                    };
                    if keep {
                        accepted += 1;
                        break;
                    }
                }
            }
            (out, proposed, accepted)
        })
        .collect();
    let (mut coords, mut proposed, mut accepted) = (Vec::with_capacity(n * m), 0, 0);
    for (block, p, a) in blocks {
        coords.extend_from_slice(&block);
        proposed += p;
        accepted += a;
    }
    Ok(PointCloud {
        spec: spec.clone(),
        dim: m,
        coords,
        seed,
        density,
        acceptance_rate: accepted as f64 / proposed as f64,
    })
}

/// Boundary set `Γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundarySpec {
    /// Finite set of anchor points.
    PointSet { points: Vec<Vec<f64>> },
    /// Geodesic circle `{x : d_M(x, center) = radius}`.
    Cap { center: Vec<f64>, radius: f64 },
    /// Sublevel set `{x : x[axis] ≤ threshold}` of a coordinate function.
    /// Distances are taken to a sample of the level set with the given
    /// spacing.
    Sublevel { axis: usize, threshold: f64, spacing: f64 },
}

impl BoundarySpec {
    pub fn validate(&self, spec: &ManifoldSpec) -> Result<()> {
        match self {
            BoundarySpec::PointSet { points } => {
                if points.is_empty() {
                    return Err(Error::Boundary("empty boundary point set".into()));
                }
                for p in points {
                    spec.check_point(p).map_err(|e| Error::Boundary(e.to_string()))?;
                }
            }
            BoundarySpec::Cap { center, radius } => {
                spec.check_point(center).map_err(|e| Error::Boundary(e.to_string()))?;
                if !(*radius >= 0.0 && radius.is_finite()) {
                    return Err(Error::Boundary(format!("cap radius must be non-negative, got {radius}")));
                }
            }
            BoundarySpec::Sublevel { axis, spacing, .. } => {
                if *axis >= spec.embedding_dim() {
                    return Err(Error::Boundary(format!("axis {axis} out of range")));
                }
                if !(*spacing > 0.0) {
                    return Err(Error::Boundary("sublevel spacing must be positive".into()));
                }
                if self.level_set_sample(spec).is_empty() {
                    return Err(Error::Boundary("sublevel set does not meet the manifold".into()));
                }
            }
        }
        Ok(())
    }

    /// Points on the level set `{x[axis] = threshold}` at roughly `spacing`.
    fn level_set_sample(&self, spec: &ManifoldSpec) -> Vec<Vec<f64>> {
        let BoundarySpec::Sublevel { axis, threshold, spacing } = self else {
            return Vec::new();
        };
        let m = spec.embedding_dim();
        let count = ((spec.volume() / spacing.powi(spec.intrinsic_dim() as i32)).ceil() as usize).clamp(16, 4_000_000);
        let mut out = Vec::new();
        match spec {
            ManifoldSpec::Sphere { radius, .. } => {
                if threshold.abs() > *radius {
                    return out;
                }
                let ring = (radius * radius - threshold * threshold).sqrt();
                if m == 3 {
                    // a circle: sample it directly
                    let steps = ((2.0 * PI * ring / spacing).ceil() as usize).max(1);
                    let others: Vec<usize> = (0..m).filter(|k| k != axis).collect();
                    for s in 0..steps {
                        let phi = 2.0 * PI * s as f64 / steps as f64;
                        let mut p = vec![0.0; m];
                        p[*axis] = *threshold;
                        p[others[0]] = ring * phi.cos();
                        p[others[1]] = ring * phi.sin();
                        out.push(p);
                    }
                    return out;
                }
                for q in spec.quasi_uniform_points(count).chunks(m) {
                    let rest: f64 = q.iter().enumerate().filter(|(k, _)| k != axis).map(|(_, v)| v * v).sum::<f64>().sqrt();
                    if rest <= 0.0 {
                        continue;
                    }
                    let mut p: Vec<f64> = q.iter().map(|v| v * ring / rest).collect();
                    p[*axis] = *threshold;
                    out.push(p);
                }
            }
            ManifoldSpec::FlatTorus { periods } => {
                let t = threshold.rem_euclid(periods[*axis]);
                for q in spec.quasi_uniform_points(count).chunks(m) {
                    let mut p = q.to_vec();
                    p[*axis] = t;
                    out.push(p);
                }
            }
            ManifoldSpec::EuclideanBox { lower, upper } => {
                if *threshold < lower[*axis] || *threshold > upper[*axis] {
                    return out;
                }
                for q in spec.quasi_uniform_points(count).chunks(m) {
                    let mut p = q.to_vec();
                    p[*axis] = *threshold;
                    out.push(p);
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self {
            BoundarySpec::Sublevel { axis, threshold, .. } => x[*axis] <= *threshold,
            _ => false,
        }
    }

    /// Intrinsic distance `d_M(x, Γ)` without input validation. Use
    /// [`BoundarySpec::resolve`] when evaluating many points.
    pub fn distance_unchecked(&self, spec: &ManifoldSpec, x: &[f64]) -> f64 {
        self.resolve(spec).distance(x)
    }

    /// Precomputes whatever the distance evaluation needs (the level-set
    /// sample for sublevel sets).
    pub fn resolve<'a>(&'a self, spec: &'a ManifoldSpec) -> BoundaryDistance<'a> {
        BoundaryDistance { spec, gamma: self, level: self.level_set_sample(spec) }
    }

    /// A sample of `Γ` used for Hausdorff comparisons. Point sets return their
    /// anchors; caps return the circle at roughly `spacing`; sublevel sets
    /// return the level set plus quasi-uniform points inside the sublevel.
    pub fn sample(&self, spec: &ManifoldSpec, spacing: f64) -> Vec<Vec<f64>> {
        match self {
            BoundarySpec::PointSet { points } => points.clone(),
            BoundarySpec::Cap { center, radius } => {
                if *radius == 0.0 {
                    return vec![center.clone()];
                }
                let m = spec.embedding_dim();
                let count =
                    ((spec.volume() / spacing.powi(spec.intrinsic_dim() as i32)).ceil() as usize).clamp(64, 4_000_000);
                if matches!(spec, ManifoldSpec::Sphere { dim: 2, .. }) {
                    return sphere_circle(spec, center, *radius, spacing);
                }
                // General manifolds: push quasi-uniform points radially onto the circle.
                let mut out = Vec::new();
                for q in spec.quasi_uniform_points(count).chunks(m) {
                    let d = spec.geodesic_unchecked(q, center);
                    if d <= 0.0 || (d - radius).abs() > spacing {
                        continue;
                    }
                    if let Some(p) = radial_point(spec, center, q, *radius) {
                        out.push(p);
                    }
                }
                if out.is_empty() {
                    out.push(radial_point(spec, center, &spec.canonical_point(), *radius).unwrap_or_else(|| center.clone()));
                }
                out
            }
            BoundarySpec::Sublevel { .. } => {
                let m = spec.embedding_dim();
                let count = ((spec.volume() / spacing.powi(spec.intrinsic_dim() as i32)).ceil() as usize).clamp(64, 4_000_000);
                let mut out = self.level_set_sample(spec);
                out.extend(spec.quasi_uniform_points(count).chunks(m).filter(|q| self.contains(q)).map(|q| q.to_vec()));
                out
            }
        }
    }
}

fn sphere_circle(spec: &ManifoldSpec, center: &[f64], radius: f64, spacing: f64) -> Vec<Vec<f64>> {
    let ManifoldSpec::Sphere { radius: big_r, .. } = spec else { unreachable!() };
    let c: Vec<f64> = center.iter().map(|v| v / big_r).collect();
    // orthonormal frame (c, u, v)
    let pick = if c[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let dot = pick.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
    let mut u: Vec<f64> = pick.iter().zip(&c).map(|(a, b)| a - dot * b).collect();
    let un = norm(&u);
    u.iter_mut().for_each(|x| *x /= un);
    let v = [c[1] * u[2] - c[2] * u[1], c[2] * u[0] - c[0] * u[2], c[0] * u[1] - c[1] * u[0]];
    let angle = radius / big_r;
    let ring = big_r * angle.sin();
    let steps = ((2.0 * PI * ring / spacing).ceil() as usize).max(1);
    (0..steps)
        .map(|s| {
            let phi = 2.0 * PI * s as f64 / steps as f64;
            let mut p: Vec<f64> = (0..3)
                .map(|k| big_r * angle.cos() * c[k] + ring * (phi.cos() * u[k] + phi.sin() * v[k]))
                .collect();
            spec.project(&mut p);
            p
        })
        .collect()
}

/// Point at geodesic distance `radius` from `center` in the direction of `toward`.
fn radial_point(spec: &ManifoldSpec, center: &[f64], toward: &[f64], radius: f64) -> Option<Vec<f64>> {
    match spec {
        ManifoldSpec::Sphere { radius: big_r, .. } => {
            let c: Vec<f64> = center.iter().map(|v| v / big_r).collect();
            let t: Vec<f64> = toward.iter().map(|v| v / big_r).collect();
            let dot: f64 = c.iter().zip(&t).map(|(a, b)| a * b).sum();
            let mut dir: Vec<f64> = t.iter().zip(&c).map(|(a, b)| a - dot * b).collect();
            let dn = norm(&dir);
            if dn < 1e-12 {
                return None;
            }
            dir.iter_mut().for_each(|v| *v /= dn);
            let ang = radius / big_r;
            let mut p: Vec<f64> = c.iter().zip(&dir).map(|(a, b)| big_r * (ang.cos() * a + ang.sin() * b)).collect();
            spec.project(&mut p);
            Some(p)
        }
        ManifoldSpec::FlatTorus { periods } => {
            let delta: Vec<f64> = toward
                .iter()
                .zip(center)
                .zip(periods)
                .map(|((t, c), p)| {
                    let d = (t - c).rem_euclid(*p);
                    if d > p / 2.0 { d - p } else { d }
                })
                .collect();
            let dn = norm(&delta);
            if dn < 1e-12 {
                return None;
            }
            let mut p: Vec<f64> = center.iter().zip(&delta).map(|(c, d)| c + d * radius / dn).collect();
            spec.project(&mut p);
            Some(p)
        }
        ManifoldSpec::EuclideanBox { .. } => {
            let delta: Vec<f64> = toward.iter().zip(center).map(|(t, c)| t - c).collect();
            let dn = norm(&delta);
            if dn < 1e-12 {
                return None;
            }
            let p: Vec<f64> = center.iter().zip(&delta).map(|(c, d)| c + d * radius / dn).collect();
            spec.check_point(&p).ok().map(|_| p)
        }
    }
}

/// Distance evaluator for one boundary set on one manifold.
pub struct BoundaryDistance<'a> {
    spec: &'a ManifoldSpec,
    gamma: &'a BoundarySpec,
    level: Vec<Vec<f64>>,
}

impl BoundaryDistance<'_> {
    /// `d_M(x, Γ)`.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let spec = self.spec;
        match self.gamma {
            BoundarySpec::PointSet { points } => {
                points.iter().map(|p| spec.geodesic_unchecked(x, p)).fold(f64::INFINITY, f64::min)
            }
            BoundarySpec::Cap { center, radius } => (spec.geodesic_unchecked(x, center) - radius).abs(),
            BoundarySpec::Sublevel { .. } => {
                if self.gamma.contains(x) {
                    return 0.0;
                }
                self.level.iter().map(|p| spec.geodesic_unchecked(x, p)).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// `d̃(x, Γ)`, through the monotone arc-to-chord map.
    pub fn dtilde(&self, x: &[f64]) -> f64 {
        self.spec.dtilde_from_geodesic(self.distance(x))
    }
}

/// Intrinsic distance from `x` to the boundary set `gamma`.
pub fn distance_to_boundary(spec: &ManifoldSpec, gamma: &BoundarySpec, x: &[f64]) -> Result<f64> {
    spec.check_point(x)?;
    gamma.validate(spec)?;
    Ok(gamma.distance_unchecked(spec, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn torus() -> ManifoldSpec {
        ManifoldSpec::FlatTorus { periods: vec![1.0, 1.0] }
    }

    #[test]
    fn sphere_distances() {
        let s = ManifoldSpec::unit_sphere();
        let (x, y, z) = ([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(s.geodesic_distance(&x, &y).unwrap(), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(s.geodesic_distance(&x, &z).unwrap(), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.extrinsic_distance(&x, &y).unwrap(), 2.0, epsilon = 1e-15);
        let w = [0.1f64.cos(), 0.1f64.sin(), 0.0];
        assert_abs_diff_eq!(s.geodesic_distance(&x, &w).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(s.extrinsic_distance(&x, &w).unwrap(), 2.0 * 0.05f64.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(2.0 * 0.05f64.sin(), 0.0999583, epsilon = 1e-7);
        assert_eq!(s.geodesic_distance(&x, &x).unwrap(), 0.0);
        assert!(s.geodesic_distance(&[1.0, 1.0, 0.0], &x).is_err());
    }

    #[test]
    fn torus_wraps() {
        let t = torus();
        assert_abs_diff_eq!(t.geodesic_distance(&[0.05, 0.0], &[0.95, 0.0]).unwrap(), 0.10, epsilon = 1e-12);
        assert_eq!(
            t.extrinsic_distance(&[0.05, 0.3], &[0.95, 0.9]).unwrap(),
            t.geodesic_distance(&[0.05, 0.3], &[0.95, 0.9]).unwrap()
        );
        assert!(t.geodesic_distance(&[1.5, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn local_dtilde_bounds() {
        let s = ManifoldSpec::unit_sphere();
        assert_abs_diff_eq!(s.local_dtilde_error(0.1, 1.0).bound, 0.11f64.powi(3) / 24.0, epsilon = 1e-18);
        assert_abs_diff_eq!(s.local_dtilde_error(0.1, 1.0).bound, 5.546e-5, epsilon = 1e-8);
        assert_abs_diff_eq!(s.local_dtilde_error(1.0, 1.0).bound, 0.05546, epsilon = 1e-5);
        assert_eq!(torus().local_dtilde_error(0.1, 1.0).c_m, 0.0);
    }

    #[test]
    fn boundary_distances() {
        let s = ManifoldSpec::unit_sphere();
        let north = vec![0.0, 0.0, 1.0];
        let south = [0.0, 0.0, -1.0];
        let pole = BoundarySpec::PointSet { points: vec![north.clone()] };
        assert_abs_diff_eq!(distance_to_boundary(&s, &pole, &south).unwrap(), PI, epsilon = 1e-15);
        assert_eq!(distance_to_boundary(&s, &pole, &north).unwrap(), 0.0);
        let equator = BoundarySpec::Cap { center: north.clone(), radius: PI / 2.0 };
        assert_abs_diff_eq!(distance_to_boundary(&s, &equator, &north).unwrap(), PI / 2.0, epsilon = 1e-15);
        let empty = BoundarySpec::PointSet { points: vec![] };
        assert!(distance_to_boundary(&s, &empty, &north).is_err());

        let t = torus();
        let pts = BoundarySpec::PointSet { points: vec![vec![0.2, 0.2], vec![0.7, 0.9]] };
        assert_eq!(distance_to_boundary(&t, &pts, &[0.7, 0.9]).unwrap(), 0.0);
    }

    #[test]
    fn sublevel_distance_on_box() {
        let b = ManifoldSpec::EuclideanBox { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] };
        let g = BoundarySpec::Sublevel { axis: 0, threshold: 0.25, spacing: 0.01 };
        g.validate(&b).unwrap();
        assert_eq!(g.distance_unchecked(&b, &[0.1, 0.5]), 0.0);
        assert_abs_diff_eq!(g.distance_unchecked(&b, &[0.75, 0.5]), 0.5, epsilon = 1e-2);
    }

    #[test]
    fn cap_sample_lies_on_circle() {
        let s = ManifoldSpec::unit_sphere();
        let center = vec![0.0, 0.0, 1.0];
        let cap = BoundarySpec::Cap { center: center.clone(), radius: 0.3 };
        let pts = cap.sample(&s, 0.01);
        assert!(pts.len() > 100);
        for p in &pts {
            s.check_point(p).unwrap();
            assert_abs_diff_eq!(s.geodesic_unchecked(p, &center), 0.3, epsilon = 1e-12);
        }
        let t = ManifoldSpec::FlatTorus { periods: vec![2.0, 2.0] };
        let cap = BoundarySpec::Cap { center: vec![1.0, 1.0], radius: 0.3 };
        for p in cap.sample(&t, 0.02) {
            assert_abs_diff_eq!(t.geodesic_unchecked(&p, &[1.0, 1.0]), 0.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_on_manifold() {
        let s = ManifoldSpec::unit_sphere();
        let a = sample_points(&s, 1000, Density::Uniform, 7).unwrap();
        let b = sample_points(&s, 1000, Density::Uniform, 7).unwrap();
        assert_eq!(a, b);
        let mut mean = [0.0; 3];
        for p in a.points() {
            s.check_point(p).unwrap();
            for k in 0..3 {
                mean[k] += p[k] / 1000.0;
            }
        }
        assert!(norm(&mean) < 0.1);

        let bx = ManifoldSpec::EuclideanBox { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] };
        let c = sample_points(&bx, 4, Density::Uniform, 3).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.coords.iter().all(|v| (0.0..=1.0).contains(v)));

        let c = sample_points(&torus(), 1, Density::Uniform, 11).unwrap();
        assert!(c.coords.iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn rejection_density() {
        let s = ManifoldSpec::unit_sphere();
        assert!(matches!(
            sample_points(&s, 10, Density::RadialBump { floor: 0.0, width: 1.0 }, 1),
            Err(Error::Density(_))
        ));
        let c = sample_points(&s, 4000, Density::RadialBump { floor: 0.2, width: 1.0 }, 1).unwrap();
        assert!(c.acceptance_rate < 1.0 && c.acceptance_rate > 0.2);
        let north = [0.0, 0.0, 1.0];
        let near = c.points().filter(|p| s.geodesic_unchecked(p, &north) < 0.5).count() as f64 / 4000.0;
        // uniform cap fraction is (1 − cos 0.5)/2 ≈ 0.061
        assert!(near > 0.1, "bump should over-sample the pole, got {near}");
    }

    #[test]
    fn sphere_volume_and_diameter() {
        assert_abs_diff_eq!(ManifoldSpec::unit_sphere().volume(), 4.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(ManifoldSpec::Sphere { dim: 1, radius: 1.0 }.volume(), 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(ManifoldSpec::Sphere { dim: 3, radius: 1.0 }.volume(), 2.0 * PI * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(torus().diameter(), 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn fibonacci_probes_cover_sphere() {
        let s = ManifoldSpec::unit_sphere();
        let pts = s.quasi_uniform_points(2000);
        for p in pts.chunks(3) {
            s.check_point(p).unwrap();
        }
    }
}
