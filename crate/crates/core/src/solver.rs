//! The non-local gradient and the explicit Euler scheme.
//!
//! Interior vertices follow
//! `f(x, t+Δt) = f(x, t) + Δt·(P̃(x) − |∇⁻f(x, t)|_∞)` with
//! `|∇⁻f(x)|_∞ = max(0, max_y J_ε(x, y)·(f(x) − f(y)))`; boundary vertices
//! stay at `f₀`. Under `Δt ≤ ε·C_η / sup η` every `c = Δt·J_ε ≤ 1`, and the
//! update is evaluated as `Δt·P̃ + min(f(x), min_y (1−c)·f(x) + c·f(y))`,
//! a minimum of non-negative combinations. That form is order-preserving in
//! floating point as well as in exact arithmetic.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernel::{cfl_bound, weight};
use crate::manifold::{stream_rng, BoundarySpec, ManifoldSpec, PointCloud};

/// Per-vertex values at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn new(values: Vec<f64>, time: f64) -> Self {
        Field { values, time }
    }
}

/// Closed-form scalar data on the embedding coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSpec {
    Constant { value: f64 },
    /// `offset + slope·x[axis]`.
    CoordinateRamp { axis: usize, offset: f64, slope: f64 },
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::Constant { value: 0.0 }
    }
}

impl FieldSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            FieldSpec::Constant { value } => value,
            FieldSpec::CoordinateRamp { axis, offset, slope } => offset + slope * x[axis],
        }
    }

    /// Lipschitz constant with respect to `d_M`. Coordinates are 1-Lipschitz
    /// on the sphere and in the box; on the torus a ramp jumps across the
    /// period, so it has no finite constant.
    pub fn lipschitz(&self, spec: &ManifoldSpec) -> f64 {
        match *self {
            FieldSpec::Constant { .. } => 0.0,
            FieldSpec::CoordinateRamp { slope: 0.0, .. } => 0.0,
            FieldSpec::CoordinateRamp { slope, .. } => match spec {
                ManifoldSpec::FlatTorus { .. } => f64::INFINITY,
                _ => slope.abs(),
            },
        }
    }

    pub fn sample(&self, cloud: &PointCloud) -> Result<Vec<f64>> {
        if let FieldSpec::CoordinateRamp { axis, .. } = self {
            if *axis >= cloud.dim {
                return Err(Error::Solver(format!("ramp axis {axis} out of range for dimension {}", cloud.dim)));
            }
        }
        Ok(cloud.points().map(|p| self.eval(p)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CflMode {
    #[default]
    StrictReject,
    AutoClamp,
}

/// Default steady-state tolerance, relative to `‖P̃‖_∞`.
pub const DEFAULT_STEADY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub cfl_mode: CflMode,
    #[serde(default = "default_steady_tol")]
    pub steady_tol: f64,
    #[serde(default)]
    pub stop_at_steady: bool,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_potential")]
    pub potential: FieldSpec,
    #[serde(default)]
    pub initial: FieldSpec,
}

fn default_steady_tol() -> f64 {
    DEFAULT_STEADY_TOL
}

fn default_snapshot_every() -> usize {
    1
}

fn default_potential() -> FieldSpec {
    FieldSpec::Constant { value: 1.0 }
}

impl SolverConfig {
    pub fn new(dt: f64, horizon: f64) -> Self {
        SolverConfig {
            dt,
            horizon,
            cfl_mode: CflMode::StrictReject,
            steady_tol: DEFAULT_STEADY_TOL,
            stop_at_steady: false,
            snapshot_every: 1,
            potential: default_potential(),
            initial: FieldSpec::default(),
        }
    }
}

/// `|∇⁻f(x)|_∞ = max(0, max_y J_ε(x, y)·(f(x) − f(y)))` over stored
/// neighbors; the zero floor is the `y = x` term.
pub fn nonlocal_gradient(graph: &Graph, values: &[f64], vertex: usize) -> f64 {
    let (targets, _, weights) = graph.row(vertex);
    let fx = values[vertex];
    let mut best = 0.0f64;
    for (&j, &w) in targets.iter().zip(weights) {
        let term = w * (fx - values[j as usize]);
        if term > best {
            best = term;
        }
    }
    best
}

/// The same operator evaluated over every vertex of the cloud, with weights
/// recomputed from coordinates instead of read from the graph.
pub fn nonlocal_gradient_brute_force(graph: &Graph, values: &[f64], vertex: usize) -> f64 {
    let cloud = graph.cloud();
    let (kernel, constants, eps) = (graph.kernel(), graph.constants(), graph.epsilon());
    let x = cloud.point(vertex);
    let mut best = 0.0f64;
    for y in 0..cloud.len() {
        let d = cloud.spec.dtilde_unchecked(x, cloud.point(y));
        let term = weight(constants, kernel, eps, d) * (values[vertex] - values[y]);
        if term > best {
            best = term;
        }
    }
    best
}

fn step_into(graph: &Graph, prev: &[f64], potential: &[f64], dt: f64, initial: &[f64], clamp: bool, next: &mut [f64]) {
    let mask = graph.boundary_mask();
    next.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, out)| {
        if mask[i] {
            *out = initial[i];
            return;
        }
        let fx = prev[i];
        let (targets, _, weights) = graph.row(i);
        let mut best = fx;
        for (&j, &w) in targets.iter().zip(weights) {
            let mut c = dt * w;
            if clamp && c > 1.0 {
                c = 1.0;
            }
            let cand = (1.0 - c) * fx + c * prev[j as usize];
            if cand < best {
                best = cand;
            }
        }
        *out = best + dt * potential[i];
    });
}

fn check_lengths(graph: &Graph, prev: &Field, potential: &[f64], initial: &[f64]) -> Result<()> {
    let n = graph.len();
    if prev.values.len() != n || potential.len() != n || initial.len() != n {
        return Err(Error::Solver(format!(
            "field sizes ({}, {}, {}) do not match the {n} graph vertices",
            prev.values.len(),
            potential.len(),
            initial.len()
        )));
    }
    Ok(())
}

/// One explicit Euler step. Rejects `dt` above the CFL bound.
pub fn euler_step(graph: &Graph, prev: &Field, potential: &[f64], dt: f64, initial: &[f64]) -> Result<Field> {
    check_lengths(graph, prev, potential, initial)?;
    let bound = cfl_bound(graph.constants(), graph.epsilon());
    if !(dt > 0.0) || dt > bound {
        return Err(Error::Cfl { dt, bound });
    }
    let mut next = vec![0.0; graph.len()];
    step_into(graph, &prev.values, potential, dt, initial, true, &mut next);
    Ok(Field::new(next, prev.time + dt))
}

/// Euler step without the CFL check, for demonstrating what the bound
/// protects against. Same update formula as [`euler_step`].
pub fn euler_step_unchecked(graph: &Graph, prev: &Field, potential: &[f64], dt: f64, initial: &[f64]) -> Result<Field> {
    check_lengths(graph, prev, potential, initial)?;
    let mut next = vec![0.0; graph.len()];
    step_into(graph, &prev.values, potential, dt, initial, false, &mut next);
    Ok(Field::new(next, prev.time + dt))
}

/// Output of [`solve`].
#[derive(Debug, Clone)]
pub struct Solution {
    /// Recorded snapshots, starting with `f₀` at `t = 0`.
    pub trajectory: Vec<Field>,
    /// First step whose largest update fell below `steady_tol·‖P̃‖_∞·Δt`.
    pub steady_state_step: Option<usize>,
    pub dt: f64,
    pub steps: usize,
    /// Whether auto-clamp replaced the requested `dt`.
    pub dt_clamped: bool,
    /// `max_x |f(x, t) − f(x, t−Δt)| / Δt` over every step taken.
    pub max_time_quotient: f64,
    pub potential: Vec<f64>,
    pub initial: Vec<f64>,
}

impl Solution {
    pub fn final_field(&self) -> &Field {
        self.trajectory.last().expect("trajectory always holds f0")
    }
}

/// Resolves the time step for a run: strict mode rejects `dt` above the
/// bound, auto-clamp picks the largest `T/N` not exceeding it.
pub fn resolve_dt(config: &SolverConfig, bound: f64) -> Result<(f64, bool)> {
    let dt = config.dt;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Solver(format!("dt must be positive, got {dt}")));
    }
    if dt <= bound {
        return Ok((dt, false));
    }
    match config.cfl_mode {
        CflMode::StrictReject => Err(Error::Cfl { dt, bound }),
        CflMode::AutoClamp => {
            if config.horizon <= 0.0 {
                return Ok((bound, true));
            }
            let mut steps = (config.horizon / bound).ceil().max(1.0);
            while config.horizon / steps > bound {
                steps += 1.0;
            }
            Ok((config.horizon / steps, true))
        }
    }
}

/// Number of steps `N_T = floor(T/Δt)`, tolerant to rounding in `T/Δt`.
pub fn step_count(horizon: f64, dt: f64) -> usize {
    ((horizon / dt) * (1.0 + 1e-12)).floor().max(0.0) as usize
}

/// Runs the scheme from `f₀` to the horizon.
pub fn solve(graph: &Graph, config: &SolverConfig) -> Result<Solution> {
    if !(config.horizon >= 0.0 && config.horizon.is_finite()) {
        return Err(Error::Solver(format!("horizon must be non-negative, got {}", config.horizon)));
    }
    if config.snapshot_every == 0 {
        return Err(Error::Solver("snapshot_every must be at least 1".into()));
    }
    let cloud = graph.cloud();
    let potential = config.potential.sample(cloud)?;
    if let Some(p) = potential.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(Error::Solver(format!("potential must be non-negative and finite, found {p}")));
    }
    let initial = config.initial.sample(cloud)?;
    if initial.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("initial data must be finite".into()));
    }
    let bound = cfl_bound(graph.constants(), graph.epsilon());
    let (dt, dt_clamped) = resolve_dt(config, bound)?;
    if dt_clamped {
        log::info!("dt {} clamped to {dt} by the CFL bound {bound}", config.dt);
    }
    let steps = step_count(config.horizon, dt);
    let p_sup = interior_sup(graph, &potential);
    let steady_threshold = config.steady_tol * dt * if p_sup > 0.0 { p_sup } else { 1.0 };

    let mut current = initial.clone();
    let mut next = vec![0.0; graph.len()];
    let mut trajectory = vec![Field::new(current.clone(), 0.0)];
    let mut steady_state_step = None;
    let mut max_time_quotient = 0.0f64;
    let mut taken = 0;
    for k in 1..=steps {
        step_into(graph, &current, &potential, dt, &initial, true, &mut next);
        let change = current.iter().zip(&next).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max);
        max_time_quotient = max_time_quotient.max(change / dt);
        std::mem::swap(&mut current, &mut next);
        taken = k;
        let t = k as f64 * dt;
        let steady = change < steady_threshold;
        if steady && steady_state_step.is_none() {
            steady_state_step = Some(k);
        }
        let stop = steady && config.stop_at_steady;
        if k % config.snapshot_every == 0 || k == steps || stop {
            trajectory.push(Field::new(current.clone(), t));
        }
        if stop {
            break;
        }
    }
    Ok(Solution {
        trajectory,
        steady_state_step,
        dt,
        steps: taken,
        dt_clamped,
        max_time_quotient,
        potential,
        initial,
    })
}

/// `‖P̃‖_∞` over the non-boundary vertices.
pub fn interior_sup(graph: &Graph, potential: &[f64]) -> f64 {
    potential
        .iter()
        .zip(graph.boundary_mask())
        .filter(|(_, b)| !**b)
        .map(|(p, _)| *p)
        .fold(0.0, f64::max)
}

/// Lower estimate of `Lip(f)` from graph edges: `max |f(x) − f(y)| / d_M(x, y)`.
pub fn estimate_lipschitz(graph: &Graph, values: &[f64]) -> f64 {
    let cloud = graph.cloud();
    (0..graph.len())
        .map(|i| {
            graph
                .neighbors(i)
                .filter_map(|nb| {
                    let d = cloud.spec.geodesic_unchecked(cloud.point(i), cloud.point(nb.index));
                    (d > 0.0).then(|| (values[i] - values[nb.index]).abs() / d)
                })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Constants of the time and space regularity estimates of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityConstants {
    /// `‖P̃‖_∞` over interior vertices.
    pub potential_sup: f64,
    pub initial_lipschitz: f64,
    /// `L = Lip(f₀) + ‖P̃‖_∞`.
    pub time_lipschitz: f64,
    /// `C_M` of the support-local extrinsic distance bound.
    pub c_m: f64,
    /// `K = 4/a · max((a + C_M)‖P̃‖_∞, C_η/c_η · (L + ‖P̃‖_∞))`.
    pub space_constant: f64,
}

impl RegularityConstants {
    pub fn new(graph: &Graph, potential: &[f64], initial_lipschitz: f64) -> Self {
        let kernel = graph.kernel();
        let c = graph.constants();
        let a = kernel.a;
        let p_sup = interior_sup(graph, potential);
        let l = initial_lipschitz + p_sup;
        let c_m = graph.spec().local_dtilde_error(graph.epsilon(), kernel.r_eta).c_m;
        let k = 4.0 / a * ((a + c_m) * p_sup).max(c.peak_moment / c.eta_at_a * (l + p_sup));
        RegularityConstants { potential_sup: p_sup, initial_lipschitz, time_lipschitz: l, c_m, space_constant: k }
    }
}

/// Absolute slack allowed on top of the time-Lipschitz bound.
pub const TIME_LIP_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub time_lip_max: f64,
    pub time_lip_bound: f64,
    /// Worst `|Δf| − (LΔt + slack)` across consecutive snapshots (≤ 0 when
    /// the bound holds).
    pub time_worst_excess: f64,
    pub space_constant: f64,
    pub space_max_violation: f64,
    pub space_pairs_checked: usize,
    pub barrier_lower_ok: Option<bool>,
    pub barrier_upper_ok: Option<bool>,
}

impl RegularityReport {
    pub fn time_ok(&self) -> bool {
        self.time_worst_excess <= 0.0
    }

    pub fn space_ok(&self) -> bool {
        self.space_max_violation <= 0.0
    }
}

/// Largest number of vertex pairs examined by the space audit; beyond it
/// pairs are sampled with a fixed seed.
pub const SPACE_AUDIT_PAIRS: usize = 50_000;

/// Checks the time-Lipschitz and space-regularity estimates along a
/// trajectory. Snapshots need not be consecutive steps.
pub fn audit_regularity(trajectory: &[Field], graph: &Graph, constants: &RegularityConstants) -> RegularityReport {
    let l = constants.time_lipschitz;
    let mut time_lip_max = 0.0f64;
    let mut time_worst_excess = f64::NEG_INFINITY;
    for pair in trajectory.windows(2) {
        let dt = pair[1].time - pair[0].time;
        if dt <= 0.0 {
            continue;
        }
        let change = pair[0].values.iter().zip(&pair[1].values).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max);
        time_lip_max = time_lip_max.max(change / dt);
        time_worst_excess = time_worst_excess.max(change - (l * dt + TIME_LIP_SLACK));
    }
    if time_worst_excess == f64::NEG_INFINITY {
        time_worst_excess = 0.0;
    }

    let cloud = graph.cloud();
    let n = graph.len();
    let pairs: Vec<(usize, usize)> = if n * (n.saturating_sub(1)) / 2 <= SPACE_AUDIT_PAIRS {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        let mut rng = stream_rng(0x000a_0d17, n as u64);
        (0..SPACE_AUDIT_PAIRS).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect()
    };
    let dist: Vec<f64> =
        pairs.iter().map(|&(i, j)| cloud.spec.geodesic_unchecked(cloud.point(i), cloud.point(j))).collect();
    let k = constants.space_constant;
    let eps = graph.epsilon();
    let mut space_max_violation = 0.0f64;
    for field in trajectory {
        for (&(i, j), d) in pairs.iter().zip(&dist) {
            let excess = (field.values[i] - field.values[j]).abs() - k * (d + eps);
            space_max_violation = space_max_violation.max(excess);
        }
    }
    RegularityReport {
        time_lip_max,
        time_lip_bound: l,
        time_worst_excess,
        space_constant: k,
        space_max_violation,
        space_pairs_checked: pairs.len(),
        barrier_lower_ok: None,
        barrier_upper_ok: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierAudit {
    /// True when the graph has no boundary vertex and the audit was not run.
    pub skipped: bool,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// `min f` over all vertices and snapshots.
    pub lower_margin: f64,
    /// `min (upper barrier + slack − f)`.
    pub upper_margin: f64,
    pub k1: f64,
    pub k2: f64,
    pub slack: f64,
}

/// Checks `0 ≤ f(x, t) ≤ min(K₁t, K₂·d̃(x, Γ)) + K·ε` along a trajectory.
///
/// Only defined for `f₀ ≡ 0` and `P̃ ≥ 0`. `K₁ = ‖P̃‖_∞`,
/// `K₂ = max((Lip f₀ + ‖P̃‖_∞)/d₀, K₁T/a₀)` with `d₀ = 1`, `a₀ = diam(M)`, and
/// `K` is the space-regularity constant.
pub fn audit_barriers(
    trajectory: &[Field],
    graph: &Graph,
    gamma: &BoundarySpec,
    potential: &[f64],
    initial: &[f64],
    horizon: f64,
) -> Result<BarrierAudit> {
    if initial.iter().any(|v| *v != 0.0) {
        return Err(Error::Solver("barrier audit requires zero initial data".into()));
    }
    if potential.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::Solver("barrier audit requires a non-negative potential".into()));
    }
    let spec = graph.spec();
    let constants = RegularityConstants::new(graph, potential, 0.0);
    let k1 = constants.potential_sup;
    let (d0, a0) = (1.0, spec.diameter());
    let k2 = ((0.0 + constants.potential_sup) / d0).max(k1 * horizon / a0);
    let slack = constants.space_constant * graph.epsilon();
    if graph.boundary_count() == 0 {
        return Ok(BarrierAudit {
            skipped: true,
            lower_ok: true,
            upper_ok: true,
            lower_margin: 0.0,
            upper_margin: 0.0,
            k1,
            k2,
            slack,
        });
    }
    let dist = gamma.resolve(spec);
    let cloud = graph.cloud();
    let dtilde: Vec<f64> = (0..graph.len()).into_par_iter().map(|i| dist.dtilde(cloud.point(i))).collect();
    let mut lower_margin = f64::INFINITY;
    let mut upper_margin = f64::INFINITY;
    for field in trajectory {
        for (i, f) in field.values.iter().enumerate() {
            lower_margin = lower_margin.min(*f);
            let upper = (k1 * field.time).min(k2 * dtilde[i]) + slack;
            upper_margin = upper_margin.min(upper - f);
        }
    }
    Ok(BarrierAudit {
        skipped: false,
        lower_ok: lower_margin >= 0.0,
        upper_ok: upper_margin >= 0.0,
        lower_margin,
        upper_margin,
        k1,
        k2,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::kernel::{kernel_constants, make_kernel, Kernel, KernelConstants, DEFAULT_GRID_STEP};
    use crate::manifold::{sample_points, Density};
    use approx::assert_abs_diff_eq;

    fn tri() -> (Kernel, KernelConstants) {
        let k = make_kernel("triangular", &[], None).unwrap();
        (k, kernel_constants(&k, DEFAULT_GRID_STEP).unwrap())
    }

    fn line_graph(xs: &[f64], eps: f64) -> Graph {
        let (k, c) = tri();
        let spec = ManifoldSpec::EuclideanBox { lower: vec![0.0], upper: vec![1.0] };
        build_graph(PointCloud::from_coords(spec, xs.to_vec()).unwrap(), &k, &c, eps).unwrap()
    }

    #[test]
    fn gradient_cases() {
        let g = line_graph(&[0.0, 0.4, 0.8], 1.0);
        assert_eq!(nonlocal_gradient(&g, &[2.0, 2.0, 2.0], 1), 0.0);
        assert_eq!(nonlocal_gradient(&g, &[1.0, 0.0, 1.0], 1), 0.0);
        // J(0.4) = 0.6/0.25 = 2.4 toward the middle vertex, J(0.8) = 0.8 toward the first.
        assert_abs_diff_eq!(nonlocal_gradient(&g, &[0.0, 1.0, 3.0], 2), 4.8, epsilon = 1e-12);
    }

    #[test]
    fn euler_step_cases() {
        let mut g = line_graph(&[0.0, 0.05, 0.5], 0.1);
        g.set_boundary_mask(vec![true, false, false]).unwrap();
        let zero = vec![0.0; 3];
        let ones = vec![1.0; 3];
        let next = euler_step(&g, &Field::new(zero.clone(), 0.0), &ones, 0.01, &zero).unwrap();
        assert_eq!(next.values, vec![0.0, 0.01, 0.01]);
        assert_abs_diff_eq!(next.time, 0.01);

        let c = Field::new(vec![3.0; 3], 0.0);
        let same = euler_step(&g, &c, &zero, 0.01, &[3.0; 3]).unwrap();
        assert_eq!(same.values, c.values);

        let prev = Field::new(vec![0.0, 0.1, 0.0], 0.0);
        let next = euler_step(&g, &prev, &ones, 0.01, &zero).unwrap();
        assert_abs_diff_eq!(next.values[1], 0.09, epsilon = 1e-15);

        assert!(matches!(euler_step(&g, &prev, &ones, 0.03, &zero), Err(Error::Cfl { .. })));
    }

    #[test]
    fn auto_clamp_divides_horizon() {
        let mut cfg = SolverConfig::new(0.1, 1.0);
        assert!(resolve_dt(&cfg, 0.03).is_err());
        cfg.cfl_mode = CflMode::AutoClamp;
        let (dt, clamped) = resolve_dt(&cfg, 0.03).unwrap();
        assert!(clamped && dt <= 0.03);
        assert_eq!(step_count(1.0, dt), 34);
    }

    #[test]
    fn solve_edge_cases() {
        let g = line_graph(&[0.0, 0.3, 0.6, 0.9], 0.2);
        let solution = solve(&g, &SolverConfig::new(0.05, 0.0)).unwrap();
        assert_eq!(solution.trajectory.len(), 1);
        assert_eq!(solution.trajectory[0].values, vec![0.0; 4]);

        let pinned = g.clone().with_boundary_mask(vec![true; 4]).unwrap();
        let solution = solve(&pinned, &SolverConfig::new(0.05, 1.0)).unwrap();
        assert!(solution.trajectory.iter().all(|f| f.values == vec![0.0; 4]));
        assert_eq!(solution.steady_state_step, Some(1));

        let mut bad = SolverConfig::new(0.05, 1.0);
        bad.potential = FieldSpec::Constant { value: -1.0 };
        assert!(solve(&g, &bad).is_err());
    }

    #[test]
    fn constant_growth_before_the_front_arrives() {
        // Vertex 0 is pinned; vertex 3 sits 0.9 away, beyond three hops of
        // ε = 0.35, so the front reaches it only after three steps.
        let g = line_graph(&[0.0, 0.3, 0.6, 0.9], 0.35).with_boundary_mask(vec![true, false, false, false]).unwrap();
        let solution = solve(&g, &SolverConfig::new(0.05, 0.1)).unwrap();
        for f in &solution.trajectory {
            assert_abs_diff_eq!(f.values[3], f.time, epsilon = 1e-15);
        }
    }

    #[test]
    fn steady_state_and_snapshots() {
        let (k, c) = tri();
        let cloud = sample_points(&ManifoldSpec::unit_sphere(), 300, Density::Uniform, 2).unwrap();
        let gamma = BoundarySpec::Cap { center: vec![0.0, 0.0, 1.0], radius: 0.3 };
        let marking = crate::graph::mark_boundary(&cloud, &gamma, 0.5, 0.6, 0.5).unwrap();
        let g = build_graph(cloud, &k, &c, 0.6).unwrap().with_boundary_mask(marking.mask).unwrap();
        let mut cfg = SolverConfig::new(0.1, 40.0);
        cfg.snapshot_every = 10;
        let full = solve(&g, &cfg).unwrap();
        assert_eq!(full.steps, 400);
        assert_eq!(full.trajectory.len(), 41);
        let s = full.steady_state_step.expect("reaches steady state");
        cfg.stop_at_steady = true;
        let stopped = solve(&g, &cfg).unwrap();
        assert_eq!(stopped.steps, s);
        for (a, b) in stopped.final_field().values.iter().zip(&full.final_field().values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-7);
        }
    }

    #[test]
    fn audits_on_trivial_dynamics() {
        let (k, c) = tri();
        let cloud = sample_points(&ManifoldSpec::unit_sphere(), 200, Density::Uniform, 4).unwrap();
        let gamma = BoundarySpec::PointSet { points: vec![cloud.point(0).to_vec()] };
        let mut mask = vec![false; 200];
        mask[0] = true;
        let g = build_graph(cloud, &k, &c, 0.5).unwrap().with_boundary_mask(mask).unwrap();

        let mut cfg = SolverConfig::new(0.1, 1.0);
        cfg.potential = FieldSpec::Constant { value: 0.0 };
        let s = solve(&g, &cfg).unwrap();
        let rc = RegularityConstants::new(&g, &s.potential, 0.0);
        let r = audit_regularity(&s.trajectory, &g, &rc);
        assert_eq!(r.time_lip_max, 0.0);
        assert!(r.time_ok() && r.space_ok());

        let s = solve(&g, &SolverConfig::new(0.1, 1.0)).unwrap();
        let rc = RegularityConstants::new(&g, &s.potential, 0.0);
        assert_eq!(rc.time_lipschitz, 1.0);
        let r = audit_regularity(&s.trajectory, &g, &rc);
        assert!(r.time_lip_max <= 1.0 + 1e-12);
        assert!(r.time_ok());

        let b = audit_barriers(&s.trajectory, &g, &gamma, &s.potential, &s.initial, 1.0).unwrap();
        assert!(b.lower_ok && b.upper_ok, "{b:?}");
        assert_eq!(s.trajectory[0].values, vec![0.0; 200]);
        assert!(s.trajectory.iter().all(|f| f.values[0] == 0.0));

        let ramp = vec![1.0; 200];
        assert!(audit_barriers(&s.trajectory, &g, &gamma, &s.potential, &ramp, 1.0).is_err());
    }

    #[test]
    fn oversized_step_breaks_time_regularity() {
        // Two interior vertices with J = 20 and dt = 10× the bound: the
        // update overshoots and oscillates.
        let g = line_graph(&[0.0, 0.05], 0.1);
        let bound = cfl_bound(g.constants(), g.epsilon());
        let dt = 10.0 * bound;
        let zero = [0.0; 2];
        let mut f = Field::new(vec![0.0, 1.0], 0.0);
        let mut traj = vec![f.clone()];
        for _ in 0..4 {
            f = euler_step_unchecked(&g, &f, &zero, dt, &zero).unwrap();
            traj.push(f.clone());
        }
        let initial_lip = 1.0 / 0.05;
        let rc = RegularityConstants::new(&g, &zero, initial_lip);
        let r = audit_regularity(&traj, &g, &rc);
        assert!(!r.time_ok(), "{r:?}");
        assert!(!r.space_ok(), "{r:?}");
    }

    #[test]
    fn estimated_lipschitz_of_ramp() {
        let g = line_graph(&[0.0, 0.1, 0.3, 0.35], 0.5);
        let ramp = FieldSpec::CoordinateRamp { axis: 0, offset: 1.0, slope: -2.0 };
        let v = ramp.sample(g.cloud()).unwrap();
        assert_abs_diff_eq!(estimate_lipschitz(&g, &v), 2.0, epsilon = 1e-12);
        assert_eq!(ramp.lipschitz(g.spec()), 2.0);
        assert!(ramp.lipschitz(&ManifoldSpec::FlatTorus { periods: vec![1.0] }).is_infinite());
    }
}
