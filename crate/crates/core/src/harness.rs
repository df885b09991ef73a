//! Convergence sweeps, rate fitting, `K1` calibration and the Monte-Carlo
//! check of the random-graph construction.

use std::path::Path;
use std::time::Instant;

use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CalibrationSpec, ProblemSpec, RunConfig};
use crate::error::{Error, Result};
use crate::graph::{
    build_graph, covering_check, epsilon_schedule, hausdorff_to_boundary, mark_boundary,
    schedule_base, worst_gap, Graph,
};
use crate::io;
use crate::kernel::cfl_bound;
use crate::manifold::{sample_points, stream_rng};
use crate::reference::{
    check_uniform_regime, closed_form_fields, sup_error, weighted_distance_oracle, ErrorRecord, OracleField,
    DEFAULT_KNN,
};
use crate::solver::{solve, CflMode, SolverConfig};

/// Lower and upper ends of the accepted fitted-slope band.
pub const SLOPE_BAND: (f64, f64) = (0.03, 0.8);
/// Bootstrap resamples behind the slope interval.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Allowed spread of per-edge runtime across sweep sizes.
pub const RUNTIME_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub problem: ProblemSpec,
    pub n_list: Vec<usize>,
    pub nu: f64,
    pub xi: f64,
    pub zeta: f64,
    pub tau: f64,
    pub m_star: usize,
    pub k1: f64,
    pub trials_per_n: usize,
    pub horizon: f64,
    pub seed_base: u64,
    pub snapshot_every: usize,
    pub record_runtime: bool,
    pub dense_factor: usize,
    /// Fixed `ε` per `n`, replacing the schedule.
    pub epsilon: Option<Vec<f64>>,
}

impl SweepConfig {
    /// Sweep settings of a run configuration with a resolved `K1`.
    pub fn from_run(config: &RunConfig, k1: f64) -> Self {
        SweepConfig {
            problem: config.problem.clone(),
            n_list: config.sweep.n_list.clone(),
            nu: config.nu,
            xi: config.xi,
            zeta: config.zeta,
            tau: config.tau,
            m_star: config.problem.m_star(config.m_star),
            k1,
            trials_per_n: config.sweep.trials_per_n,
            horizon: config.solver.horizon,
            seed_base: config.seed,
            snapshot_every: config.solver.snapshot_every,
            record_runtime: config.sweep.record_runtime,
            dense_factor: config.sweep.dense_factor,
            epsilon: config.sweep.epsilon.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_list must be non-empty and strictly increasing".into()));
        }
        if self.trials_per_n == 0 {
            return Err(Error::Config("trials_per_n must be at least 1".into()));
        }
        if !(self.zeta > 0.0 && self.nu > 0.0 && self.xi > 0.0 && self.tau > 0.0 && self.k1 > 0.0) {
            return Err(Error::Config("nu, xi, zeta, tau and k1 must be positive".into()));
        }
        if self.m_star == 0 || self.snapshot_every == 0 {
            return Err(Error::Config("m_star and snapshot_every must be positive".into()));
        }
        if let Some(eps) = &self.epsilon {
            if eps.len() != self.n_list.len() || eps.iter().any(|e| !(*e > 0.0)) {
                return Err(Error::Config("epsilon override needs one positive value per n".into()));
            }
        }
        Ok(())
    }

    fn epsilon_for(&self, group: usize) -> Result<f64> {
        match &self.epsilon {
            Some(eps) => Ok(eps[group]),
            None => Ok(epsilon_schedule(self.n_list[group], self.m_star, self.nu, self.tau, self.k1)?.epsilon_n),
        }
    }
}

/// Time step of a sweep trial: `ε^(1+ζ)`, clamped to the CFL bound.
pub fn coupled_dt(epsilon: f64, zeta: f64, bound: f64) -> (f64, bool) {
    let dt = epsilon.powf(1.0 + zeta);
    if dt > bound {
        (bound, true)
    } else {
        (dt, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub n: usize,
    pub seed: u64,
    pub reason: String,
}

/// Wall time and size of one trial; kept out of deterministic outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialTiming {
    pub n: usize,
    pub seed: u64,
    pub directed_edges: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceGroup {
    pub n: usize,
    pub epsilon: f64,
    pub dt: f64,
    pub dt_clamped: bool,
    pub records: Vec<ErrorRecord>,
    pub failures: Vec<TrialFailure>,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
}

impl ConvergenceGroup {
    pub fn iqr(&self) -> Option<f64> {
        Some(self.q3? - self.q1?)
    }

    fn summarize(&mut self) {
        let mut errors: Vec<f64> = self.records.iter().map(|r| r.sup_error).collect();
        errors.sort_by(f64::total_cmp);
        self.median = quantile(&errors, 0.5);
        self.q1 = quantile(&errors, 0.25);
        self.q3 = quantile(&errors, 0.75);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub groups: Vec<ConvergenceGroup>,
    pub k1: f64,
    pub nu: f64,
    pub xi: f64,
    pub zeta: f64,
    pub m_star: usize,
    pub seed_base: u64,
    pub fit: Option<RateFit>,
    /// Why no fit is available, when it is not.
    pub fit_note: Option<String>,
    #[serde(skip)]
    pub timings: Vec<TrialTiming>,
}

impl ConvergenceTable {
    /// Groups records by `n` (in increasing order) and summarizes them.
    pub fn from_records(records: Vec<ErrorRecord>, seed_base: u64) -> Self {
        let mut groups: Vec<ConvergenceGroup> = Vec::new();
        let mut sorted = records;
        sorted.sort_by_key(|r| r.n);
        for r in sorted {
            match groups.last_mut() {
                Some(g) if g.n == r.n => g.records.push(r),
                _ => groups.push(ConvergenceGroup {
                    n: r.n,
                    epsilon: r.epsilon,
                    dt: r.dt,
                    dt_clamped: false,
                    records: vec![r],
                    failures: vec![],
                    median: None,
                    q1: None,
                    q3: None,
                }),
            }
        }
        groups.iter_mut().for_each(ConvergenceGroup::summarize);
        ConvergenceTable {
            groups,
            k1: f64::NAN,
            nu: f64::NAN,
            xi: f64::NAN,
            zeta: f64::NAN,
            m_star: 0,
            seed_base,
            fit: None,
            fit_note: None,
            timings: vec![],
        }
    }

    pub fn records(&self) -> impl Iterator<Item = &ErrorRecord> {
        self.groups.iter().flat_map(|g| g.records.iter())
    }

    pub fn failure_count(&self) -> usize {
        self.groups.iter().map(|g| g.failures.len()).sum()
    }
}

/// Type-7 sample quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    quantile(values, 0.5).expect("non-empty")
}

/// `log((log n)/n)`, the abscissa of the rate fit.
pub fn rate_predictor(n: usize) -> f64 {
    let n = n as f64;
    (n.ln() / n).ln()
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Least-squares slope of `log(median error)` against `log((log n)/n)`,
/// with a percentile bootstrap interval over trials.
///
/// Errors behaving like `C·((log n)/n)^s` give slope `s`, so a positive slope
/// means the error shrinks as `n` grows.
pub fn fit_rate(table: &ConvergenceTable) -> Result<RateFit> {
    let groups: Vec<&ConvergenceGroup> = table.groups.iter().filter(|g| !g.records.is_empty()).collect();
    if groups.len() < 2 {
        return Err(Error::Fit(format!("need at least two groups with results, have {}", groups.len())));
    }
    if let Some(r) = groups.iter().flat_map(|g| &g.records).find(|r| !(r.sup_error > 0.0)) {
        return Err(Error::Fit(format!("non-positive error {} at n = {}", r.sup_error, r.n)));
    }
    let x: Vec<f64> = groups.iter().map(|g| rate_predictor(g.n)).collect();
    let y: Vec<f64> = groups
        .iter()
        .map(|g| median_of(&mut g.records.iter().map(|r| r.sup_error).collect::<Vec<_>>()).ln())
        .collect();
    let (slope, intercept) = ols(&x, &y);

    let mut rng = stream_rng(table.seed_base, 0xb0_07_57_4a);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut scratch = Vec::new();
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let yb: Vec<f64> = groups
            .iter()
            .map(|g| {
                scratch.clear();
                let k = g.records.len();
                scratch.extend((0..k).map(|_| g.records[rng.random_range(0..k)].sup_error));
                median_of(&mut scratch).ln()
            })
            .collect();
        slopes.push(ols(&x, &yb).0);
    }
    slopes.sort_by(f64::total_cmp);
    Ok(RateFit {
        slope,
        intercept,
        ci_low: quantile(&slopes, 0.025).expect("resamples"),
        ci_high: quantile(&slopes, 0.975).expect("resamples"),
        resamples: BOOTSTRAP_RESAMPLES,
    })
}

/// `min(ν, ξ, 1/2, ζ) / ((1+ν)·m*)` in exact rational arithmetic.
pub fn theoretical_exponent(nu: f64, xi: f64, zeta: f64, m_star: usize) -> Result<Ratio<i64>> {
    let exact = |v: f64, name: &str| {
        Ratio::<i64>::approximate_float(v)
            .filter(|r| *r > Ratio::from_integer(0))
            .ok_or_else(|| Error::Fit(format!("{name} = {v} has no positive rational form")))
    };
    let (nu, xi, zeta) = (exact(nu, "nu")?, exact(xi, "xi")?, exact(zeta, "zeta")?);
    let half = Ratio::new(1, 2);
    let num = [nu, xi, zeta, half].into_iter().min().expect("non-empty");
    Ok(num / ((Ratio::from_integer(1) + nu) * Ratio::from_integer(m_star as i64)))
}

/// Pass/fail of the rate properties of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateChecks {
    pub medians_decreasing: bool,
    /// Error decreasing in `n` with a bootstrap interval excluding zero.
    pub slope_significant: bool,
    pub slope_in_band: bool,
}

impl RateChecks {
    pub fn all(&self) -> bool {
        self.medians_decreasing && self.slope_significant && self.slope_in_band
    }
}

pub fn rate_checks(table: &ConvergenceTable) -> RateChecks {
    let medians: Vec<Option<f64>> = table.groups.iter().map(|g| g.median).collect();
    let medians_decreasing = medians.len() >= 2
        && medians.iter().all(Option::is_some)
        && medians.windows(2).all(|w| w[1].unwrap() < w[0].unwrap());
    let (slope_significant, slope_in_band) = match &table.fit {
        Some(f) => (f.slope > 0.0 && f.ci_low > 0.0, (SLOPE_BAND.0..=SLOPE_BAND.1).contains(&f.slope)),
        None => (false, false),
    };
    RateChecks { medians_decreasing, slope_significant, slope_in_band }
}

struct TrialOutcome {
    record: ErrorRecord,
    timing: TrialTiming,
}

/// Boundary sample spacing for Hausdorff checks at kernel scale `ε`.
pub fn gamma_spacing(problem: &ProblemSpec, threshold: f64) -> f64 {
    (threshold / 16.0).max(problem.manifold.diameter() * 1e-4)
}

fn run_trial(sweep: &SweepConfig, group: usize, n: usize, epsilon: f64, seed: u64) -> Result<TrialOutcome> {
    let start = Instant::now();
    let p = &sweep.problem;
    let (kernel, constants) = p.kernel.build()?;
    let cloud = sample_points(&p.manifold, n, p.density, seed)?;
    let marking = mark_boundary(&cloud, &p.boundary, kernel.a, epsilon, sweep.nu)?;
    if marking.count() == 0 {
        return Err(Error::Graph(format!("empty boundary set at epsilon {epsilon:.4}")));
    }
    let threshold = marking.threshold;
    let graph = build_graph(cloud, &kernel, &constants, epsilon)?.with_boundary_mask(marking.mask)?;
    let (dt, _) = coupled_dt(epsilon, sweep.zeta, cfl_bound(&constants, epsilon));
    let solver = SolverConfig {
        dt,
        horizon: sweep.horizon,
        cfl_mode: CflMode::StrictReject,
        steady_tol: crate::solver::DEFAULT_STEADY_TOL,
        stop_at_steady: false,
        snapshot_every: sweep.snapshot_every,
        potential: p.potential,
        initial: p.initial,
    };
    let solution = solve(&graph, &solver)?;
    let sup = trial_error(sweep, &graph, &solution.trajectory, seed)?;
    let gamma_sample = p.boundary.sample(&p.manifold, gamma_spacing(p, threshold));
    let boundary_hausdorff = hausdorff_to_boundary(&p.boundary, &gamma_sample, graph.cloud(), graph.boundary_mask())?;
    let seconds = start.elapsed().as_secs_f64();
    log::debug!("n = {n}, seed = {seed}: sup error {sup:.4e} in {seconds:.2}s (group {group})");
    Ok(TrialOutcome {
        record: ErrorRecord {
            n,
            epsilon,
            dt,
            sup_error: sup,
            boundary_hausdorff,
            runtime_seconds: sweep.record_runtime.then_some(seconds),
            seed,
        },
        timing: TrialTiming { n, seed, directed_edges: graph.directed_edge_count(), seconds },
    })
}

fn trial_error(sweep: &SweepConfig, graph: &Graph, trajectory: &[crate::solver::Field], seed: u64) -> Result<f64> {
    let p = &sweep.problem;
    if check_uniform_regime(&p.potential, &p.initial).is_ok() {
        let times: Vec<f64> = trajectory.iter().map(|f| f.time).collect();
        let oracle = closed_form_fields(graph.cloud(), &p.boundary, &p.potential, &p.initial, &times)?;
        return sup_error(trajectory, &oracle);
    }
    // Only the steady state has a reference for general data.
    let last = trajectory.last().expect("trajectory holds f0");
    let dense_n = sweep.dense_factor.max(1) * graph.len();
    let oracle: OracleField =
        weighted_distance_oracle(graph.cloud(), &p.boundary, &p.potential, dense_n, seed ^ 0x5eed, DEFAULT_KNN)?;
    let steady = OracleField { time: Some(last.time), ..oracle };
    sup_error(std::slice::from_ref(last), std::slice::from_ref(&steady))
}

/// Runs every `(n, trial)` pair of a sweep and fits the rate.
///
/// Trial `k` (counted across all groups) uses seed `seed_base + k`. Failed
/// trials are kept with their reason and left out of the statistics.
pub fn run_convergence(sweep: &SweepConfig) -> Result<ConvergenceTable> {
    sweep.validate()?;
    let (_, constants) = sweep.problem.kernel.build()?;
    let mut jobs = Vec::new();
    for (g, &n) in sweep.n_list.iter().enumerate() {
        let epsilon = sweep.epsilon_for(g)?;
        for t in 0..sweep.trials_per_n {
            let seed = sweep.seed_base.wrapping_add((g * sweep.trials_per_n + t) as u64);
            jobs.push((g, n, epsilon, seed));
        }
    }
    let outcomes: Vec<(usize, u64, Result<TrialOutcome>)> = jobs
        .par_iter()
        .map(|&(g, n, epsilon, seed)| (g, seed, run_trial(sweep, g, n, epsilon, seed)))
        .collect();

    let mut groups: Vec<ConvergenceGroup> = Vec::new();
    for (g, &n) in sweep.n_list.iter().enumerate() {
        let epsilon = sweep.epsilon_for(g)?;
        let (dt, dt_clamped) = coupled_dt(epsilon, sweep.zeta, cfl_bound(&constants, epsilon));
        if dt_clamped {
            log::info!("n = {n}: dt clamped to the CFL bound {dt:.4e}");
        }
        groups.push(ConvergenceGroup {
            n,
            epsilon,
            dt,
            dt_clamped,
            records: vec![],
            failures: vec![],
            median: None,
            q1: None,
            q3: None,
        });
    }
    let mut timings = Vec::new();
    for (g, seed, outcome) in outcomes {
        match outcome {
            Ok(o) => {
                groups[g].records.push(o.record);
                timings.push(o.timing);
            }
            Err(e) => {
                let n = groups[g].n;
                log::warn!("trial n = {n}, seed = {seed} failed: {e}");
                groups[g].failures.push(TrialFailure { n, seed, reason: e.to_string() });
            }
        }
    }
    groups.iter_mut().for_each(ConvergenceGroup::summarize);
    let mut table = ConvergenceTable {
        groups,
        k1: sweep.k1,
        nu: sweep.nu,
        xi: sweep.xi,
        zeta: sweep.zeta,
        m_star: sweep.m_star,
        seed_base: sweep.seed_base,
        fit: None,
        fit_note: None,
        timings,
    };
    match fit_rate(&table) {
        Ok(fit) => table.fit = Some(fit),
        Err(e) => table.fit_note = Some(e.to_string()),
    }
    Ok(table)
}

/// Outcome of [`calibrate_k1`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct K1Calibration {
    pub k1: f64,
    pub pilot_n: usize,
    pub trials: usize,
    pub quantile: f64,
    pub margin: f64,
    /// Smallest `K1` passing the covering check, per pilot cloud.
    pub required: Vec<f64>,
}

/// Calibrates `K1` so that the covering check holds on at least the
/// requested fraction of pilot clouds.
///
/// The largest nearest-sample gap of a cloud does not depend on `ε`, so the
/// smallest passing `K1` of each pilot cloud is `8·gap / (a·base(n))`, and
/// the calibrated value is an order statistic of those (times `margin`).
pub fn calibrate_k1(
    problem: &ProblemSpec,
    spec: &CalibrationSpec,
    tau: f64,
    m_star: usize,
    probes: usize,
) -> Result<K1Calibration> {
    if spec.trials == 0 || !(spec.quantile > 0.0 && spec.quantile <= 1.0) {
        return Err(Error::Config("calibration needs trials >= 1 and a quantile in (0, 1]".into()));
    }
    let (kernel, _) = problem.kernel.build()?;
    let base = schedule_base(spec.pilot_n, m_star, tau);
    let required: Vec<f64> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let cloud = sample_points(&problem.manifold, spec.pilot_n, problem.density, spec.seed_base + t as u64)?;
            Ok(8.0 * worst_gap(&cloud, probes)? / (kernel.a * base))
        })
        .collect::<Result<_>>()?;
    let mut sorted = required.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = ((spec.quantile * spec.trials as f64).ceil() as usize).clamp(1, spec.trials);
    let k1 = sorted[rank - 1] * spec.margin;
    log::info!("calibrated K1 = {k1:.4} at n = {} over {} pilot clouds", spec.pilot_n, spec.trials);
    Ok(K1Calibration {
        k1,
        pilot_n: spec.pilot_n,
        trials: spec.trials,
        quantile: spec.quantile,
        margin: spec.margin,
        required,
    })
}

/// `K1` from the configuration, or calibrated when absent.
pub fn resolve_k1(config: &RunConfig) -> Result<f64> {
    match config.k1 {
        Some(k1) => Ok(k1),
        None => Ok(calibrate_k1(
            &config.problem,
            &config.calibration,
            config.tau,
            config.problem.m_star(config.m_star),
            config.probes,
        )?
        .k1),
    }
}

/// Minimum number of trials for [`mc_cover_probability`].
pub const MIN_MC_TRIALS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub problem: ProblemSpec,
    pub n: usize,
    pub trials: usize,
    pub nu: f64,
    pub tau: f64,
    pub m_star: usize,
    pub k1: f64,
    pub probes: usize,
    pub seed_base: u64,
    /// Fixed `ε` instead of the schedule.
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub n: usize,
    pub trials: usize,
    pub cover_frequency: f64,
    pub hausdorff_frequency: f64,
    /// Frequency of both checks holding together.
    pub joint_frequency: f64,
    pub epsilon_n: f64,
    pub k1: f64,
}

/// Empirical frequency of the covering and boundary-tracking events over
/// independent clouds with seeds `seed_base + trial`.
pub fn mc_cover_probability(config: &McConfig) -> Result<McReport> {
    if config.trials < MIN_MC_TRIALS {
        return Err(Error::Config(format!("need at least {MIN_MC_TRIALS} trials, got {}", config.trials)));
    }
    let p = &config.problem;
    let (kernel, _) = p.kernel.build()?;
    let epsilon = match config.epsilon {
        Some(e) if e > 0.0 => e,
        Some(e) => return Err(Error::Config(format!("epsilon must be positive, got {e}"))),
        None => epsilon_schedule(config.n, config.m_star, config.nu, config.tau, config.k1)?.epsilon_n,
    };
    let threshold = crate::graph::boundary_threshold(kernel.a, epsilon, config.nu);
    let gamma_sample = p.boundary.sample(&p.manifold, gamma_spacing(p, threshold));
    let outcomes: Vec<(bool, bool)> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let cloud = sample_points(&p.manifold, config.n, p.density, config.seed_base + t as u64)?;
            let cover = covering_check(&cloud, kernel.a, epsilon, config.nu, config.probes)?.holds;
            let marking = mark_boundary(&cloud, &p.boundary, kernel.a, epsilon, config.nu)?;
            let tracked = match hausdorff_to_boundary(&p.boundary, &gamma_sample, &cloud, &marking.mask) {
                Ok(h) => h <= threshold,
                Err(_) => false,
            };
            Ok((cover, tracked))
        })
        .collect::<Result<_>>()?;
    let freq = |f: &dyn Fn(&(bool, bool)) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / config.trials as f64;
    Ok(McReport {
        n: config.n,
        trials: config.trials,
        cover_frequency: freq(&|o| o.0),
        hausdorff_frequency: freq(&|o| o.1),
        joint_frequency: freq(&|o| o.0 && o.1),
        epsilon_n: epsilon,
        k1: config.k1,
    })
}

/// Median seconds per directed edge for each `n`, and whether their spread
/// stays within [`RUNTIME_FACTOR`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearityCheck {
    pub per_edge: Vec<(usize, f64)>,
    pub spread: f64,
    pub ok: bool,
}

pub fn runtime_linearity(timings: &[TrialTiming]) -> LinearityCheck {
    let mut ns: Vec<usize> = timings.iter().map(|t| t.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let per_edge: Vec<(usize, f64)> = ns
        .iter()
        .map(|&n| {
            let mut v: Vec<f64> = timings
                .iter()
                .filter(|t| t.n == n)
                .map(|t| t.seconds / t.directed_edges.max(1) as f64)
                .collect();
            (n, median_of(&mut v))
        })
        .collect();
    let hi = per_edge.iter().map(|p| p.1).fold(0.0, f64::max);
    let lo = per_edge.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let spread = if per_edge.is_empty() { 1.0 } else { hi / lo };
    LinearityCheck { per_edge, spread, ok: spread <= RUNTIME_FACTOR }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Plain-text summary of a sweep.
pub fn summary_text(table: &ConvergenceTable) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let rows: usize = table.groups.iter().map(|g| g.records.len() + g.failures.len()).sum();
    let _ = writeln!(s, "eikograph convergence summary");
    let _ = writeln!(s, "rows: {rows} ({} failed)", table.failure_count());
    let _ = writeln!(s, "k1: {}", table.k1);
    for g in &table.groups {
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
        let _ = writeln!(
            s,
            "n = {}: epsilon = {:.6}, dt = {:.6e}{}, trials ok = {}, median = {}, iqr = {}",
            g.n,
            g.epsilon,
            g.dt,
            if g.dt_clamped { " (cfl clamp)" } else { "" },
            g.records.len(),
            fmt(g.median),
            fmt(g.iqr())
        );
    }
    match &table.fit {
        Some(f) => {
            let _ = writeln!(
                s,
                "fitted slope vs log((log n)/n): {:.6} (95% bootstrap CI [{:.6}, {:.6}], {} resamples)",
                f.slope, f.ci_low, f.ci_high, f.resamples
            );
        }
        None => {
            let _ = writeln!(s, "fitted slope: undefined ({})", table.fit_note.as_deref().unwrap_or("no data"));
        }
    }
    match theoretical_exponent(table.nu, table.xi, table.zeta, table.m_star.max(1)) {
        Ok(r) => {
            let _ = writeln!(s, "theoretical exponent min(nu, xi, 1/2, zeta)/((1+nu) m*): {r}");
        }
        Err(_) => {
            let _ = writeln!(s, "theoretical exponent: n/a");
        }
    }
    let c = rate_checks(table);
    let verdict = |b: bool| if b { "PASS" } else { "FAIL" };
    let _ = writeln!(s, "check medians strictly decreasing: {}", verdict(c.medians_decreasing));
    let _ = writeln!(s, "check error decreasing with CI excluding 0: {}", verdict(c.slope_significant));
    let _ = writeln!(
        s,
        "check slope in [{}, {}]: {}",
        SLOPE_BAND.0,
        SLOPE_BAND.1,
        verdict(c.slope_in_band)
    );
    s
}

/// Writes `convergence.csv` or `convergence.json`, plus `summary.txt`, into
/// `dir`. Output bytes depend only on the table and the header.
pub fn emit_report(table: &ConvergenceTable, dir: &Path, format: ReportFormat, header: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    match format {
        ReportFormat::Csv => io::write_convergence_csv(&dir.join("convergence.csv"), table, header)?,
        ReportFormat::Json => io::write_json(&dir.join("convergence.json"), table)?,
    }
    io::write_text(&dir.join("summary.txt"), &summary_text(table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn record(n: usize, e: f64, seed: u64) -> ErrorRecord {
        ErrorRecord { n, epsilon: 0.1, dt: 0.01, sup_error: e, boundary_hausdorff: 0.0, runtime_seconds: None, seed }
    }

    #[test]
    fn fit_recovers_synthetic_exponent() {
        let mut recs = vec![];
        for (i, n) in [500usize, 2000, 8000, 32000].into_iter().enumerate() {
            let e = 3.0 * ((n as f64).ln() / n as f64).powf(1.0 / 6.0);
            for t in 0..3 {
                recs.push(record(n, e, (i * 3 + t) as u64));
            }
        }
        let fit = fit_rate(&ConvergenceTable::from_records(recs, 0)).unwrap();
        assert_abs_diff_eq!(fit.slope, 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.ci_low, 1.0 / 6.0, epsilon = 1e-12);

        let flat: Vec<ErrorRecord> = [500usize, 2000].iter().map(|n| record(*n, 0.2, 0)).collect();
        assert_abs_diff_eq!(fit_rate(&ConvergenceTable::from_records(flat, 0)).unwrap().slope, 0.0);
    }

    #[test]
    fn two_point_fit() {
        let t = ConvergenceTable::from_records(vec![record(1000, 0.4, 0), record(4000, 0.2, 1)], 0);
        let expected = 2f64.ln() / (rate_predictor(1000) - rate_predictor(4000));
        assert_abs_diff_eq!(fit_rate(&t).unwrap().slope, expected, epsilon = 1e-12);
    }

    #[test]
    fn fit_preconditions() {
        assert!(fit_rate(&ConvergenceTable::from_records(vec![record(100, 0.1, 0)], 0)).is_err());
        let t = ConvergenceTable::from_records(vec![record(100, 0.1, 0), record(200, 0.0, 1)], 0);
        assert!(matches!(fit_rate(&t), Err(Error::Fit(_))));
    }

    #[test]
    fn exponent_is_exact() {
        assert_eq!(theoretical_exponent(0.5, 0.5, 0.5, 2).unwrap(), Ratio::new(1, 6));
        assert_eq!(theoretical_exponent(1.0, 2.0, 0.25, 2).unwrap(), Ratio::new(1, 16));
        assert_eq!(theoretical_exponent(0.5, 0.5, 0.5, 3).unwrap(), Ratio::new(1, 9));
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.25), Some(1.75));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn dt_coupling() {
        assert_eq!(coupled_dt(0.04, 0.5, 1.0), (0.04f64.powf(1.5), false));
        assert_eq!(coupled_dt(2.0, 0.5, 0.5), (0.5, true));
    }

    #[test]
    fn mc_limits() {
        let mut cfg = McConfig {
            problem: ProblemSpec::sphere_cap(),
            n: 5,
            trials: 50,
            nu: 0.5,
            tau: 1.0,
            m_star: 2,
            k1: 1.0,
            probes: 1000,
            seed_base: 0,
            epsilon: Some(1e-3),
        };
        let tiny = mc_cover_probability(&cfg).unwrap();
        assert_eq!(tiny.cover_frequency, 0.0);
        cfg.n = 2000;
        cfg.epsilon = Some(std::f64::consts::PI);
        let whole = mc_cover_probability(&cfg).unwrap();
        assert_eq!(whole.cover_frequency, 1.0);
        assert_eq!(whole.hausdorff_frequency, 1.0);
        cfg.trials = 10;
        assert!(mc_cover_probability(&cfg).is_err());
    }

    #[test]
    fn singleton_sweep_has_no_fit() {
        let sweep = SweepConfig {
            problem: ProblemSpec::sphere_cap(),
            n_list: vec![300],
            nu: 0.5,
            xi: 0.5,
            zeta: 0.5,
            tau: 1.0,
            m_star: 2,
            k1: 20.0,
            trials_per_n: 2,
            horizon: 2.0,
            seed_base: 7,
            snapshot_every: 1,
            record_runtime: false,
            dense_factor: 10,
            epsilon: None,
        };
        let table = run_convergence(&sweep).unwrap();
        assert_eq!(table.groups.len(), 1);
        assert_eq!(table.groups[0].records.len(), 2);
        assert!(table.fit.is_none() && table.fit_note.is_some());
        assert!(table.groups[0].median.unwrap() > 0.0);
        assert!(summary_text(&table).contains("undefined"));
    }
}
