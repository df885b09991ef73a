//! JSON run configuration shared by the CLI and the harness.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::MIN_PROBES;
use crate::kernel::{kernel_constants, make_kernel, Kernel, KernelConstants, DEFAULT_GRID_STEP};
use crate::manifold::{BoundarySpec, Density, ManifoldSpec};
use crate::solver::{CflMode, FieldSpec, DEFAULT_STEADY_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub profile: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
}

fn default_grid_step() -> f64 {
    DEFAULT_GRID_STEP
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec { profile: "triangular".into(), params: vec![], a: None, grid_step: DEFAULT_GRID_STEP }
    }
}

impl KernelSpec {
    pub fn build(&self) -> Result<(Kernel, KernelConstants)> {
        let kernel = make_kernel(&self.profile, &self.params, self.a)?;
        let constants = kernel_constants(&kernel, self.grid_step)?;
        Ok((kernel, constants))
    }
}

/// Geometry, boundary, kernel and data of one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub manifold: ManifoldSpec,
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub density: Density,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default = "unit_potential")]
    pub potential: FieldSpec,
    #[serde(default)]
    pub initial: FieldSpec,
}

fn unit_potential() -> FieldSpec {
    FieldSpec::Constant { value: 1.0 }
}

impl ProblemSpec {
    /// The unit-sphere problem with a geodesic cap of radius 0.3 around the
    /// north pole, `P ≡ 1`, `f₀ ≡ 0` and the triangular kernel.
    pub fn sphere_cap() -> Self {
        ProblemSpec {
            manifold: ManifoldSpec::unit_sphere(),
            boundary: BoundarySpec::Cap { center: vec![0.0, 0.0, 1.0], radius: 0.3 },
            density: Density::Uniform,
            kernel: KernelSpec::default(),
            potential: unit_potential(),
            initial: FieldSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.manifold.validate()?;
        self.boundary.validate(&self.manifold)?;
        self.density.validate()?;
        self.kernel.build()?;
        Ok(())
    }

    /// `m*`, the intrinsic dimension unless overridden.
    pub fn m_star(&self, explicit: Option<usize>) -> usize {
        explicit.unwrap_or_else(|| self.manifold.intrinsic_dim())
    }
}

/// How `K1` is calibrated when it is not given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    #[serde(default = "default_pilot_n")]
    pub pilot_n: usize,
    #[serde(default = "default_pilot_trials")]
    pub trials: usize,
    /// Target fraction of pilot clouds that must pass the covering check.
    #[serde(default = "default_quantile")]
    pub quantile: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Seeds of pilot clouds start here, away from sweep seeds.
    #[serde(default = "default_pilot_seed")]
    pub seed_base: u64,
}

fn default_pilot_n() -> usize {
    2000
}
fn default_pilot_trials() -> usize {
    100
}
fn default_quantile() -> f64 {
    0.99
}
fn default_margin() -> f64 {
    1.0
}
fn default_pilot_seed() -> u64 {
    1 << 40
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        CalibrationSpec {
            pilot_n: default_pilot_n(),
            trials: default_pilot_trials(),
            quantile: default_quantile(),
            margin: default_margin(),
            seed_base: default_pilot_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Time step; defaults to `ε^(1+ζ)` clamped to the CFL bound.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub cfl_mode: CflMode,
    #[serde(default = "default_steady_tol")]
    pub steady_tol: f64,
    #[serde(default)]
    pub stop_at_steady: bool,
    #[serde(default = "one")]
    pub snapshot_every: usize,
}

fn default_horizon() -> f64 {
    2.0
}
fn default_steady_tol() -> f64 {
    DEFAULT_STEADY_TOL
}
fn one() -> usize {
    1
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            dt: None,
            horizon: default_horizon(),
            cfl_mode: CflMode::StrictReject,
            steady_tol: DEFAULT_STEADY_TOL,
            stop_at_steady: false,
            snapshot_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_trials_per_n")]
    pub trials_per_n: usize,
    /// Fill `runtime_seconds` in `errors.csv`; makes the file run-dependent.
    #[serde(default)]
    pub record_runtime: bool,
    /// Size of the shortest-path oracle cloud relative to `n` for
    /// non-uniform potentials.
    #[serde(default = "default_dense_factor")]
    pub dense_factor: usize,
    /// Fixed `ε` per entry of `n_list` instead of the schedule.
    #[serde(default)]
    pub epsilon: Option<Vec<f64>>,
}

fn default_n_list() -> Vec<usize> {
    vec![500, 2000, 8000]
}
fn default_trials_per_n() -> usize {
    5
}
fn default_dense_factor() -> usize {
    10
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            n_list: default_n_list(),
            trials_per_n: default_trials_per_n(),
            record_runtime: false,
            dense_factor: default_dense_factor(),
            epsilon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_pilot_n")]
    pub n: usize,
    #[serde(default = "default_mc_trials")]
    pub trials: usize,
    /// Fixed `ε` instead of the schedule.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

fn default_mc_trials() -> usize {
    200
}

impl Default for McSection {
    fn default() -> Self {
        McSection { n: default_pilot_n(), trials: default_mc_trials(), epsilon: None }
    }
}

/// Top-level run configuration. Every subcommand reads the sections it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default = "default_pilot_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Fixed kernel scale; defaults to the schedule `ε_n`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "half")]
    pub nu: f64,
    #[serde(default = "half")]
    pub xi: f64,
    #[serde(default = "half")]
    pub zeta: f64,
    #[serde(default = "unit")]
    pub tau: f64,
    #[serde(default)]
    pub m_star: Option<usize>,
    /// Schedule constant; calibrated when absent.
    #[serde(default)]
    pub k1: Option<f64>,
    #[serde(default)]
    pub calibration: CalibrationSpec,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub mc: McSection,
}

fn half() -> f64 {
    0.5
}
fn unit() -> f64 {
    1.0
}
fn default_probes() -> usize {
    MIN_PROBES
}

impl RunConfig {
    pub fn new(problem: ProblemSpec) -> Self {
        RunConfig {
            problem,
            n: default_pilot_n(),
            seed: 0,
            epsilon: None,
            nu: 0.5,
            xi: 0.5,
            zeta: 0.5,
            tau: 1.0,
            m_star: None,
            k1: None,
            calibration: CalibrationSpec::default(),
            probes: MIN_PROBES,
            solver: SolverSection::default(),
            sweep: SweepSection::default(),
            mc: McSection::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        self.problem.validate().map_err(wrap)?;
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.nu, "nu")?;
        positive(self.xi, "xi")?;
        positive(self.zeta, "zeta")?;
        positive(self.tau, "tau")?;
        if let Some(e) = self.epsilon {
            positive(e, "epsilon")?;
        }
        if let Some(k) = self.k1 {
            positive(k, "k1")?;
        }
        if self.n < 3 {
            return Err(Error::Config(format!("n must be at least 3, got {}", self.n)));
        }
        if self.probes < MIN_PROBES {
            return Err(Error::Config(format!("probes must be at least {MIN_PROBES}")));
        }
        if self.m_star == Some(0) {
            return Err(Error::Config("m_star must be positive".into()));
        }
        if let Some(dt) = self.solver.dt {
            positive(dt, "solver.dt")?;
        }
        if !(self.solver.horizon >= 0.0 && self.solver.horizon.is_finite()) {
            return Err(Error::Config("solver.horizon must be non-negative".into()));
        }
        if self.solver.snapshot_every == 0 {
            return Err(Error::Config("solver.snapshot_every must be at least 1".into()));
        }
        let s = &self.sweep;
        if s.n_list.is_empty() || s.n_list.windows(2).any(|w| w[0] >= w[1]) || s.n_list[0] < 3 {
            return Err(Error::Config("sweep.n_list must be strictly increasing, starting at 3 or more".into()));
        }
        if s.trials_per_n == 0 {
            return Err(Error::Config("sweep.trials_per_n must be at least 1".into()));
        }
        if let Some(eps) = &s.epsilon {
            if eps.len() != s.n_list.len() {
                return Err(Error::Config("sweep.epsilon must have one entry per n".into()));
            }
            for e in eps {
                positive(*e, "sweep.epsilon")?;
            }
        }
        let c = &self.calibration;
        if c.pilot_n < 3 || c.trials == 0 || !(c.quantile > 0.0 && c.quantile <= 1.0) || !(c.margin > 0.0) {
            return Err(Error::Config("calibration needs pilot_n >= 3, trials >= 1, 0 < quantile <= 1, margin > 0".into()));
        }
        if self.mc.trials == 0 || self.mc.n < 3 {
            return Err(Error::Config("mc needs n >= 3 and at least one trial".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 prefix of the canonical JSON form, after all overrides.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configuration serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
