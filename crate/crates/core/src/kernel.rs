//! Radial kernel profiles, their derived constants and the scaled edge weights.
//!
//! A kernel `η` is non-negative, supported on `[0, r_eta]`, non-increasing on
//! `[0, a]` with `η(a) > 0`, and Lipschitz on its support. The non-local
//! operator uses the weight `J_ε(d) = η(d/ε) / (ε·C_η)` where
//! `C_η = sup_t t·η(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default resolution of the grid maximization in [`kernel_constants`].
pub const DEFAULT_GRID_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum Profile {
    /// `max(1 - t, 0)`.
    Triangular,
    /// `max(1 - t/width, 0)`.
    Tent { width: f64 },
    /// `exp(-rate·t)` on `[0, cutoff]`, zero beyond.
    TruncatedExponential { rate: f64, cutoff: f64 },
    /// `1` on `[0, radius]`, zero beyond.
    Constant { radius: f64 },
}

impl Profile {
    fn support(&self) -> f64 {
        match *self {
            Profile::Triangular => 1.0,
            Profile::Tent { width } => width,
            Profile::TruncatedExponential { cutoff, .. } => cutoff,
            Profile::Constant { radius } => radius,
        }
    }

    fn lipschitz(&self) -> f64 {
        match *self {
            Profile::Triangular => 1.0,
            Profile::Tent { width } => 1.0 / width,
            Profile::TruncatedExponential { rate, .. } => rate,
            Profile::Constant { .. } => 0.0,
        }
    }

    #[inline]
    fn eval(&self, t: f64) -> f64 {
        if !(t >= 0.0) || t > self.support() {
            return 0.0;
        }
        match *self {
            Profile::Triangular => (1.0 - t).max(0.0),
            Profile::Tent { width } => (1.0 - t / width).max(0.0),
            Profile::TruncatedExponential { rate, .. } => (-rate * t).exp(),
            Profile::Constant { .. } => 1.0,
        }
    }
}

/// A kernel profile together with its support radius, decrease radius `a`
/// and Lipschitz constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub profile: Profile,
    pub r_eta: f64,
    pub a: f64,
    pub lipschitz: f64,
}

impl Kernel {
    /// Evaluates `η(t)`. Exactly zero for `t > r_eta`.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.profile.eval(t)
    }

    pub fn profile_id(&self) -> &'static str {
        match self.profile {
            Profile::Triangular => "triangular",
            Profile::Tent { .. } => "tent",
            Profile::TruncatedExponential { .. } => "truncated-exponential",
            Profile::Constant { .. } => "constant",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self.profile {
            Profile::Triangular => vec![],
            Profile::Tent { width } => vec![width],
            Profile::TruncatedExponential { rate, cutoff } => vec![rate, cutoff],
            Profile::Constant { radius } => vec![radius],
        }
    }
}

/// Builds a kernel from a profile identifier and its parameters.
///
/// `a` defaults to `r_eta / 2`.
pub fn make_kernel(profile_id: &str, params: &[f64], a: Option<f64>) -> Result<Kernel> {
    let positive = |v: f64, what: &str| -> Result<f64> {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::Kernel(format!("{what} must be positive and finite, got {v}")))
        }
    };
    let arity = |k: usize| -> Result<()> {
        if params.len() == k {
            Ok(())
        } else {
            Err(Error::Kernel(format!(
                "profile {profile_id} expects {k} parameter(s), got {}",
                params.len()
            )))
        }
    };
    let profile = match profile_id {
        "triangular" => {
            arity(0)?;
            Profile::Triangular
        }
        "tent" => {
            arity(1)?;
            Profile::Tent { width: positive(params[0], "tent width")? }
        }
        "truncated-exponential" => {
            arity(2)?;
            let rate = params[0];
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(Error::Kernel(format!("rate must be non-negative, got {rate}")));
            }
            Profile::TruncatedExponential { rate, cutoff: positive(params[1], "cutoff")? }
        }
        "constant" => {
            arity(1)?;
            Profile::Constant { radius: positive(params[0], "radius")? }
        }
        other => return Err(Error::Kernel(format!("unknown profile id `{other}`"))),
    };
    let r_eta = profile.support();
    let a = a.unwrap_or(r_eta / 2.0);
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::Kernel(format!("decrease radius a must be positive, got {a}")));
    }
    if profile.eval(a) <= 0.0 {
        return Err(Error::Kernel(format!("eta(a) = 0 at a = {a}; the kernel must be positive at a")));
    }
    if a >= r_eta {
        return Err(Error::Kernel(format!("a = {a} must lie strictly inside (0, r_eta = {r_eta})")));
    }
    Ok(Kernel { profile, r_eta, a, lipschitz: profile.lipschitz() })
}

/// Constants derived from a kernel: `C_η = sup t·η(t)`, `c_η = η(a)` and
/// `sup η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    pub peak_moment: f64,
    pub eta_at_a: f64,
    pub sup_eta: f64,
    pub argmax_t: f64,
}

fn grid_argmax(f: impl Fn(f64) -> f64, hi: f64, step: f64) -> (f64, f64) {
    let count = (hi / step).ceil() as usize;
    let mut best = (0.0, f(0.0));
    for i in 1..=count {
        let t = (i as f64 * step).min(hi);
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    best
}

fn golden_refine(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, start: (f64, f64)) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = start;
    for t in [a, b, c, d] {
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    best
}

fn maximize(f: impl Fn(f64) -> f64, hi: f64, step: f64) -> (f64, f64) {
    let coarse = grid_argmax(&f, hi, step);
    let lo = (coarse.0 - step).max(0.0);
    let up = (coarse.0 + step).min(hi);
    golden_refine(&f, lo, up, coarse)
}

/// Computes the kernel constants by grid maximization over `[0, r_eta]`
/// followed by a golden-section pass around the best grid point.
pub fn kernel_constants(kernel: &Kernel, grid_step: f64) -> Result<KernelConstants> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::Kernel(format!("grid step must be positive, got {grid_step}")));
    }
    let r = kernel.r_eta;
    let (argmax_t, c_big) = maximize(|t| t * kernel.eval(t), r, grid_step);
    let (_, sup_eta) = maximize(|t| kernel.eval(t), r, grid_step);
    Ok(KernelConstants { peak_moment: c_big, eta_at_a: kernel.eval(kernel.a), sup_eta, argmax_t })
}

/// Edge weight `J_ε(d) = η(d/ε) / (ε·C_η)`, exactly zero outside `ε·r_eta`.
#[inline]
pub fn weight(constants: &KernelConstants, kernel: &Kernel, epsilon: f64, dtilde: f64) -> f64 {
    if dtilde > epsilon * kernel.r_eta {
        return 0.0;
    }
    kernel.eval(dtilde / epsilon) / (epsilon * constants.peak_moment)
}

/// Checked variant of [`weight`].
pub fn try_weight(constants: &KernelConstants, kernel: &Kernel, epsilon: f64, dtilde: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Kernel(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(dtilde >= 0.0) {
        return Err(Error::Kernel(format!("distance must be non-negative, got {dtilde}")));
    }
    Ok(weight(constants, kernel, epsilon, dtilde))
}

/// Largest stable explicit time step, `ε·C_η / sup η`.
pub fn cfl_bound(constants: &KernelConstants, epsilon: f64) -> f64 {
    epsilon * constants.peak_moment / constants.sup_eta
}
