//! Block surrogate functions of `phi_beta` and the majorization-minimization
//! block step.
//!
//! A block surrogate `u_i(., z)` majorizes `x_i -> phi_beta(x_i, z_{!=i})` and
//! is tight at `z_i`. Four families are supported:
//!
//! | kind                | `u_i(x_i, z)`                                                   | `eta_i`          |
//! |---------------------|-----------------------------------------------------------------|------------------|
//! | `Proximal`          | `phi_beta(x_i, z_{!=i}) + kappa D_h(x_i, z_i)`                  | `kappa`          |
//! | `Quadratic`         | `phi_beta(z) + <grad_i, x_i - z_i> + kappa q/2 ||x_i - z_i||^2`  | `(kappa - 1) q`  |
//! | `LipschitzGradient` | `phi_beta(z) + <grad_i, x_i - z_i> + kappa L/2 ||x_i - z_i||^2`  | `(kappa - 1) L`  |
//! | `Bregman`           | `phi_beta(z) + <grad_i, x_i - z_i> + kappa L D_h(x_i, z_i)`      | `(kappa - 1) L`  |
//!
//! The quadratic surrogate is restricted to `Q_i = q I`, which makes it the
//! Lipschitz-gradient surrogate with constant `q`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{BlockVector, ExtendedReal, ProblemSpec};
use crate::vecops::{axpy, dot, norm, norm_sq, sub};

/// Strongly convex kernel `h` of a Bregman divergence.
pub trait BregmanKernel: Send + Sync {
    fn value(&self, v: &[f64]) -> f64;
    fn gradient(&self, v: &[f64]) -> Vec<f64>;
    fn strong_convexity(&self) -> f64;
    /// True for `1/2 ||.||^2`, whose Bregman subproblem is a plain prox.
    fn is_euclidean(&self) -> bool {
        false
    }
}

/// `1/2 ||v||^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct EuclideanKernel;

impl BregmanKernel for EuclideanKernel {
    fn value(&self, v: &[f64]) -> f64 {
        0.5 * norm_sq(v)
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    fn strong_convexity(&self) -> f64 {
        1.0
    }

    fn is_euclidean(&self) -> bool {
        true
    }
}

/// `1/4 ||v||^4 + 1/2 ||v||^2`, with gradient `(||v||^2 + 1) v`.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuarticKernel;

impl BregmanKernel for QuarticKernel {
    fn value(&self, v: &[f64]) -> f64 {
        let s = norm_sq(v);
        0.25 * s * s + 0.5 * s
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let scale = norm_sq(v) + 1.0;
        v.iter().map(|x| scale * x).collect()
    }

    fn strong_convexity(&self) -> f64 {
        1.0
    }
}

/// `D_h(x, z) = h(x) - h(z) - <grad h(z), x - z>`, clamped at zero against
/// round-off.
pub fn bregman_divergence(kernel: &dyn BregmanKernel, x: &[f64], z: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), z.len());
    let d = kernel.value(x) - kernel.value(z) - dot(&kernel.gradient(z), &sub(x, z));
    d.max(0.0)
}

/// Bespoke solver for `argmin_x g(x) + <linear, x> + scale * h(x)`.
pub trait BregmanSubproblem: Send + Sync {
    fn solve(&self, linear: &[f64], scale: f64) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateKind {
    Proximal,
    Quadratic,
    LipschitzGradient,
    Bregman,
}

impl SurrogateKind {
    pub fn name(self) -> &'static str {
        match self {
            SurrogateKind::Proximal => "proximal",
            SurrogateKind::Quadratic => "quadratic",
            SurrogateKind::LipschitzGradient => "lipschitz-gradient",
            SurrogateKind::Bregman => "bregman",
        }
    }
}

/// Current point `z = (x, y, w)` seen by a block update.
#[derive(Debug, Clone, Copy)]
pub struct PointRef<'a> {
    pub x: &'a BlockVector,
    pub y: &'a [f64],
    pub omega: &'a [f64],
}

pub type SmoothnessFn = dyn Fn(&PointRef<'_>, f64) -> f64 + Send + Sync;

/// Smoothness constant `L_i` (or `q` for the quadratic kind, or the inner
/// step bound for the proximal kind). May depend on the current point.
#[derive(Clone)]
pub enum Smoothness {
    Constant(f64),
    Adaptive(Arc<SmoothnessFn>),
}

impl Smoothness {
    pub fn at(&self, z: &PointRef<'_>, beta: f64) -> f64 {
        match self {
            Smoothness::Constant(l) => *l,
            Smoothness::Adaptive(f) => f(z, beta),
        }
    }
}

impl fmt::Debug for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothness::Constant(l) => f.debug_tuple("Constant").field(l).finish(),
            Smoothness::Adaptive(_) => f.write_str("Adaptive(..)"),
        }
    }
}

pub const DEFAULT_ETA_FLOOR: f64 = 1e-8;
pub const DEFAULT_BREGMAN_KAPPA: f64 = 1.1;

/// Per-block surrogate description.
#[derive(Clone)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    pub kappa: f64,
    pub smoothness: Smoothness,
    pub kernel: Option<Arc<dyn BregmanKernel>>,
    pub subproblem: Option<Arc<dyn BregmanSubproblem>>,
    pub eta_floor: f64,
}

impl fmt::Debug for SurrogateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurrogateSpec")
            .field("kind", &self.kind)
            .field("kappa", &self.kappa)
            .field("smoothness", &self.smoothness)
            .field("kernel", &self.kernel.is_some())
            .field("subproblem", &self.subproblem.is_some())
            .field("eta_floor", &self.eta_floor)
            .finish()
    }
}

impl SurrogateSpec {
    pub fn lipschitz_gradient(smoothness: Smoothness) -> Self {
        Self {
            kind: SurrogateKind::LipschitzGradient,
            kappa: 1.0,
            smoothness,
            kernel: None,
            subproblem: None,
            eta_floor: DEFAULT_ETA_FLOOR,
        }
    }

    /// Quadratic surrogate with `Q_i = q I`.
    pub fn quadratic(q: f64) -> Self {
        Self {
            kind: SurrogateKind::Quadratic,
            ..Self::lipschitz_gradient(Smoothness::Constant(q))
        }
    }

    pub fn bregman(kernel: Arc<dyn BregmanKernel>, smoothness: Smoothness) -> Self {
        Self {
            kind: SurrogateKind::Bregman,
            kappa: DEFAULT_BREGMAN_KAPPA,
            smoothness,
            kernel: Some(kernel),
            subproblem: None,
            eta_floor: DEFAULT_ETA_FLOOR,
        }
    }

    /// Proximal surrogate; `inner_smoothness` bounds the block Lipschitz
    /// constant of `phi_beta` and sets the inner solver's step.
    pub fn proximal(kernel: Arc<dyn BregmanKernel>, kappa: f64, inner_smoothness: Smoothness) -> Self {
        Self {
            kind: SurrogateKind::Proximal,
            kappa,
            smoothness: inner_smoothness,
            kernel: Some(kernel),
            subproblem: None,
            eta_floor: DEFAULT_ETA_FLOOR,
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_eta_floor(mut self, eta_floor: f64) -> Self {
        self.eta_floor = eta_floor;
        self
    }

    pub fn with_subproblem(mut self, solver: Arc<dyn BregmanSubproblem>) -> Self {
        self.subproblem = Some(solver);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_floor > 0.0) {
            return Err(Error::Config(format!(
                "eta_floor must be positive, got {}",
                self.eta_floor
            )));
        }
        match self.kind {
            SurrogateKind::Proximal | SurrogateKind::Bregman if self.kernel.is_none() => Err(Error::Config(format!(
                "{} surrogate requires a kernel",
                self.kind.name()
            ))),
            SurrogateKind::Proximal if !(self.kappa > 0.0) => Err(Error::Config(format!(
                "proximal kappa must be positive, got {}",
                self.kappa
            ))),
            SurrogateKind::Quadratic | SurrogateKind::LipschitzGradient | SurrogateKind::Bregman
                if !(self.kappa >= 1.0) =>
            {
                Err(Error::Config(format!("kappa must be >= 1, got {}", self.kappa)))
            }
            _ => Ok(()),
        }
    }

    /// Constants at `z`. `kappa` is raised just enough that `eta >= eta_floor`.
    pub fn constants_at(&self, z: &PointRef<'_>, beta: f64) -> Result<SurrogateConstants> {
        let smoothness = self.smoothness.at(z, beta);
        if !(smoothness.is_finite() && smoothness > 0.0) {
            return Err(Error::NonFinite("surrogate smoothness constant"));
        }
        let (nominal_eta, kappa) = match self.kind {
            SurrogateKind::Proximal => (self.kappa, self.kappa.max(self.eta_floor)),
            _ => (
                (self.kappa - 1.0) * smoothness,
                self.kappa.max(1.0 + self.eta_floor / smoothness),
            ),
        };
        let eta = match self.kind {
            SurrogateKind::Proximal => kappa,
            _ => (kappa - 1.0) * smoothness,
        };
        Ok(SurrogateConstants {
            smoothness,
            kappa,
            eta,
            nominal_eta,
        })
    }

    /// `D_i(x, z)`: the kernel divergence for Bregman/proximal kinds,
    /// `1/2 ||x - z||^2` otherwise.
    pub fn divergence(&self, x: &[f64], z: &[f64]) -> f64 {
        match (&self.kernel, self.kind) {
            (Some(k), SurrogateKind::Bregman | SurrogateKind::Proximal) => bregman_divergence(k.as_ref(), x, z),
            _ => 0.5 * norm_sq(&sub(x, z)),
        }
    }
}

/// Surrogate constants resolved at the current point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateConstants {
    pub smoothness: f64,
    /// Effective `kappa` after the `eta_floor` clamp.
    pub kappa: f64,
    /// Error lower-bound modulus used by the sufficient-decrease check.
    pub eta: f64,
    /// `eta` implied by the configured (unclamped) `kappa`.
    pub nominal_eta: f64,
}

/// Result of one MM block step.
#[derive(Debug, Clone)]
pub struct BlockUpdate {
    pub x_new: Vec<f64>,
    /// Gradient of the smooth surrogate at the new point, `S_i`. Optimality
    /// gives `-S_i` in the subdifferential of `g_i` at `x_new`.
    pub surrogate_gradient: Vec<f64>,
    pub constants: SurrogateConstants,
    /// `D_i(x_new, z_i)`.
    pub divergence: f64,
}

/// Value of `u_i(x_i, z)` for the given resolved constants.
pub fn evaluate_surrogate(
    block: usize,
    surrogate: &SurrogateSpec,
    spec: &ProblemSpec,
    z: &PointRef<'_>,
    x_i: &[f64],
    beta: f64,
    constants: &SurrogateConstants,
) -> f64 {
    let zi = z.x.block(block);
    match surrogate.kind {
        SurrogateKind::Proximal => {
            let moved = z.x.with_block(block, x_i);
            spec.smooth_value(&moved, z.y, z.omega, beta) + constants.kappa * surrogate.divergence(x_i, zi)
        }
        _ => {
            let base = spec.smooth_value(z.x, z.y, z.omega, beta);
            let grad = spec.smooth_block_gradient(block, z.x, z.y, z.omega, beta);
            let step = sub(x_i, zi);
            let curvature = match surrogate.kind {
                SurrogateKind::Bregman => constants.kappa * constants.smoothness * surrogate.divergence(x_i, zi),
                _ => 0.5 * constants.kappa * constants.smoothness * norm_sq(&step),
            };
            base + dot(&grad, &step) + curvature
        }
    }
}

const PROXIMAL_INNER_MAX_ITERS: usize = 5_000;
const PROXIMAL_INNER_TOL: f64 = 1e-12;

/// One MM step: `argmin_{x_i} u_i(x_i, z) + g_i(x_i)`.
pub fn mm_block_update(
    block: usize,
    surrogate: &SurrogateSpec,
    spec: &ProblemSpec,
    z: &PointRef<'_>,
    beta: f64,
) -> Result<BlockUpdate> {
    let constants = surrogate.constants_at(z, beta)?;
    let g = &spec.g[block];
    let zi = z.x.block(block);
    let no_prox = || Error::NoProx {
        block,
        kind: surrogate.kind.name(),
    };

    let (x_new, surrogate_gradient) = match surrogate.kind {
        SurrogateKind::LipschitzGradient | SurrogateKind::Quadratic => {
            let grad = spec.smooth_block_gradient(block, z.x, z.y, z.omega, beta);
            let curvature = constants.kappa * constants.smoothness;
            let t = 1.0 / curvature;
            let mut v = zi.to_vec();
            axpy(-t, &grad, &mut v);
            let x_new = g.prox(&v, t).ok_or_else(no_prox)?;
            let mut s = grad;
            axpy(curvature, &sub(&x_new, zi), &mut s);
            (x_new, s)
        }
        SurrogateKind::Bregman => {
            let kernel = surrogate.kernel.as_ref().ok_or_else(no_prox)?;
            let grad = spec.smooth_block_gradient(block, z.x, z.y, z.omega, beta);
            let scale = constants.kappa * constants.smoothness;
            let grad_kernel_z = kernel.gradient(zi);
            let mut linear = grad.clone();
            axpy(-scale, &grad_kernel_z, &mut linear);
            let x_new = if let Some(solver) = &surrogate.subproblem {
                solver.solve(&linear, scale)
            } else if kernel.is_euclidean() {
                let v: Vec<f64> = linear.iter().map(|c| -c / scale).collect();
                g.prox(&v, 1.0 / scale).ok_or_else(no_prox)?
            } else {
                return Err(no_prox());
            };
            let mut s = grad;
            axpy(scale, &sub(&kernel.gradient(&x_new), &grad_kernel_z), &mut s);
            (x_new, s)
        }
        SurrogateKind::Proximal => {
            let kernel = surrogate.kernel.as_ref().ok_or_else(no_prox)?;
            if !kernel.is_euclidean() {
                return Err(no_prox());
            }
            proximal_inner_solve(block, spec, z, beta, &constants, g.as_ref()).ok_or_else(no_prox)?
        }
    };

    if !crate::vecops::is_finite(&x_new) {
        return Err(Error::NonFinite("block update"));
    }
    let divergence = surrogate.divergence(&x_new, zi);
    Ok(BlockUpdate {
        x_new,
        surrogate_gradient,
        constants,
        divergence,
    })
}

/// Proximal-gradient loop on `phi_beta(., z_{!=i}) + kappa/2 ||. - z_i||^2 + g_i`
/// with step `1 / (L + kappa)`, warm-started at `z_i`. The objective is
/// convex when `kappa >= L`.
fn proximal_inner_solve(
    block: usize,
    spec: &ProblemSpec,
    z: &PointRef<'_>,
    beta: f64,
    constants: &SurrogateConstants,
    g: &dyn crate::model::Regularizer,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let zi = z.x.block(block);
    let kappa = constants.kappa;
    let step = 1.0 / (constants.smoothness + kappa);
    let smooth_grad = |xi: &[f64]| {
        let moved = z.x.with_block(block, xi);
        let mut grad = spec.smooth_block_gradient(block, &moved, z.y, z.omega, beta);
        axpy(kappa, &sub(xi, zi), &mut grad);
        grad
    };
    let mut x = zi.to_vec();
    for _ in 0..PROXIMAL_INNER_MAX_ITERS {
        let grad = smooth_grad(&x);
        let mut v = x.clone();
        axpy(-step, &grad, &mut v);
        let next = g.prox(&v, step)?;
        let moved = norm(&sub(&next, &x));
        x = next;
        if moved <= PROXIMAL_INNER_TOL * (1.0 + norm(&x)) {
            break;
        }
    }
    let grad = smooth_grad(&x);
    Some((x, grad))
}

/// Condition checks for one accepted block step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateDiagnostics {
    /// `u_i(x+, z) - phi_beta(x+, z_{!=i})`, the approximation error `e_i`.
    pub error: f64,
    /// `|u_i(z_i, z) - phi_beta(z)|`.
    pub tangency_gap: f64,
    pub eta: f64,
    pub divergence: f64,
    /// `e_i - eta D_i`; nonnegative when the lower bound holds.
    pub lower_bound_margin: f64,
    pub majorization_ok: bool,
    pub tangency_ok: bool,
    pub error_bound_ok: bool,
    /// The configured `kappa` implies `eta` below `eta_floor`.
    pub floor_violation: bool,
}

const CONDITION_SLACK: f64 = 1e-9;

/// Evaluates majorization, tangency and the error lower bound
/// `e_i(x+, z) >= eta_i D_i(x+, z_i)` at a candidate point.
pub fn verify_surrogate_conditions(
    block: usize,
    surrogate: &SurrogateSpec,
    spec: &ProblemSpec,
    z: &PointRef<'_>,
    candidate: &[f64],
    beta: f64,
) -> Result<SurrogateDiagnostics> {
    let constants = surrogate.constants_at(z, beta)?;
    let zi = z.x.block(block);
    let u_plus = evaluate_surrogate(block, surrogate, spec, z, candidate, beta, &constants);
    let moved = z.x.with_block(block, candidate);
    let phi_plus = spec.smooth_value(&moved, z.y, z.omega, beta);
    let u_tangent = evaluate_surrogate(block, surrogate, spec, z, zi, beta, &constants);
    let phi_z = spec.smooth_value(z.x, z.y, z.omega, beta);

    let scale = 1.0 + phi_z.abs();
    let error = u_plus - phi_plus;
    let tangency_gap = (u_tangent - phi_z).abs();
    let divergence = surrogate.divergence(candidate, zi);
    let lower_bound_margin = error - constants.eta * divergence;
    Ok(SurrogateDiagnostics {
        error,
        tangency_gap,
        eta: constants.eta,
        divergence,
        lower_bound_margin,
        majorization_ok: error >= -CONDITION_SLACK * scale,
        tangency_ok: tangency_gap <= CONDITION_SLACK * scale,
        error_bound_ok: lower_bound_margin >= -CONDITION_SLACK * scale,
        floor_violation: constants.nominal_eta < surrogate.eta_floor,
    })
}

/// Strong-convexity check of `t = u_i(., z) + g_i` at its minimizer `x+`:
/// `t(probe) >= t(x+) + kappa L / 2 ||probe - x+||^2`. Only meaningful for
/// convex `g_i` with a Lipschitz-gradient (or quadratic) surrogate.
pub fn verify_strong_convexity_condition(
    block: usize,
    surrogate: &SurrogateSpec,
    spec: &ProblemSpec,
    z: &PointRef<'_>,
    minimizer: &[f64],
    probe: &[f64],
    beta: f64,
) -> Result<Option<bool>> {
    if !matches!(
        surrogate.kind,
        SurrogateKind::LipschitzGradient | SurrogateKind::Quadratic
    ) || !spec.g[block].is_convex()
    {
        return Ok(None);
    }
    let constants = surrogate.constants_at(z, beta)?;
    let g_value = |v: &[f64]| match spec.g[block].value(v) {
        ExtendedReal::Finite(x) => Some(x),
        ExtendedReal::Infinite => None,
    };
    let (Some(g_min), Some(g_probe)) = (g_value(minimizer), g_value(probe)) else {
        return Ok(Some(true));
    };
    let t_min = evaluate_surrogate(block, surrogate, spec, z, minimizer, beta, &constants) + g_min;
    let t_probe = evaluate_surrogate(block, surrogate, spec, z, probe, beta, &constants) + g_probe;
    let modulus = constants.kappa * constants.smoothness;
    let bound = t_min + 0.5 * modulus * norm_sq(&sub(probe, minimizer));
    Ok(Some(t_probe >= bound - CONDITION_SLACK * (1.0 + t_min.abs())))
}
