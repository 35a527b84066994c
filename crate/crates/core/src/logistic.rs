//! l1-regularized logistic regression with a quadratic classifier
//!
//! ```text
//! min  (1/q) sum_i log(1 + exp(-b_i phi_i(x))) + lambda1 ||x1||_1 + lambda2 ||x2||_1
//! phi_i(x) = <a_i, x1>^2 + <a_i, x2> + x3
//! ```
//!
//! split as `phi(x) - y = 0` with `h(y) = (1/q) sum_i log(1 + exp(-b_i y_i))`.
//! Blocks: `x1` (Bregman step with the quartic kernel, closed form),
//! `x2` (soft-threshold gradient step), `x3` (scalar gradient step).

use std::sync::Arc;

use crate::data::{Dataset, Rng, INIT_STREAM};
use crate::error::Result;
use crate::madmm::SolverConfig;
use crate::model::{
    BlockVector, Iterate, L1Norm, NegIdentity, NonlinearMap, ProblemSpec, SmoothTerm, ZeroRegularizer, ZeroSmooth,
};
use crate::surrogates::{
    mm_block_update, BregmanSubproblem, PointRef, QuarticKernel, Smoothness, SurrogateSpec, DEFAULT_BREGMAN_KAPPA,
    DEFAULT_ETA_FLOOR,
};
use crate::vecops::{dot, norm1, norm_sq};

pub const X1: usize = 0;
pub const X2: usize = 1;
pub const X3: usize = 2;

/// Lower clamp of the x1 relative-smoothness constant.
pub const MIN_L1: f64 = 1e-12;

/// `beta = 2.5 / q`.
pub fn default_beta(q: usize) -> f64 {
    2.5 / q as f64
}

/// `log(1 + exp(-t))` without overflow.
#[inline]
pub fn log1p_exp_neg(t: f64) -> f64 {
    (-t.abs()).exp().ln_1p() + (-t).max(0.0)
}

/// `1 / (1 + exp(t))` without overflow.
#[inline]
fn sigmoid_neg(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// `phi_i = <a_i, x1>^2 + <a_i, x2> + x3`.
pub fn phi_eval(data: &Dataset, x1: &[f64], x2: &[f64], x3: f64) -> Vec<f64> {
    data.columns()
        .map(|a| {
            let u = dot(a, x1);
            u * u + dot(a, x2) + x3
        })
        .collect()
}

/// `sum_i w_i grad_{x_block} phi_i(x)`.
pub fn phi_jac_block_apply(data: &Dataset, block: usize, x: &BlockVector, w: &[f64]) -> Vec<f64> {
    match block {
        X1 => {
            let x1 = x.block(X1);
            let mut out = vec![0.0; data.d()];
            for (a, wi) in data.columns().zip(w) {
                let c = 2.0 * wi * dot(a, x1);
                if c != 0.0 {
                    crate::vecops::axpy(c, a, &mut out);
                }
            }
            out
        }
        X2 => {
            let mut out = vec![0.0; data.d()];
            for (a, wi) in data.columns().zip(w) {
                if *wi != 0.0 {
                    crate::vecops::axpy(*wi, a, &mut out);
                }
            }
            out
        }
        X3 => vec![w.iter().sum()],
        _ => panic!("logistic problem has 3 blocks, got block {block}"),
    }
}

/// `J d` for a full direction `d`.
pub fn phi_jac_forward(data: &Dataset, x: &BlockVector, dir: &BlockVector) -> Vec<f64> {
    let (x1, d1, d2, d3) = (x.block(X1), dir.block(X1), dir.block(X2), dir.block(X3)[0]);
    data.columns()
        .map(|a| 2.0 * dot(a, x1) * dot(a, d1) + dot(a, d2) + d3)
        .collect()
}

/// `phi` as a [`NonlinearMap`].
#[derive(Debug, Clone)]
pub struct QuadraticClassifierMap {
    pub data: Arc<Dataset>,
}

impl NonlinearMap for QuadraticClassifierMap {
    fn output_dim(&self) -> usize {
        self.data.q()
    }

    fn eval(&self, x: &BlockVector) -> Vec<f64> {
        phi_eval(&self.data, x.block(X1), x.block(X2), x.block(X3)[0])
    }

    fn jac_block_apply(&self, block: usize, x: &BlockVector, w: &[f64]) -> Vec<f64> {
        phi_jac_block_apply(&self.data, block, x, w)
    }

    /// Frobenius norm of the Jacobian.
    fn jac_norm_bound(&self, x: &BlockVector) -> f64 {
        let x1 = x.block(X1);
        self.data
            .columns()
            .map(|a| {
                let u = dot(a, x1);
                (4.0 * u * u + 1.0) * norm_sq(a) + 1.0
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// `h(y) = (1/q) sum_i log(1 + exp(-b_i y_i))`.
#[derive(Debug, Clone)]
pub struct LogisticLoss {
    labels: Vec<f64>,
}

impl LogisticLoss {
    pub fn new(labels: &[f64]) -> Self {
        Self {
            labels: labels.to_vec(),
        }
    }
}

impl SmoothTerm for LogisticLoss {
    fn value(&self, y: &[f64]) -> f64 {
        let q = self.labels.len() as f64;
        self.labels
            .iter()
            .zip(y)
            .map(|(b, v)| log1p_exp_neg(b * v))
            .sum::<f64>()
            / q
    }

    fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let q = self.labels.len() as f64;
        self.labels
            .iter()
            .zip(y)
            .map(|(b, v)| -b * sigmoid_neg(b * v) / q)
            .collect()
    }

    fn lipschitz(&self) -> f64 {
        0.25 / self.labels.len() as f64
    }
}

/// `(h(y), grad h(y))`.
pub fn logistic_h(data: &Dataset, y: &[f64]) -> (f64, Vec<f64>) {
    let h = LogisticLoss::new(data.labels());
    (h.value(y), h.gradient(y))
}

/// `sum_i 2 ||a_i||^2 max{|w_i - beta y_i| + beta |<a_i, x2> + x3|, 3 beta ||a_i||^2}`,
/// clamped below by [`MIN_L1`].
pub fn bregman_constant_x1(data: &Dataset, x2: &[f64], x3: f64, y: &[f64], omega: &[f64], beta: f64) -> f64 {
    let total: f64 = data
        .columns()
        .zip(data.column_norms())
        .zip(y.iter().zip(omega))
        .map(|((a, n), (yi, wi))| {
            let n2 = n * n;
            let first = (wi - beta * yi).abs() + beta * (dot(a, x2) + x3).abs();
            2.0 * n2 * first.max(3.0 * beta * n2)
        })
        .sum();
    total.max(MIN_L1)
}

/// `argmin_x lambda1 ||x||_1 + <c, x> + l1 (1/4 ||x||^4 + 1/2 ||x||^2)`.
pub fn lemma1_solve(c_tilde: &[f64], lambda1: f64, l1: f64) -> Vec<f64> {
    assert!(l1 > 0.0, "lemma1_solve needs l1 > 0");
    let t_vec: Vec<f64> = c_tilde
        .iter()
        .map(|c| -(c.abs() - lambda1).max(0.0) * c.signum())
        .collect();
    let c = norm_sq(&t_vec).sqrt();
    if c == 0.0 {
        return vec![0.0; c_tilde.len()];
    }
    let t = cubic_root(c, l1);
    t_vec.iter().map(|v| t * v / c).collect()
}

/// Nonnegative root of `l t^3 + l t - c = 0` (`c > 0`) by Cardano.
pub fn cubic_root(c: f64, l: f64) -> f64 {
    let p = c / l;
    let half = 0.5 * p;
    let disc = (1.0 / 27.0 + half * half).sqrt();
    let s1 = (half + disc).cbrt();
    let s2 = real_cbrt(half - disc);
    // s1 + s2 cancels for small p; s1^3 + s2^3 = p = t (s1^2 + 1/3 + s2^2).
    let mut t = p / (s1 * s1 + s2 * s2 + 1.0 / 3.0);
    // One Newton polish.
    t -= (t * t * t + t - p) / (3.0 * t * t + 1.0);
    t.max(0.0)
}

fn real_cbrt(v: f64) -> f64 {
    if v < 0.0 {
        -(-v).cbrt()
    } else {
        v.cbrt()
    }
}

/// Objective of the x1 subproblem.
pub fn lemma1_objective(x: &[f64], c_tilde: &[f64], lambda1: f64, l1: f64) -> f64 {
    let s = norm_sq(x);
    lambda1 * norm1(x) + dot(c_tilde, x) + l1 * (0.25 * s * s + 0.5 * s)
}

/// Closed-form x1 subproblem solver plugged into the Bregman surrogate.
#[derive(Debug, Clone, Copy)]
pub struct Lemma1Solver {
    pub lambda1: f64,
}

impl BregmanSubproblem for Lemma1Solver {
    fn solve(&self, linear: &[f64], scale: f64) -> Vec<f64> {
        lemma1_solve(linear, self.lambda1, scale)
    }
}

/// `h(phi(x)) + lambda1 ||x1||_1 + lambda2 ||x2||_1`.
pub fn fitting_error(data: &Dataset, lambda1: f64, lambda2: f64, x: &BlockVector) -> f64 {
    let phi = phi_eval(data, x.block(X1), x.block(X2), x.block(X3)[0]);
    let (h, _) = logistic_h(data, &phi);
    h + lambda1 * norm1(x.block(X1)) + lambda2 * norm1(x.block(X2))
}

/// Surrogate knobs. `kappa1` scales the x1 constant; `kappa2`, `kappa3`
/// scale `beta sum ||a_i||^2` and `beta q`. `eta_floor` applies to all
/// blocks, so with `kappa = 1` the effective x2/x3 curvature is
/// `l + eta_floor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub eta_floor: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            kappa1: DEFAULT_BREGMAN_KAPPA,
            kappa2: 1.0,
            kappa3: 1.0,
            eta_floor: DEFAULT_ETA_FLOOR,
        }
    }
}

/// Problem plus block surrogates, ready for [`crate::madmm::run`].
pub struct LogisticProblem {
    pub data: Arc<Dataset>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub config: LogisticConfig,
    spec: ProblemSpec,
    surrogates: Vec<SurrogateSpec>,
}

impl LogisticProblem {
    pub fn new(data: Arc<Dataset>, lambda1: f64, lambda2: f64, config: LogisticConfig) -> Result<Self> {
        if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
            return Err(crate::Error::Config(format!(
                "lambda1 and lambda2 must be nonnegative, got {lambda1}, {lambda2}"
            )));
        }
        let d = data.d();
        let q = data.q();
        let objective_data = data.clone();
        let spec = ProblemSpec::new(
            vec![d, d, 1],
            Arc::new(ZeroSmooth),
            vec![
                Arc::new(L1Norm { weight: lambda1 }),
                Arc::new(L1Norm { weight: lambda2 }),
                Arc::new(ZeroRegularizer),
            ],
            Arc::new(LogisticLoss::new(data.labels())),
            Arc::new(QuadraticClassifierMap { data: data.clone() }),
            Arc::new(NegIdentity { dim: q }),
        )?
        .with_lower_bound(0.0)
        .with_objective(Arc::new(move |x| fitting_error(&objective_data, lambda1, lambda2, x)));

        let x1_data = data.clone();
        let x1 = SurrogateSpec::bregman(
            Arc::new(QuarticKernel),
            Smoothness::Adaptive(Arc::new(move |z: &PointRef<'_>, beta| {
                bregman_constant_x1(&x1_data, z.x.block(X2), z.x.block(X3)[0], z.y, z.omega, beta)
            })),
        )
        .with_kappa(config.kappa1)
        .with_subproblem(Arc::new(Lemma1Solver { lambda1 }))
        .with_eta_floor(config.eta_floor);

        let sum_sq: f64 = data.column_norms().iter().map(|n| n * n).sum();
        let x2 = SurrogateSpec::lipschitz_gradient(Smoothness::Adaptive(Arc::new(move |_: &PointRef<'_>, beta| {
            beta * sum_sq
        })))
        .with_kappa(config.kappa2)
        .with_eta_floor(config.eta_floor);

        let qf = q as f64;
        let x3 =
            SurrogateSpec::lipschitz_gradient(Smoothness::Adaptive(Arc::new(move |_: &PointRef<'_>, beta| beta * qf)))
                .with_kappa(config.kappa3)
                .with_eta_floor(config.eta_floor);

        Ok(Self {
            data,
            lambda1,
            lambda2,
            config,
            spec,
            surrogates: vec![x1, x2, x3],
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn surrogates(&self) -> &[SurrogateSpec] {
        &self.surrogates
    }

    /// `L_h = 1 / (4q)`.
    pub fn l_h(&self) -> f64 {
        0.25 / self.data.q() as f64
    }

    /// Solver configuration with `beta = 2.5 / q`.
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig::new(default_beta(self.data.q()))
    }

    /// `x1, x2, x3, y` uniform on `[0, 1)` from the seed's init stream
    /// (in that order); `w = 0`.
    pub fn initial_point(&self, seed: u64) -> Iterate {
        initial_point(&self.data, seed)
    }

    pub fn fitting_error(&self, x: &BlockVector) -> f64 {
        fitting_error(&self.data, self.lambda1, self.lambda2, x)
    }

    /// `grad_{x1} phi_beta(z) - l1 grad h(x1)` with `l1` already scaled by
    /// `kappa1`.
    pub fn x1_linear_term(&self, z: &PointRef<'_>, beta: f64) -> Result<(Vec<f64>, f64)> {
        let constants = self.surrogates[X1].constants_at(z, beta)?;
        let scale = constants.kappa * constants.smoothness;
        let mut c = self.spec.smooth_block_gradient(X1, z.x, z.y, z.omega, beta);
        let x1 = z.x.block(X1);
        let kernel_scale = scale * (norm_sq(x1) + 1.0);
        crate::vecops::axpy(-kernel_scale, x1, &mut c);
        Ok((c, scale))
    }

    pub fn x1_update(&self, z: &PointRef<'_>, beta: f64) -> Result<Vec<f64>> {
        Ok(mm_block_update(X1, &self.surrogates[X1], &self.spec, z, beta)?.x_new)
    }

    pub fn x2_update(&self, z: &PointRef<'_>, beta: f64) -> Result<Vec<f64>> {
        Ok(mm_block_update(X2, &self.surrogates[X2], &self.spec, z, beta)?.x_new)
    }

    pub fn x3_update(&self, z: &PointRef<'_>, beta: f64) -> Result<f64> {
        Ok(mm_block_update(X3, &self.surrogates[X3], &self.spec, z, beta)?.x_new[0])
    }
}

pub fn initial_point(data: &Dataset, seed: u64) -> Iterate {
    let mut rng = Rng::new(seed, INIT_STREAM);
    let d = data.d();
    let x1 = rng.uniform_vec(d);
    let x2 = rng.uniform_vec(d);
    let x3 = rng.uniform_vec(1);
    let y = rng.uniform_vec(data.q());
    Iterate {
        x: BlockVector::new(vec![x1, x2, x3]),
        y,
        omega: vec![0.0; data.q()],
    }
}
