//! Prox-linear baseline for composite problems `min g(x) + h(c(x))`
//!
//! ```text
//! x+ = argmin_x g(x) + h(c(x^k) + J(x^k)(x - x^k)) + 1/(2 tau) ||x - x^k||^2
//! ```
//!
//! Each subproblem is convex and solved approximately by accelerated
//! proximal gradient (FISTA with monotone restart), warm-started at `x^k`.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::logistic::{self, log1p_exp_neg, X1, X3};
use crate::madmm::TraceSampling;
use crate::model::{BlockVector, ExtendedReal, L1Norm, Regularizer, ZeroRegularizer};
use crate::trace::{StopReason, Trace, TraceRecord};
use crate::vecops::{axpy, dot, norm_sq};

pub const DEFAULT_INNER_MAX_ITERS: usize = 500;
pub const DEFAULT_INNER_TOL: f64 = 1e-6;
/// Slack of the outer monotonicity monitor.
pub const MONOTONE_SLACK: f64 = 1e-6;

/// Outer convex function `h`, inner smooth map `c` and per-block `g`.
pub trait ProxLinearModel: Send + Sync {
    fn block_dims(&self) -> Vec<usize>;
    /// `c(x)`.
    fn inner(&self, x: &BlockVector) -> Vec<f64>;
    /// `J(x) d`.
    fn jac_apply(&self, x: &BlockVector, d: &BlockVector) -> Vec<f64>;
    /// `J(x)^T w`.
    fn jac_t_apply(&self, x: &BlockVector, w: &[f64]) -> BlockVector;
    /// Upper bound on `||J(x)||_2^2`.
    fn jac_norm_sq_bound(&self, x: &BlockVector) -> f64;
    fn outer_value(&self, z: &[f64]) -> f64;
    fn outer_gradient(&self, z: &[f64]) -> Vec<f64>;
    fn outer_lipschitz(&self) -> f64;
    fn regularizers(&self) -> &[Arc<dyn Regularizer>];

    /// `h(c(x)) + g(x)`.
    fn objective(&self, x: &BlockVector) -> f64 {
        self.outer_value(&self.inner(x)) + regularizer_value(self.regularizers(), x)
    }
}

fn regularizer_value(regs: &[Arc<dyn Regularizer>], x: &BlockVector) -> f64 {
    regs.iter()
        .enumerate()
        .map(|(i, g)| match g.value(x.block(i)) {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::Infinite => f64::INFINITY,
        })
        .sum()
}

fn block_prox(regs: &[Arc<dyn Regularizer>], v: &BlockVector, t: f64) -> Result<BlockVector> {
    let blocks = regs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            g.prox(v.block(i), t).ok_or(Error::NoProx {
                block: i,
                kind: "prox-linear",
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockVector::new(blocks))
}

fn block_axpy(alpha: f64, x: &BlockVector, y: &mut BlockVector) {
    for i in 0..x.num_blocks() {
        axpy(alpha, x.block(i), y.block_mut(i));
    }
}

fn block_sub(a: &BlockVector, b: &BlockVector) -> BlockVector {
    let mut out = a.clone();
    block_axpy(-1.0, b, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Accelerated proximal gradient
// ---------------------------------------------------------------------------

/// `s(x) + sum_i g_i(x_i)` with `s` smooth.
pub trait CompositeObjective {
    fn smooth_value(&self, x: &BlockVector) -> f64;
    fn smooth_gradient(&self, x: &BlockVector) -> BlockVector;
    fn regularizers(&self) -> &[Arc<dyn Regularizer>];

    fn value(&self, x: &BlockVector) -> f64 {
        self.smooth_value(x) + regularizer_value(self.regularizers(), x)
    }
}

#[derive(Debug, Clone)]
pub struct ApgResult {
    pub x: BlockVector,
    pub iterations: usize,
    /// `L ||y - prox(y - grad s(y) / L)||` at the last step.
    pub mapping_norm: f64,
}

/// FISTA with fixed step `1 / lipschitz`; momentum restarts whenever the
/// objective would increase.
pub fn apg_solve(
    problem: &dyn CompositeObjective,
    x0: &BlockVector,
    lipschitz: f64,
    max_iters: usize,
    tol: f64,
) -> Result<ApgResult> {
    apg_solve_until(problem, x0, lipschitz, max_iters, tol, None)
}

/// [`apg_solve`] that also returns its current iterate once `deadline`
/// passes.
pub fn apg_solve_until(
    problem: &dyn CompositeObjective,
    x0: &BlockVector,
    lipschitz: f64,
    max_iters: usize,
    tol: f64,
    deadline: Option<Instant>,
) -> Result<ApgResult> {
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::Config(format!(
            "APG step constant must be positive, got {lipschitz}"
        )));
    }
    let step = 1.0 / lipschitz;
    let regs = problem.regularizers();
    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut fx = problem.value(&x);
    let mut t = 1.0_f64;
    let mut mapping_norm = f64::INFINITY;
    let mut iterations = 0;
    let mut momentum = false;

    while iterations < max_iters {
        iterations += 1;
        let grad = problem.smooth_gradient(&y);
        let mut v = y.clone();
        block_axpy(-step, &grad, &mut v);
        let x_new = block_prox(regs, &v, step)?;
        mapping_norm = lipschitz * x_new.distance(&y);
        let f_new = problem.value(&x_new);
        if !f_new.is_finite() {
            return Err(Error::NonFinite("prox-linear subproblem"));
        }
        if f_new > fx && momentum {
            y = x.clone();
            t = 1.0;
            momentum = false;
            continue;
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mut y_new = x_new.clone();
        block_axpy((t - 1.0) / t_new, &block_sub(&x_new, &x), &mut y_new);
        x = x_new;
        fx = f_new;
        y = y_new;
        t = t_new;
        momentum = true;
        if mapping_norm <= tol || deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
    }
    Ok(ApgResult {
        x,
        iterations,
        mapping_norm,
    })
}

// ---------------------------------------------------------------------------
// Prox-linear
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ProxLinearConfig {
    pub tau: f64,
    pub inner_max_iters: usize,
    pub inner_tol: f64,
    pub wall_clock_budget: Option<Duration>,
    pub max_outer_iters: usize,
    pub seed: u64,
    pub sampling: TraceSampling,
    pub solver_name: String,
}

impl ProxLinearConfig {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            inner_max_iters: DEFAULT_INNER_MAX_ITERS,
            inner_tol: DEFAULT_INNER_TOL,
            wall_clock_budget: None,
            max_outer_iters: usize::MAX,
            seed: 0,
            sampling: TraceSampling::EveryIteration,
            solver_name: "proxlinear".to_owned(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::Config(format!(
                "inner_tol must be positive, got {}",
                self.inner_tol
            )));
        }
        if self.wall_clock_budget.is_none() && self.max_outer_iters == usize::MAX {
            return Err(Error::Config("prox-linear needs a budget or an iteration limit".into()));
        }
        Ok(())
    }
}

/// Linearized subproblem at `xk`.
struct Subproblem<'a> {
    model: &'a dyn ProxLinearModel,
    xk: &'a BlockVector,
    ck: Vec<f64>,
    tau: f64,
}

impl Subproblem<'_> {
    fn affine(&self, x: &BlockVector) -> Vec<f64> {
        let mut z = self.model.jac_apply(self.xk, &block_sub(x, self.xk));
        axpy(1.0, &self.ck, &mut z);
        z
    }
}

impl CompositeObjective for Subproblem<'_> {
    fn smooth_value(&self, x: &BlockVector) -> f64 {
        let dx = x.distance(self.xk);
        self.model.outer_value(&self.affine(x)) + dx * dx / (2.0 * self.tau)
    }

    fn smooth_gradient(&self, x: &BlockVector) -> BlockVector {
        let w = self.model.outer_gradient(&self.affine(x));
        let mut grad = self.model.jac_t_apply(self.xk, &w);
        block_axpy(1.0 / self.tau, &block_sub(x, self.xk), &mut grad);
        grad
    }

    fn regularizers(&self) -> &[Arc<dyn Regularizer>] {
        self.model.regularizers()
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub x: BlockVector,
    pub inner_iterations: usize,
    pub mapping_norm: f64,
    /// Subproblem objective at `x^k` and at the returned point.
    pub model_before: f64,
    pub model_after: f64,
}

/// One prox-linear step from `xk`.
pub fn prox_linear_step(
    model: &dyn ProxLinearModel,
    xk: &BlockVector,
    config: &ProxLinearConfig,
) -> Result<StepOutcome> {
    prox_linear_step_until(model, xk, config, None)
}

/// [`prox_linear_step`] whose inner solve stops early at `deadline`.
pub fn prox_linear_step_until(
    model: &dyn ProxLinearModel,
    xk: &BlockVector,
    config: &ProxLinearConfig,
    deadline: Option<Instant>,
) -> Result<StepOutcome> {
    let sub = Subproblem {
        model,
        xk,
        ck: model.inner(xk),
        tau: config.tau,
    };
    let lipschitz = model.outer_lipschitz() * model.jac_norm_sq_bound(xk) + 1.0 / config.tau;
    let res = apg_solve_until(&sub, xk, lipschitz, config.inner_max_iters, config.inner_tol, deadline)?;
    if !crate::vecops::is_finite(&res.x.concat()) {
        return Err(Error::NonFinite("prox-linear step"));
    }
    Ok(StepOutcome {
        model_before: sub.value(xk),
        model_after: sub.value(&res.x),
        inner_iterations: res.iterations,
        mapping_norm: res.mapping_norm,
        x: res.x,
    })
}

/// Iterates [`prox_linear_step`] until the budget or iteration limit; the
/// last inner solve is cut short at the budget. Trace rows carry `fit` and
/// `dx`; the remaining columns are NaN.
pub fn run_proxlinear(model: &dyn ProxLinearModel, init: BlockVector, config: &ProxLinearConfig) -> Result<Trace> {
    config.validate()?;
    let mut x = init;
    let mut fit = model.objective(&x);
    let mut records = vec![TraceRecord::basic(&config.solver_name, 0, 0.0, fit)];
    let mut violations = Vec::new();
    let mut solver_time = Duration::ZERO;
    let mut last_sample = Duration::ZERO;
    let mut k = 0;

    let stop_reason = loop {
        if k >= config.max_outer_iters {
            break StopReason::MaxIterations;
        }
        if config.wall_clock_budget.is_some_and(|b| solver_time >= b) {
            break StopReason::Budget;
        }
        let started = Instant::now();
        let deadline = config
            .wall_clock_budget
            .map(|b| started + b.saturating_sub(solver_time));
        let step = prox_linear_step_until(model, &x, config, deadline)?;
        let new_fit = model.objective(&step.x);
        let iteration_time = started.elapsed();
        solver_time += iteration_time;
        k += 1;

        let dx = step.x.distance(&x);
        if new_fit > fit + MONOTONE_SLACK {
            let v = crate::madmm::Violation {
                iteration: k,
                inequality: "fit-monotone".into(),
                excess: new_fit - fit - MONOTONE_SLACK,
            };
            log::warn!(
                "prox-linear fitting error increased at iteration {k} by {:e}",
                new_fit - fit
            );
            violations.push(v);
        }
        x = step.x;
        fit = new_fit;

        let sample = match config.sampling {
            TraceSampling::EveryIteration => true,
            TraceSampling::Adaptive => {
                iteration_time < Duration::from_millis(1) || solver_time - last_sample >= Duration::from_millis(10)
            }
        };
        let last = k >= config.max_outer_iters || config.wall_clock_budget.is_some_and(|b| solver_time >= b);
        if sample || last {
            let mut rec = TraceRecord::basic(&config.solver_name, k, solver_time.as_secs_f64(), fit);
            rec.dx = dx;
            records.push(rec);
            last_sample = solver_time;
        }
    };

    Ok(Trace {
        solver: config.solver_name.clone(),
        records,
        iterations: k,
        stop_reason,
        elapsed_sec: solver_time.as_secs_f64(),
        final_fit: fit,
        final_residuals: None,
        violations,
    })
}

// ---------------------------------------------------------------------------
// Logistic model
// ---------------------------------------------------------------------------

/// `h(z) = (1/q) sum log(1 + exp(-z_i))`, `c_i(x) = b_i phi_i(x)`,
/// `g = lambda1 ||x1||_1 + lambda2 ||x2||_1`.
pub struct LogisticProxModel {
    data: Arc<Dataset>,
    regs: Vec<Arc<dyn Regularizer>>,
}

impl LogisticProxModel {
    pub fn new(data: Arc<Dataset>, lambda1: f64, lambda2: f64) -> Self {
        Self {
            data,
            regs: vec![
                Arc::new(L1Norm { weight: lambda1 }),
                Arc::new(L1Norm { weight: lambda2 }),
                Arc::new(ZeroRegularizer),
            ],
        }
    }

    /// `tau = 1 / (L_h L_c)` with `L_h = 1/(4q)` and
    /// `L_c = 2 sqrt(sum_i ||a_i||^4)`; `2 sqrt(q)` for unit columns.
    pub fn default_tau(&self) -> f64 {
        let l_h = 0.25 / self.data.q() as f64;
        let l_c = 2.0 * self.data.column_norms().iter().map(|n| n.powi(4)).sum::<f64>().sqrt();
        1.0 / (l_h * l_c)
    }
}

impl ProxLinearModel for LogisticProxModel {
    fn block_dims(&self) -> Vec<usize> {
        vec![self.data.d(), self.data.d(), 1]
    }

    fn inner(&self, x: &BlockVector) -> Vec<f64> {
        let phi = logistic::phi_eval(&self.data, x.block(X1), x.block(1), x.block(X3)[0]);
        phi.iter().zip(self.data.labels()).map(|(p, b)| b * p).collect()
    }

    fn jac_apply(&self, x: &BlockVector, d: &BlockVector) -> Vec<f64> {
        let jd = logistic::phi_jac_forward(&self.data, x, d);
        jd.iter().zip(self.data.labels()).map(|(v, b)| b * v).collect()
    }

    fn jac_t_apply(&self, x: &BlockVector, w: &[f64]) -> BlockVector {
        let bw: Vec<f64> = w.iter().zip(self.data.labels()).map(|(v, b)| b * v).collect();
        BlockVector::new(
            (0..3)
                .map(|i| logistic::phi_jac_block_apply(&self.data, i, x, &bw))
                .collect(),
        )
    }

    /// Squared Frobenius norm.
    fn jac_norm_sq_bound(&self, x: &BlockVector) -> f64 {
        let x1 = x.block(X1);
        self.data
            .columns()
            .map(|a| {
                let u = dot(a, x1);
                (4.0 * u * u + 1.0) * norm_sq(a) + 1.0
            })
            .sum()
    }

    fn outer_value(&self, z: &[f64]) -> f64 {
        z.iter().map(|v| log1p_exp_neg(*v)).sum::<f64>() / z.len() as f64
    }

    fn outer_gradient(&self, z: &[f64]) -> Vec<f64> {
        let q = z.len() as f64;
        z.iter()
            .map(|v| {
                let s = if *v >= 0.0 {
                    let e = (-v).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + v.exp())
                };
                -s / q
            })
            .collect()
    }

    fn outer_lipschitz(&self) -> f64 {
        0.25 / self.data.q() as f64
    }

    fn regularizers(&self) -> &[Arc<dyn Regularizer>] {
        &self.regs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ZeroRegularizer;
    use approx::assert_relative_eq;

    /// `c = id`, `h = 1/2 ||.||^2`, `g = 0`.
    struct Toy {
        n: usize,
        regs: Vec<Arc<dyn Regularizer>>,
    }

    impl Toy {
        fn new(n: usize) -> Self {
            Self {
                n,
                regs: vec![Arc::new(ZeroRegularizer)],
            }
        }
    }

    impl ProxLinearModel for Toy {
        fn block_dims(&self) -> Vec<usize> {
            vec![self.n]
        }
        fn inner(&self, x: &BlockVector) -> Vec<f64> {
            x.block(0).to_vec()
        }
        fn jac_apply(&self, _x: &BlockVector, d: &BlockVector) -> Vec<f64> {
            d.block(0).to_vec()
        }
        fn jac_t_apply(&self, _x: &BlockVector, w: &[f64]) -> BlockVector {
            BlockVector::new(vec![w.to_vec()])
        }
        fn jac_norm_sq_bound(&self, _x: &BlockVector) -> f64 {
            1.0
        }
        fn outer_value(&self, z: &[f64]) -> f64 {
            0.5 * norm_sq(z)
        }
        fn outer_gradient(&self, z: &[f64]) -> Vec<f64> {
            z.to_vec()
        }
        fn outer_lipschitz(&self) -> f64 {
            1.0
        }
        fn regularizers(&self) -> &[Arc<dyn Regularizer>] {
            &self.regs
        }
    }

    #[test]
    fn toy_step_is_geometric() {
        let toy = Toy::new(3);
        let mut cfg = ProxLinearConfig::new(0.5);
        cfg.inner_tol = 1e-12;
        let x0 = BlockVector::new(vec![vec![1.0, -2.0, 4.0]]);
        let step = prox_linear_step(&toy, &x0, &cfg).unwrap();
        for (a, b) in step.x.block(0).iter().zip(x0.block(0)) {
            assert_relative_eq!(*a, b / 1.5, epsilon = 1e-12);
        }
        let fixed = prox_linear_step(&toy, &BlockVector::zeros(&[3]), &cfg).unwrap();
        assert!(fixed.x.norm() <= 1e-12);
    }

    struct Shifted {
        c: BlockVector,
        regs: Vec<Arc<dyn Regularizer>>,
    }

    impl CompositeObjective for Shifted {
        fn smooth_value(&self, x: &BlockVector) -> f64 {
            let d = x.distance(&self.c);
            0.5 * d * d
        }
        fn smooth_gradient(&self, x: &BlockVector) -> BlockVector {
            block_sub(x, &self.c)
        }
        fn regularizers(&self) -> &[Arc<dyn Regularizer>] {
            &self.regs
        }
    }

    #[test]
    fn apg_quadratic_and_lasso() {
        let c = BlockVector::new(vec![(0..40).map(|i| (i as f64 * 0.37).sin()).collect()]);
        let quad = Shifted {
            c: c.clone(),
            regs: vec![Arc::new(ZeroRegularizer)],
        };
        let res = apg_solve(&quad, &BlockVector::zeros(&[40]), 1.0, 50, 1e-8).unwrap();
        assert!(res.iterations <= 50);
        assert!(res.x.distance(&c) <= 1e-8);

        let lasso = Shifted {
            c: c.clone(),
            regs: vec![Arc::new(L1Norm { weight: 0.3 })],
        };
        let res = apg_solve(&lasso, &BlockVector::zeros(&[40]), 1.0, 50, 1e-8).unwrap();
        let expected = crate::vecops::soft_threshold(c.block(0), 0.3);
        assert!(crate::vecops::dist(res.x.block(0), &expected) <= 1e-8);
    }

    #[test]
    fn default_tau_for_unit_columns() {
        let data = crate::data::synthetic_generate(20, 16, &mut crate::data::Rng::new(3, 1)).unwrap();
        let model = LogisticProxModel::new(Arc::new(data), 0.0, 0.0);
        assert_relative_eq!(model.default_tau(), 8.0, max_relative = 1e-12);
    }

    #[test]
    fn config_needs_a_stopping_rule() {
        assert!(ProxLinearConfig::new(1.0).validate().is_err());
        let mut cfg = ProxLinearConfig::new(1.0);
        cfg.max_outer_iters = 3;
        assert!(cfg.validate().is_ok());
        cfg.tau = 0.0;
        assert!(cfg.validate().is_err());
    }
}
