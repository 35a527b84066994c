//! Multiblock ADMM with MM block updates.
//!
//! One outer iteration, in this exact order:
//!
//! 1. for `i = 1..m`: `x_i <- argmin u_i(x_i, x^{k,i-1}, y^k, w^k) + g_i(x_i)`
//! 2. `y <- (beta B^*B + L_h I)^{-1} (L_h y - grad h(y) - B^*(w + beta phi(x)))`
//! 3. `w <- w + beta (phi(x) + B y)`
//!
//! With `delta = L_h + beta lambda_min(B^*B)` and `delta_hat = 2 L_h` the
//! monitored Lyapunov sequence is
//! `L^k + 3 delta_tilde delta_hat^2 / (beta sigma_B) ||dy^k||^2`, which is
//! non-increasing for `k >= 1` whenever [`check_beta_condition`] holds.

use std::time::{Duration, Instant};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_dim, Error, Result};
use crate::model::{BlockVector, Iterate, ProblemSpec};
use crate::surrogates::{mm_block_update, PointRef, SurrogateSpec};
use crate::trace::{StopReason, Trace, TraceRecord};
use crate::vecops::{axpy, dist, norm, norm_sq, sub};

pub const DEFAULT_DELTA_TILDE: f64 = 1.5;
/// Absolute slack of every decrease check, scaled by `1 + |L^k|`.
pub const DIAGNOSTIC_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DiagnosticsLevel {
    Off,
    /// Per-block and y-step sufficient decrease.
    DecreaseChecks,
    /// Also Lyapunov monotonicity and the `R_y <= delta_hat ||dy||` bound.
    FullLyapunov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceSampling {
    EveryIteration,
    /// Every iteration while an iteration costs under 1 ms, otherwise at
    /// most once per 10 ms of solver time.
    Adaptive,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub beta: f64,
    pub delta_tilde: f64,
    pub max_outer_iters: usize,
    pub wall_clock_budget: Option<Duration>,
    /// Stop once the combined residual is at most this value; 0 disables.
    pub stop_epsilon: f64,
    pub diagnostics: DiagnosticsLevel,
    pub seed: u64,
    /// Refuse to start when `beta` violates the parameter condition.
    pub enforce_beta_condition: bool,
    /// Turn diagnostic violations into errors.
    pub strict: bool,
    pub sampling: TraceSampling,
    pub solver_name: String,
}

impl SolverConfig {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            delta_tilde: DEFAULT_DELTA_TILDE,
            max_outer_iters: 1000,
            wall_clock_budget: None,
            stop_epsilon: 1e-5,
            diagnostics: DiagnosticsLevel::Off,
            seed: 0,
            enforce_beta_condition: true,
            strict: false,
            sampling: TraceSampling::EveryIteration,
            solver_name: "madmm".to_owned(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.delta_tilde > 1.0) {
            return Err(Error::Config(format!(
                "delta_tilde must exceed 1, got {}",
                self.delta_tilde
            )));
        }
        if !(self.stop_epsilon >= 0.0) {
            return Err(Error::Config("stop_epsilon must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Both sides of `beta (L_h + beta lambda_min) >= 6 L_h^2 (5 + 4 delta_tilde) / sigma_B`.
pub fn beta_condition_sides(l_h: f64, lambda_min_btb: f64, sigma_b: f64, delta_tilde: f64, beta: f64) -> (f64, f64) {
    let lhs = beta * (l_h + beta * lambda_min_btb);
    let rhs = 6.0 * l_h * l_h * (5.0 + 4.0 * delta_tilde) / sigma_b;
    (lhs, rhs)
}

pub fn check_beta_condition(l_h: f64, lambda_min_btb: f64, sigma_b: f64, delta_tilde: f64, beta: f64) -> bool {
    let (lhs, rhs) = beta_condition_sides(l_h, lambda_min_btb, sigma_b, delta_tilde, beta);
    lhs >= rhs
}

// ---------------------------------------------------------------------------
// y-update
// ---------------------------------------------------------------------------

enum YFactor {
    /// `B = c I`: the system matrix is `(beta c^2 + L_h) I`.
    Scalar(f64),
    Dense(Cholesky<f64, Dyn>),
}

/// Cached solver for `(beta B^*B + L_h I) y = rhs`; the matrix is constant
/// over a run.
pub struct YSolver {
    factor: YFactor,
    beta: f64,
    l_h: f64,
}

impl YSolver {
    pub fn new(spec: &ProblemSpec, beta: f64) -> Result<Self> {
        let l_h = spec.h.lipschitz();
        let q = spec.y_dim();
        let factor = if let Some(c) = spec.b.scaled_identity() {
            let diag = beta * c * c + l_h;
            if !(diag > 0.0) {
                return Err(Error::SingularSystem(format!(
                    "beta B^*B + L_h I is singular (diagonal {diag})"
                )));
            }
            YFactor::Scalar(diag)
        } else {
            let mut m = DMatrix::<f64>::zeros(q, q);
            let mut e = vec![0.0; q];
            for j in 0..q {
                e[j] = 1.0;
                let col = spec.b.adjoint_apply(&spec.b.apply(&e));
                for (i, v) in col.iter().enumerate() {
                    m[(i, j)] = beta * v;
                }
                m[(j, j)] += l_h;
                e[j] = 0.0;
            }
            // Symmetrize against round-off in user-supplied adjoints.
            let m = (&m + m.transpose()) * 0.5;
            let chol = Cholesky::new(m)
                .ok_or_else(|| Error::SingularSystem("beta B^*B + L_h I is not positive definite".into()))?;
            YFactor::Dense(chol)
        };
        Ok(Self { factor, beta, l_h })
    }

    fn system_apply(&self, spec: &ProblemSpec, y: &[f64]) -> Vec<f64> {
        let mut out = spec.b.adjoint_apply(&spec.b.apply(y));
        out.iter_mut()
            .zip(y)
            .for_each(|(o, v)| *o = self.beta * *o + self.l_h * v);
        out
    }

    /// Solves the y-subproblem and verifies its stationarity.
    pub fn solve(&self, spec: &ProblemSpec, x_next: &BlockVector, y: &[f64], omega: &[f64]) -> Result<Vec<f64>> {
        let rhs = y_update_rhs(spec, x_next, y, omega, self.beta);
        let y_next = match &self.factor {
            YFactor::Scalar(diag) => rhs.iter().map(|v| v / diag).collect::<Vec<_>>(),
            YFactor::Dense(chol) => chol.solve(&DVector::from_column_slice(&rhs)).as_slice().to_vec(),
        };
        if let YFactor::Dense(_) = self.factor {
            let check = self.system_apply(spec, &y_next);
            let gap = dist(&check, &rhs);
            if gap > 1e-10 * (1.0 + norm(&rhs)) {
                return Err(Error::SingularSystem(format!(
                    "y-subproblem stationarity residual {gap:e} too large"
                )));
            }
        }
        if !crate::vecops::is_finite(&y_next) {
            return Err(Error::NonFinite("y update"));
        }
        Ok(y_next)
    }
}

/// `L_h y - grad h(y) - B^*(w + beta phi(x))`.
fn y_update_rhs(spec: &ProblemSpec, x_next: &BlockVector, y: &[f64], omega: &[f64], beta: f64) -> Vec<f64> {
    let l_h = spec.h.lipschitz();
    let phi = spec.phi.eval(x_next);
    let mut dual = omega.to_vec();
    axpy(beta, &phi, &mut dual);
    let bt = spec.b.adjoint_apply(&dual);
    let grad_h = spec.h.gradient(y);
    y.iter()
        .zip(&grad_h)
        .zip(&bt)
        .map(|((yi, gi), bi)| l_h * yi - gi - bi)
        .collect()
}

/// Closed-form y-update; factorizes on every call. [`run`] caches the
/// factorization instead.
pub fn y_update(spec: &ProblemSpec, x_next: &BlockVector, y: &[f64], omega: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_dim("y dimension", spec.y_dim(), y.len())?;
    check_dim("omega dimension", spec.constraint_dim(), omega.len())?;
    if spec.h.lipschitz() == 0.0 && spec.b.constants().lambda_min_btb <= 0.0 {
        return Err(Error::SingularSystem("L_h = 0 requires lambda_min(B^*B) > 0".into()));
    }
    YSolver::new(spec, beta)?.solve(spec, x_next, y, omega)
}

/// `w + beta r`.
pub fn dual_update(omega: &[f64], beta: f64, residual: &[f64]) -> Vec<f64> {
    debug_assert_eq!(omega.len(), residual.len());
    omega.iter().zip(residual).map(|(w, r)| w + beta * r).collect()
}

// ---------------------------------------------------------------------------
// State, residuals, Lyapunov
// ---------------------------------------------------------------------------

/// Stationarity residuals of an iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// `R_i = ||chi_i + grad_{x_i} phi(x) w||`, one per block.
    pub blocks: Vec<f64>,
    /// `R_y = ||grad h(y) + B^* w||`
    pub r_y: f64,
    /// `R_c = ||phi(x) + B y||`
    pub r_c: f64,
    /// Max over all of the above.
    pub combined: f64,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub k: usize,
    pub current: Iterate,
    pub previous: Option<Iterate>,
    /// `L^k`
    pub lagrangian: f64,
    /// `L_hat^k`, defined from `k = 1`.
    pub lyapunov: Option<f64>,
    /// `S_i` of the most recent block updates; `-S_i` is a subgradient of
    /// `g_i` at the accepted block.
    pub block_gradients: Vec<Vec<f64>>,
    /// Iteration at which `block_gradients` were stored.
    pub gradients_at: Option<usize>,
}

impl SolverState {
    pub fn step_norms(&self) -> Option<(f64, f64, f64)> {
        let prev = self.previous.as_ref()?;
        Some((
            self.current.x.distance(&prev.x),
            dist(&self.current.y, &prev.y),
            dist(&self.current.omega, &prev.omega),
        ))
    }
}

/// `R_i` uses the stored surrogate gradients (`chi_i = grad_i f - S_i`).
pub fn compute_residuals(spec: &ProblemSpec, state: &SolverState) -> Result<Residuals> {
    if state.gradients_at != Some(state.k) || state.block_gradients.len() != spec.num_blocks() {
        return Err(Error::StaleState);
    }
    let Iterate { x, y, omega } = &state.current;
    let mut blocks = Vec::with_capacity(spec.num_blocks());
    for (i, s) in state.block_gradients.iter().enumerate() {
        let mut chi = spec.f.block_gradient(i, x);
        axpy(-1.0, s, &mut chi);
        axpy(1.0, &spec.phi.jac_block_apply(i, x, omega), &mut chi);
        blocks.push(norm(&chi));
    }
    let (r_y, r_c) = dual_and_feasibility_residuals(spec, x, y, omega);
    let combined = blocks.iter().copied().fold(r_y.max(r_c), f64::max);
    Ok(Residuals {
        blocks,
        r_y,
        r_c,
        combined,
    })
}

fn dual_and_feasibility_residuals(spec: &ProblemSpec, x: &BlockVector, y: &[f64], omega: &[f64]) -> (f64, f64) {
    let mut dual = spec.h.gradient(y);
    axpy(1.0, &spec.b.adjoint_apply(omega), &mut dual);
    (norm(&dual), norm(&spec.residual(x, y)))
}

/// Coefficient `3 delta_tilde delta_hat^2 / (beta sigma_B)` with `delta_hat = 2 L_h`.
pub fn lyapunov_coefficient(beta: f64, sigma_b: f64, l_h: f64, delta_tilde: f64) -> f64 {
    let delta_hat = 2.0 * l_h;
    3.0 * delta_tilde * delta_hat * delta_hat / (beta * sigma_b)
}

/// `L_hat^k = L^k + 3 delta_tilde delta_hat^2 / (beta sigma_B) ||dy^k||^2`.
pub fn lyapunov_value(lagrangian: f64, dy_norm: f64, beta: f64, sigma_b: f64, l_h: f64, delta_tilde: f64) -> f64 {
    lagrangian + lyapunov_coefficient(beta, sigma_b, l_h, delta_tilde) * dy_norm * dy_norm
}

/// Lyapunov value of a state with `k >= 1`.
pub fn state_lyapunov(state: &SolverState, beta: f64, sigma_b: f64, l_h: f64, delta_tilde: f64) -> Option<f64> {
    let (_, dy, _) = state.step_norms()?;
    Some(lyapunov_value(state.lagrangian, dy, beta, sigma_b, l_h, delta_tilde))
}

/// Term minimized in the O(1/k) rate statement:
/// `1/2 eta_tilde ||dx^{k+1}||^2 + 3(delta_tilde - 1) delta_hat^2 / (2 beta sigma_B) (||dy^{k+1}||^2 + ||dy^k||^2)`.
#[allow(clippy::too_many_arguments)]
pub fn rate_term(
    eta_tilde: f64,
    dx: f64,
    dy_next: f64,
    dy: f64,
    beta: f64,
    sigma_b: f64,
    l_h: f64,
    delta_tilde: f64,
) -> f64 {
    let delta_hat = 2.0 * l_h;
    0.5 * eta_tilde * dx * dx
        + 3.0 * (delta_tilde - 1.0) * delta_hat * delta_hat / (2.0 * beta * sigma_b) * (dy_next * dy_next + dy * dy)
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub iteration: usize,
    /// `block-decrease[i]`, `y-decrease`, `lyapunov` or `dual-transport`.
    pub inequality: String,
    /// Amount by which the inequality fails beyond its slack.
    pub excess: f64,
}

impl From<&Violation> for Error {
    fn from(v: &Violation) -> Self {
        Error::Diagnostic {
            iteration: v.iteration,
            inequality: v.inequality.clone(),
            excess: v.excess,
        }
    }
}

/// Counts of checks evaluated during a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckCounts {
    pub block_decrease: usize,
    pub y_decrease: usize,
    pub lyapunov: usize,
    pub dual_transport: usize,
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

/// Run result: the trace plus the final state.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub state: SolverState,
    pub checks: CheckCounts,
}

pub struct Solver<'a> {
    spec: &'a ProblemSpec,
    surrogates: &'a [SurrogateSpec],
    config: SolverConfig,
    y_solver: YSolver,
    l_h: f64,
    lambda_min_btb: f64,
    sigma_b: f64,
}

impl<'a> Solver<'a> {
    pub fn new(spec: &'a ProblemSpec, surrogates: &'a [SurrogateSpec], config: SolverConfig) -> Result<Self> {
        config.validate()?;
        check_dim("number of surrogates", spec.num_blocks(), surrogates.len())?;
        for s in surrogates {
            s.validate()?;
        }
        let l_h = spec.h.lipschitz();
        let constants = spec.b.constants();
        let (lhs, rhs) = beta_condition_sides(
            l_h,
            constants.lambda_min_btb,
            constants.sigma_b,
            config.delta_tilde,
            config.beta,
        );
        if lhs < rhs {
            if config.enforce_beta_condition {
                return Err(Error::BetaCondition {
                    beta: config.beta,
                    lhs,
                    rhs,
                });
            }
            log::warn!(
                "beta = {} violates the convergence condition (lhs {lhs} < rhs {rhs}); continuing by override",
                config.beta
            );
        }
        if l_h == 0.0 && constants.lambda_min_btb <= 0.0 {
            return Err(Error::SingularSystem("L_h = 0 requires lambda_min(B^*B) > 0".into()));
        }
        let y_solver = YSolver::new(spec, config.beta)?;
        Ok(Self {
            spec,
            surrogates,
            config,
            y_solver,
            l_h,
            lambda_min_btb: constants.lambda_min_btb,
            sigma_b: constants.sigma_b,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Smallest configured `eta_floor`, the `eta_tilde` of the rate bound.
    pub fn eta_tilde(&self) -> f64 {
        self.surrogates
            .iter()
            .map(|s| s.eta_floor)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn run(&self, init: Iterate) -> Result<RunOutput> {
        let spec = self.spec;
        let cfg = &self.config;
        spec.check_point(&init.x, &init.y)?;
        check_dim("omega dimension", spec.constraint_dim(), init.omega.len())?;
        let beta = cfg.beta;
        let diag = cfg.diagnostics;
        let delta = self.l_h + beta * self.lambda_min_btb;
        let delta_hat = 2.0 * self.l_h;

        let lagrangian0 = spec.lagrangian(&init.x, &init.y, &init.omega, beta)?;
        let mut state = SolverState {
            k: 0,
            current: init,
            previous: None,
            lagrangian: lagrangian0,
            lyapunov: None,
            block_gradients: Vec::new(),
            gradients_at: None,
        };

        let mut records = Vec::new();
        let mut violations = Vec::new();
        let mut checks = CheckCounts::default();
        let mut solver_time = Duration::ZERO;
        let mut last_sample = Duration::ZERO;
        let mut last_residuals = None;

        records.push(self.record(&state, None, 0.0)?);

        let stop_reason = loop {
            if state.k >= cfg.max_outer_iters {
                break StopReason::MaxIterations;
            }
            if cfg.wall_clock_budget.is_some_and(|b| solver_time >= b) {
                break StopReason::Budget;
            }

            let started = Instant::now();
            let mut pending = Vec::new();
            let next = self.iterate(&state, delta, &mut pending, &mut checks)?;
            let iteration_time = started.elapsed();
            solver_time += iteration_time;

            state = next;
            if diag >= DiagnosticsLevel::FullLyapunov {
                self.check_lyapunov_and_transport(&mut state, delta_hat, &mut pending, &mut checks);
            } else if diag == DiagnosticsLevel::Off {
                state.lyapunov = state_lyapunov(&state, beta, self.sigma_b, self.l_h, cfg.delta_tilde);
            }
            for v in pending {
                eprintln!(
                    "diagnostic violation: iteration {} {} excess {:e}",
                    v.iteration, v.inequality, v.excess
                );
                if cfg.strict {
                    return Err(Error::from(&v));
                }
                violations.push(v);
            }

            let need_residuals = cfg.stop_epsilon > 0.0;
            let residuals = if need_residuals {
                Some(compute_residuals(spec, &state)?)
            } else {
                None
            };
            let converged = residuals.as_ref().is_some_and(|r| r.combined <= cfg.stop_epsilon);

            let sample = match cfg.sampling {
                TraceSampling::EveryIteration => true,
                TraceSampling::Adaptive => {
                    iteration_time < Duration::from_millis(1) || solver_time - last_sample >= Duration::from_millis(10)
                }
            };
            let out_of_budget = cfg.wall_clock_budget.is_some_and(|b| solver_time >= b);
            if sample || converged || out_of_budget || state.k >= cfg.max_outer_iters {
                let residuals = match residuals {
                    Some(r) => r,
                    None => compute_residuals(spec, &state)?,
                };
                records.push(self.record(&state, Some(&residuals), solver_time.as_secs_f64())?);
                last_sample = solver_time;
                last_residuals = Some(residuals);
            }
            if converged {
                break StopReason::Converged;
            }
        };

        if records.last().map(|r| r.k) != Some(state.k) && state.k > 0 {
            let residuals = compute_residuals(spec, &state)?;
            records.push(self.record(&state, Some(&residuals), solver_time.as_secs_f64())?);
            last_residuals = Some(residuals);
        }

        let final_fit = spec.objective_value(&state.current.x, &state.current.y)?;
        let trace = Trace {
            solver: cfg.solver_name.clone(),
            records,
            iterations: state.k,
            stop_reason,
            elapsed_sec: solver_time.as_secs_f64(),
            final_fit,
            final_residuals: last_residuals,
            violations,
        };
        Ok(RunOutput { trace, state, checks })
    }

    /// One outer iteration `k -> k + 1`.
    fn iterate(
        &self,
        state: &SolverState,
        delta: f64,
        pending: &mut Vec<Violation>,
        checks: &mut CheckCounts,
    ) -> Result<SolverState> {
        let spec = self.spec;
        let beta = self.config.beta;
        let checking = self.config.diagnostics >= DiagnosticsLevel::DecreaseChecks;
        let k_next = state.k + 1;
        let Iterate { x, y, omega } = &state.current;

        let mut x_new = x.clone();
        let mut block_gradients = Vec::with_capacity(spec.num_blocks());
        let mut l_before = if checking { state.lagrangian } else { f64::NAN };
        for (i, surrogate) in self.surrogates.iter().enumerate() {
            let z = PointRef { x: &x_new, y, omega };
            let update = mm_block_update(i, surrogate, spec, &z, beta)?;
            x_new.set_block(i, update.x_new);
            block_gradients.push(update.surrogate_gradient);
            if checking {
                let l_after = spec.lagrangian(&x_new, y, omega, beta)?;
                checks.block_decrease += 1;
                let lhs = l_after + update.constants.eta * update.divergence;
                let excess = lhs - l_before - DIAGNOSTIC_SLACK * (1.0 + l_before.abs());
                if excess > 0.0 {
                    pending.push(Violation {
                        iteration: k_next,
                        inequality: format!("block-decrease[{}]", i + 1),
                        excess,
                    });
                }
                l_before = l_after;
            }
        }

        let y_new = self.y_solver.solve(spec, &x_new, y, omega)?;
        if checking {
            let l_after = spec.lagrangian(&x_new, &y_new, omega, beta)?;
            checks.y_decrease += 1;
            let lhs = l_after + 0.5 * delta * norm_sq(&sub(&y_new, y));
            let excess = lhs - l_before - DIAGNOSTIC_SLACK * (1.0 + l_before.abs());
            if excess > 0.0 {
                pending.push(Violation {
                    iteration: k_next,
                    inequality: "y-decrease".into(),
                    excess,
                });
            }
        }

        let r = spec.residual(&x_new, &y_new);
        let omega_new = dual_update(omega, beta, &r);
        let lagrangian = spec.lagrangian(&x_new, &y_new, &omega_new, beta)?;
        if !lagrangian.is_finite() {
            return Err(Error::NonFinite("augmented Lagrangian"));
        }

        Ok(SolverState {
            k: k_next,
            current: Iterate {
                x: x_new,
                y: y_new,
                omega: omega_new,
            },
            previous: Some(state.current.clone()),
            lagrangian,
            lyapunov: state.lyapunov,
            block_gradients,
            gradients_at: Some(k_next),
        })
    }

    fn check_lyapunov_and_transport(
        &self,
        state: &mut SolverState,
        delta_hat: f64,
        pending: &mut Vec<Violation>,
        checks: &mut CheckCounts,
    ) {
        let cfg = &self.config;
        let previous = state.lyapunov;
        let current = state_lyapunov(state, cfg.beta, self.sigma_b, self.l_h, cfg.delta_tilde);
        if let (Some(prev), Some(cur)) = (previous, current) {
            checks.lyapunov += 1;
            let excess = cur - prev - DIAGNOSTIC_SLACK * (1.0 + prev.abs());
            if excess > 0.0 {
                pending.push(Violation {
                    iteration: state.k,
                    inequality: "lyapunov".into(),
                    excess,
                });
            }
        }
        state.lyapunov = current;

        if let Some((_, dy, _)) = state.step_norms() {
            let Iterate { x, y, omega } = &state.current;
            let (r_y, _) = dual_and_feasibility_residuals(self.spec, x, y, omega);
            checks.dual_transport += 1;
            let bound = delta_hat * dy;
            let excess = r_y - bound - DIAGNOSTIC_SLACK * (1.0 + bound);
            if excess > 0.0 {
                pending.push(Violation {
                    iteration: state.k,
                    inequality: "dual-transport".into(),
                    excess,
                });
            }
        }
    }

    fn record(&self, state: &SolverState, residuals: Option<&Residuals>, t_sec: f64) -> Result<TraceRecord> {
        let spec = self.spec;
        let Iterate { x, y, omega } = &state.current;
        let fit = spec.objective_value(x, y)?;
        let mut rec = TraceRecord::basic(&self.config.solver_name, state.k, t_sec, fit);
        rec.lagrangian = state.lagrangian;
        rec.lyapunov = state.lyapunov.unwrap_or(f64::NAN);
        match residuals {
            Some(r) => rec.set_residuals(r),
            None => {
                let (r_y, r_c) = dual_and_feasibility_residuals(spec, x, y, omega);
                rec.r_y = r_y;
                rec.r_c = r_c;
            }
        }
        if let Some((dx, dy, dw)) = state.step_norms() {
            rec.dx = dx;
            rec.dy = dy;
            rec.dw = dw;
        }
        Ok(rec)
    }
}

/// Runs the solver from `init`.
pub fn run(spec: &ProblemSpec, surrogates: &[SurrogateSpec], config: SolverConfig, init: Iterate) -> Result<RunOutput> {
    Solver::new(spec, surrogates, config)?.run(init)
}
