//! Multiblock ADMM (mADMM) for nonsmooth nonconvex problems with nonlinear
//! coupling constraints
//!
//! ```text
//! min_{x, y}  f(x) + sum_i g_i(x_i) + h(y)   s.t.   phi(x) + B y = 0
//! ```
//!
//! Each primal block is updated by minimizing a block surrogate of the
//! augmented Lagrangian plus the block's nonsmooth term, `y` by a
//! linearized closed-form step, and the multiplier by a dual ascent step.
//!
//! The crate also ships the l1-regularized logistic regression with a
//! quadratic classifier ([`logistic`]), the prox-linear baseline it is
//! benchmarked against ([`proxlinear`]), LIBSVM and synthetic data
//! ([`data`]), and trace/summary output ([`trace`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod logistic;
pub mod madmm;
pub mod model;
pub mod proxlinear;
pub mod surrogates;
pub mod trace;
pub mod vecops;

pub use error::{Error, Result};
pub use madmm::{
    check_beta_condition, compute_residuals, dual_update, lyapunov_value, run, y_update, DiagnosticsLevel, Residuals,
    RunOutput, Solver, SolverConfig, SolverState, TraceSampling,
};
pub use model::{
    check_adjoint, eval_augmented_lagrangian, eval_feasibility, BlockVector, Iterate, LinearMap, NonlinearMap,
    ProblemSpec, Regularizer, SmoothTerm,
};
pub use surrogates::{
    bregman_divergence, mm_block_update, verify_surrogate_conditions, BregmanKernel, SurrogateKind, SurrogateSpec,
};
pub use trace::{StopReason, Summary, Trace, TraceRecord};
