//! Problem representation: blocks, maps, smooth and nonsmooth terms, and
//! the augmented Lagrangian
//!
//! ```text
//! L_beta(x, y, w) = f(x) + h(y) + <w, phi(x) + B y> + beta/2 ||phi(x) + B y||^2 + sum_i g_i(x_i)
//! ```
//!
//! for the constrained problem `min F(x) + h(y)  s.t.  phi(x) + B y = 0`
//! with `F(x) = f(x) + sum_i g_i(x_i)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::vecops::{axpy, dot, norm, norm1, norm_sq, soft_threshold};

/// Primal variable `x` split into `m` blocks. Concatenation order is block
/// index order.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    blocks: Vec<Vec<f64>>,
}

impl BlockVector {
    pub fn new(blocks: Vec<Vec<f64>>) -> Self {
        Self { blocks }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            blocks: dims.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn from_flat(dims: &[usize], flat: &[f64]) -> Result<Self> {
        check_dim("BlockVector::from_flat", dims.iter().sum(), flat.len())?;
        let mut blocks = Vec::with_capacity(dims.len());
        let mut offset = 0;
        for &n in dims {
            blocks.push(flat[offset..offset + n].to_vec());
            offset += n;
        }
        Ok(Self { blocks })
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.blocks[i]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut Vec<f64> {
        &mut self.blocks[i]
    }

    pub fn set_block(&mut self, i: usize, value: Vec<f64>) {
        debug_assert_eq!(self.blocks[i].len(), value.len());
        self.blocks[i] = value;
    }

    /// Copy of `self` with block `i` replaced, i.e. `(x_i, z_{!=i})`.
    pub fn with_block(&self, i: usize, value: &[f64]) -> Self {
        let mut out = self.clone();
        out.blocks[i].copy_from_slice(value);
        out
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn concat(&self) -> Vec<f64> {
        self.blocks.iter().flatten().copied().collect()
    }

    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(|b| norm_sq(b)).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

/// Full ADMM iterate `(x, y, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: BlockVector,
    pub y: Vec<f64>,
    pub omega: Vec<f64>,
}

/// Value of an extended-real-valued function. `+inf` is carried as an
/// explicit marker and never enters arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::Infinite => None,
        }
    }
}

/// Smooth function of one vector, e.g. `h(y)`.
pub trait SmoothTerm: Send + Sync {
    fn value(&self, v: &[f64]) -> f64;
    fn gradient(&self, v: &[f64]) -> Vec<f64>;
    /// Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
}

/// Smooth function of the blocked variable, e.g. `f(x)`.
pub trait BlockSmooth: Send + Sync {
    fn value(&self, x: &BlockVector) -> f64;
    fn block_gradient(&self, block: usize, x: &BlockVector) -> Vec<f64>;
}

/// Nonlinear coupling map `phi: R^n -> R^s`.
pub trait NonlinearMap: Send + Sync {
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &BlockVector) -> Vec<f64>;
    /// `grad_{x_i} phi(x) * w`, i.e. the block-`i` part of `J(x)^T w`.
    fn jac_block_apply(&self, block: usize, x: &BlockVector, w: &[f64]) -> Vec<f64>;
    /// Local bound on `||grad phi(x)||`.
    fn jac_norm_bound(&self, x: &BlockVector) -> f64;
}

/// Spectral constants of a linear map `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConstants {
    /// `lambda_min(B^* B)`
    pub lambda_min_btb: f64,
    /// `lambda_min(B B^*)`, must be positive.
    pub sigma_b: f64,
    /// `||B||`
    pub operator_norm: f64,
}

/// Linear map `B: R^q -> R^s` together with its adjoint.
pub trait LinearMap: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn apply(&self, u: &[f64]) -> Vec<f64>;
    fn adjoint_apply(&self, v: &[f64]) -> Vec<f64>;
    fn constants(&self) -> SpectralConstants;
    /// `Some(c)` when `B = c I`; lets the y-update skip factorization.
    fn scaled_identity(&self) -> Option<f64> {
        None
    }
}

/// Block nonsmooth term `g_i`, proper and lower semicontinuous.
pub trait Regularizer: Send + Sync {
    fn value(&self, v: &[f64]) -> ExtendedReal;
    /// `argmin_u g(u) + 1/(2t) ||u - v||^2`, when available in closed form.
    fn prox(&self, v: &[f64], t: f64) -> Option<Vec<f64>>;
    fn is_convex(&self) -> bool {
        true
    }
    /// A subgradient of `g` at `v` (used only by diagnostics).
    fn subgradient(&self, v: &[f64]) -> Option<Vec<f64>> {
        let _ = v;
        None
    }
}

// ---------------------------------------------------------------------------
// Stock terms
// ---------------------------------------------------------------------------

/// `f(x) = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroSmooth;

impl BlockSmooth for ZeroSmooth {
    fn value(&self, _x: &BlockVector) -> f64 {
        0.0
    }

    fn block_gradient(&self, block: usize, x: &BlockVector) -> Vec<f64> {
        vec![0.0; x.block(block).len()]
    }
}

/// `1/2 ||v||^2` as either a [`SmoothTerm`] or a [`BlockSmooth`].
#[derive(Debug, Clone, Copy, Default)]
pub struct HalfSquaredNorm;

impl SmoothTerm for HalfSquaredNorm {
    fn value(&self, v: &[f64]) -> f64 {
        0.5 * norm_sq(v)
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }
}

impl BlockSmooth for HalfSquaredNorm {
    fn value(&self, x: &BlockVector) -> f64 {
        0.5 * x.norm().powi(2)
    }

    fn block_gradient(&self, block: usize, x: &BlockVector) -> Vec<f64> {
        x.block(block).to_vec()
    }
}

/// `phi(x) = concat(x_1, ..., x_m)`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityMap {
    pub dim: usize,
}

impl NonlinearMap for IdentityMap {
    fn output_dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &BlockVector) -> Vec<f64> {
        x.concat()
    }

    fn jac_block_apply(&self, block: usize, x: &BlockVector, w: &[f64]) -> Vec<f64> {
        let offset: usize = x.blocks()[..block].iter().map(Vec::len).sum();
        w[offset..offset + x.block(block).len()].to_vec()
    }

    fn jac_norm_bound(&self, _x: &BlockVector) -> f64 {
        1.0
    }
}

/// `B = -I` on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct NegIdentity {
    pub dim: usize,
}

impl LinearMap for NegIdentity {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|v| -v).collect()
    }

    fn adjoint_apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| -x).collect()
    }

    fn constants(&self) -> SpectralConstants {
        SpectralConstants {
            lambda_min_btb: 1.0,
            sigma_b: 1.0,
            operator_norm: 1.0,
        }
    }

    fn scaled_identity(&self) -> Option<f64> {
        Some(-1.0)
    }
}

/// Dense `s x q` matrix. Spectral constants come from symmetric
/// eigendecompositions of the Gram matrices unless supplied.
#[derive(Debug, Clone)]
pub struct DenseLinearMap {
    matrix: nalgebra::DMatrix<f64>,
    constants: SpectralConstants,
}

impl DenseLinearMap {
    pub fn new(matrix: nalgebra::DMatrix<f64>) -> Self {
        let min_eig = |gram: nalgebra::DMatrix<f64>| -> (f64, f64) {
            let eig = gram.symmetric_eigenvalues();
            let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = eig.iter().copied().fold(0.0, f64::max);
            (lo, hi)
        };
        let (lo_btb, hi) = min_eig(matrix.transpose() * &matrix);
        let (lo_bbt, _) = min_eig(&matrix * matrix.transpose());
        // Eigenvalues below round-off of the largest one are zero.
        let snap = |v: f64| if v <= 1e-12 * hi { 0.0 } else { v };
        let constants = SpectralConstants {
            lambda_min_btb: snap(lo_btb),
            sigma_b: snap(lo_bbt),
            operator_norm: hi.sqrt(),
        };
        Self { matrix, constants }
    }

    pub fn with_constants(matrix: nalgebra::DMatrix<f64>, constants: SpectralConstants) -> Self {
        Self { matrix, constants }
    }

    pub fn matrix(&self) -> &nalgebra::DMatrix<f64> {
        &self.matrix
    }
}

impl LinearMap for DenseLinearMap {
    fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let u = nalgebra::DVector::from_column_slice(u);
        (&self.matrix * u).as_slice().to_vec()
    }

    fn adjoint_apply(&self, v: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(v);
        (self.matrix.tr_mul(&v)).as_slice().to_vec()
    }

    fn constants(&self) -> SpectralConstants {
        self.constants
    }
}

/// `g = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroRegularizer;

impl Regularizer for ZeroRegularizer {
    fn value(&self, _v: &[f64]) -> ExtendedReal {
        ExtendedReal::Finite(0.0)
    }

    fn prox(&self, v: &[f64], _t: f64) -> Option<Vec<f64>> {
        Some(v.to_vec())
    }

    fn subgradient(&self, v: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; v.len()])
    }
}

/// `g(v) = weight * ||v||_1`.
#[derive(Debug, Clone, Copy)]
pub struct L1Norm {
    pub weight: f64,
}

impl Regularizer for L1Norm {
    fn value(&self, v: &[f64]) -> ExtendedReal {
        ExtendedReal::Finite(self.weight * norm1(v))
    }

    fn prox(&self, v: &[f64], t: f64) -> Option<Vec<f64>> {
        Some(soft_threshold(v, self.weight * t))
    }

    fn subgradient(&self, v: &[f64]) -> Option<Vec<f64>> {
        Some(
            v.iter()
                .map(|x| self.weight * x.signum() * f64::from(*x != 0.0))
                .collect(),
        )
    }
}

/// Indicator of the nonnegative orthant.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonNegative;

impl Regularizer for NonNegative {
    fn value(&self, v: &[f64]) -> ExtendedReal {
        if v.iter().all(|&x| x >= 0.0) {
            ExtendedReal::Finite(0.0)
        } else {
            ExtendedReal::Infinite
        }
    }

    fn prox(&self, v: &[f64], _t: f64) -> Option<Vec<f64>> {
        Some(v.iter().map(|x| x.max(0.0)).collect())
    }
}

// ---------------------------------------------------------------------------
// Problem
// ---------------------------------------------------------------------------

pub type ObjectiveFn = dyn Fn(&BlockVector) -> f64 + Send + Sync;

/// Composite problem `min f(x) + sum g_i(x_i) + h(y)  s.t.  phi(x) + B y = 0`.
#[derive(Clone)]
pub struct ProblemSpec {
    block_dims: Vec<usize>,
    pub f: Arc<dyn BlockSmooth>,
    pub g: Vec<Arc<dyn Regularizer>>,
    pub h: Arc<dyn SmoothTerm>,
    pub phi: Arc<dyn NonlinearMap>,
    pub b: Arc<dyn LinearMap>,
    /// Lower bound on `F(x) + h(y)`, when known.
    pub lower_bound: Option<f64>,
    objective: Option<Arc<ObjectiveFn>>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("block_dims", &self.block_dims)
            .field("s", &self.phi.output_dim())
            .field("q", &self.b.input_dim())
            .field("lower_bound", &self.lower_bound)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn new(
        block_dims: Vec<usize>,
        f: Arc<dyn BlockSmooth>,
        g: Vec<Arc<dyn Regularizer>>,
        h: Arc<dyn SmoothTerm>,
        phi: Arc<dyn NonlinearMap>,
        b: Arc<dyn LinearMap>,
    ) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(Error::Config("problem needs at least one block".into()));
        }
        check_dim("number of nonsmooth terms", block_dims.len(), g.len())?;
        check_dim("range of phi vs range of B", phi.output_dim(), b.output_dim())?;
        let c = b.constants();
        if !(c.sigma_b > 0.0) {
            return Err(Error::Config(format!(
                "lambda_min(B B^*) must be positive, got {}",
                c.sigma_b
            )));
        }
        Ok(Self {
            block_dims,
            f,
            g,
            h,
            phi,
            b,
            lower_bound: None,
            objective: None,
        })
    }

    pub fn with_lower_bound(mut self, nu: f64) -> Self {
        self.lower_bound = Some(nu);
        self
    }

    /// Overrides the reported objective (the "fitting error" of a trace).
    /// Defaults to `F(x) + h(y)`.
    pub fn with_objective(mut self, objective: Arc<ObjectiveFn>) -> Self {
        self.objective = Some(objective);
        self
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    /// Dimension `s` of the constraint.
    pub fn constraint_dim(&self) -> usize {
        self.phi.output_dim()
    }

    /// Dimension `q` of `y`.
    pub fn y_dim(&self) -> usize {
        self.b.input_dim()
    }

    pub fn check_point(&self, x: &BlockVector, y: &[f64]) -> Result<()> {
        check_dim("number of blocks", self.num_blocks(), x.num_blocks())?;
        for (expected, actual) in self.block_dims.iter().zip(x.dims()) {
            check_dim("block dimension", *expected, actual)?;
        }
        check_dim("y dimension", self.y_dim(), y.len())
    }

    /// `r = phi(x) + B y`.
    pub fn residual(&self, x: &BlockVector, y: &[f64]) -> Vec<f64> {
        let mut r = self.phi.eval(x);
        let by = self.b.apply(y);
        axpy(1.0, &by, &mut r);
        r
    }

    /// `phi_bar_beta = f(x) + <w, r> + beta/2 ||r||^2` (excludes `h` and `g`).
    pub fn coupling_value(&self, x: &BlockVector, y: &[f64], omega: &[f64], beta: f64) -> f64 {
        let r = self.residual(x, y);
        self.f.value(x) + dot(omega, &r) + 0.5 * beta * norm_sq(&r)
    }

    /// `phi_beta = phi_bar_beta + h(y)`.
    pub fn smooth_value(&self, x: &BlockVector, y: &[f64], omega: &[f64], beta: f64) -> f64 {
        self.coupling_value(x, y, omega, beta) + self.h.value(y)
    }

    /// `grad_{x_i} phi_beta = grad_i f + J_i^T (w + beta r)`.
    pub fn smooth_block_gradient(
        &self,
        block: usize,
        x: &BlockVector,
        y: &[f64],
        omega: &[f64],
        beta: f64,
    ) -> Vec<f64> {
        let r = self.residual(x, y);
        let mut multiplier = omega.to_vec();
        axpy(beta, &r, &mut multiplier);
        let mut grad = self.phi.jac_block_apply(block, x, &multiplier);
        axpy(1.0, &self.f.block_gradient(block, x), &mut grad);
        grad
    }

    pub fn nonsmooth_value(&self, x: &BlockVector) -> Result<f64> {
        let mut total = 0.0;
        for (i, g) in self.g.iter().enumerate() {
            match g.value(x.block(i)) {
                ExtendedReal::Finite(v) => total += v,
                ExtendedReal::Infinite => return Err(Error::OutsideDomain { block: i }),
            }
        }
        Ok(total)
    }

    pub fn lagrangian(&self, x: &BlockVector, y: &[f64], omega: &[f64], beta: f64) -> Result<f64> {
        let g = self.nonsmooth_value(x)?;
        Ok(self.smooth_value(x, y, omega, beta) + g)
    }

    /// Objective reported in traces.
    pub fn objective_value(&self, x: &BlockVector, y: &[f64]) -> Result<f64> {
        match &self.objective {
            Some(obj) => Ok(obj(x)),
            None => Ok(self.f.value(x) + self.nonsmooth_value(x)? + self.h.value(y)),
        }
    }
}

/// `L_beta(x, y, w)`; errors when some `g_i(x_i) = +inf`.
pub fn eval_augmented_lagrangian(
    spec: &ProblemSpec,
    x: &BlockVector,
    y: &[f64],
    omega: &[f64],
    beta: f64,
) -> Result<f64> {
    spec.check_point(x, y)?;
    check_dim("omega dimension", spec.constraint_dim(), omega.len())?;
    if !(beta > 0.0) {
        return Err(Error::Config(format!("beta must be positive, got {beta}")));
    }
    spec.lagrangian(x, y, omega, beta)
}

/// Constraint residual `phi(x) + B y`.
pub fn eval_feasibility(spec: &ProblemSpec, x: &BlockVector, y: &[f64]) -> Result<Vec<f64>> {
    spec.check_point(x, y)?;
    Ok(spec.residual(x, y))
}

/// Randomized adjoint probe: `|<Bu, v> - <u, B^* v>| <= 1e-10 (1 + ||u|| ||v||)`.
pub fn check_adjoint(map: &dyn LinearMap, trials: usize) -> bool {
    assert!(trials >= 1, "check_adjoint needs at least one trial");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_ad01);
    (0..trials).all(|_| {
        let u: Vec<f64> = (0..map.input_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..map.output_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lhs = dot(&map.apply(&u), &v);
        let rhs = dot(&u, &map.adjoint_apply(&v));
        (lhs - rhs).abs() <= 1e-10 * (1.0 + norm(&u) * norm(&v))
    })
}

pub const POWER_ITERATIONS: usize = 200;
pub const POWER_TOLERANCE: f64 = 1e-8;

/// Largest eigenvalue of a symmetric PSD operator by power iteration.
fn power_iteration(dim: usize, op: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..dim).map(|j| 1.0 + 0.1 * ((j + 1) as f64).sin()).collect();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = op(&v);
        let next = dot(&v, &w);
        let wn = norm(&w);
        if wn == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / wn).collect();
        let done = (next - lambda).abs() <= POWER_TOLERANCE * next.abs().max(1.0);
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

/// Estimates `lambda_min(B^*B)`, `lambda_min(BB^*)` and `||B||` by power
/// iteration on the Gram operators and their spectral shifts.
pub fn estimate_spectral_constants(map: &dyn LinearMap) -> SpectralConstants {
    let q = map.input_dim();
    let s = map.output_dim();
    let btb = |u: &[f64]| map.adjoint_apply(&map.apply(u));
    let bbt = |v: &[f64]| map.apply(&map.adjoint_apply(v));
    let top = power_iteration(q, btb);
    let shift = top * (1.0 + 1e-12);
    let low_btb = shift
        - power_iteration(q, |u| {
            let mut out = btb(u);
            out.iter_mut().zip(u).for_each(|(o, ui)| *o = shift * ui - *o);
            out
        });
    let low_bbt = shift
        - power_iteration(s, |v| {
            let mut out = bbt(v);
            out.iter_mut().zip(v).for_each(|(o, vi)| *o = shift * vi - *o);
            out
        });
    SpectralConstants {
        lambda_min_btb: low_btb.max(0.0),
        sigma_b: low_bbt.max(0.0),
        operator_norm: top.max(0.0).sqrt(),
    }
}
