//! Outer loop of the relative-type inexact proximal augmented Lagrangian
//! method (ripALM).
//!
//! Each outer iteration approximately minimizes the proximal augmented
//! Lagrangian subproblem in the dual variable `y`, accepting the inexact
//! solution `y_{k+1}` once the relative error criterion
//!
//! ```text
//! 2 |<w_k - y_{k+1}, sigma_k D_{k+1}>| + ||sigma_k D_{k+1}||^2
//!     <= rho ( ||prox_{sigma_k f}(x_k + sigma_k A^T y_{k+1}) - x_k||^2
//!              + tau_k ||y_{k+1} - y_k||^2 )
//! ```
//!
//! holds, where `D_{k+1}` is the subproblem gradient at `y_{k+1}`. The
//! multiplier and the auxiliary error variable are then updated exactly:
//! `x_{k+1} = prox_{sigma_k f}(x_k + sigma_k A^T y_{k+1})` and
//! `w_{k+1} = w_k - sigma_k D_{k+1}`. The error variable `w` appears only in
//! the acceptance test, never in the iterate updates.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{dot, norm2_sq, DenseVector};
use crate::ssn::{SsnConfig, SsnError};

/// Dual-problem interface consumed by the outer loop: the linear map, its
/// adjoint, the proximal mapping of `sigma f`, the right-hand side `b`, and a
/// problem-specific subproblem solver.
pub trait ProblemOracle {
    /// Dimension of the dual variable `y` (rows of `A`).
    fn dual_dim(&self) -> usize;
    /// Dimension of the primal multiplier `x` (columns of `A`).
    fn primal_dim(&self) -> usize;
    /// `A x`
    fn apply_a(&self, x: &DenseVector) -> DenseVector;
    /// `A^T y`
    fn apply_at(&self, y: &DenseVector) -> DenseVector;
    /// `prox_{sigma f}(z)`
    fn prox_f(&self, z: &DenseVector, sigma: f64) -> DenseVector;
    /// Constraint right-hand side `b`.
    fn b(&self) -> &DenseVector;

    /// Approximately solves the proximal AL subproblem centered at
    /// `ctx.y_center` with multiplier `ctx.x`, returning the first iterate the
    /// `accept` callback approves. The callback receives the candidate `y` and
    /// the subproblem gradient at `y` (which equals the error term `Delta`).
    fn subsolve(
        &self,
        ctx: &SubproblemContext<'_>,
        accept: &mut dyn FnMut(&DenseVector, &DenseVector) -> bool,
        cfg: &SsnConfig,
    ) -> Result<SubsolveOutcome, SsnError>;
}

/// Frozen per-iteration data handed to the subproblem solver.
pub struct SubproblemContext<'a> {
    /// Current multiplier `x_k`.
    pub x: &'a DenseVector,
    /// Proximal center `y_k`; also the warm start for the inner solver.
    pub y_center: &'a DenseVector,
    pub sigma: f64,
    pub tau: f64,
}

/// Inner-solver result: the accepted dual point and the iterations spent.
pub struct SubsolveOutcome {
    pub y: DenseVector,
    pub iterations: usize,
}

/// Parameter schedule `k -> value`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Schedule {
    Constant(f64),
    /// `min(cap, max(floor, growth^k))`
    GeometricCapped { growth: f64, floor: f64, cap: f64 },
}

impl Schedule {
    pub fn value(&self, k: usize) -> f64 {
        match self {
            Schedule::Constant(c) => *c,
            Schedule::GeometricCapped { growth, floor, cap } => {
                growth.powi(k as i32).max(*floor).min(*cap)
            }
        }
    }

    /// Infimum over all k, used by the parameter validation checks.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Schedule::Constant(c) => *c,
            Schedule::GeometricCapped { growth, floor, cap } => {
                if *growth >= 1.0 {
                    floor.max(1.0).min(*cap)
                } else {
                    *floor
                }
            }
        }
    }
}

/// Outer-loop configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RipalmConfig {
    /// Relative error tolerance `rho` in `[0, 1)`.
    pub rho: f64,
    pub sigma_schedule: Schedule,
    pub tau_schedule: Schedule,
    pub max_outer: usize,
    /// Target for the problem's KKT residual `Delta_res`.
    pub tol: f64,
}

impl RipalmConfig {
    /// Validates the parameter ranges. Violation of the rate condition
    /// `sqrt(tau_min) > 2 sqrt(rho)` is a warning, not an error: global
    /// convergence needs only `rho < 1`.
    pub fn validate(&self) -> Result<Vec<ConfigWarning>, ConfigError> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(ConfigError::RhoOutOfRange(self.rho));
        }
        if self.sigma_schedule.lower_bound() <= 0.0 {
            return Err(ConfigError::SigmaNotBoundedBelow);
        }
        if self.tau_schedule.lower_bound() <= 0.0 {
            return Err(ConfigError::TauNotBoundedBelow);
        }
        if !(self.tol > 0.0) {
            return Err(ConfigError::TolNonPositive(self.tol));
        }
        let mut warnings = Vec::new();
        let tau_min = self.tau_schedule.lower_bound();
        if tau_min.sqrt() <= 2.0 * self.rho.sqrt() {
            let w = ConfigWarning::RateConditionViolated {
                tau_min,
                rho: self.rho,
            };
            log::warn!("{w}");
            warnings.push(w);
        }
        Ok(warnings)
    }
}

/// Paper defaults: `sigma_k = min(1e4, max(1e-4, 1.5^k))`, `tau_k = 5`,
/// `rho = 0.99`, with a constant tau the rate condition holds for any rho.
pub fn default_schedules() -> RipalmConfig {
    RipalmConfig {
        rho: 0.99,
        sigma_schedule: Schedule::GeometricCapped {
            growth: 1.5,
            floor: 1e-4,
            cap: 1e4,
        },
        tau_schedule: Schedule::Constant(5.0),
        max_outer: 100,
        tol: 1e-6,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConfigWarning {
    /// `sqrt(tau_min) <= 2 sqrt(rho)`: the asymptotic rate guarantee does not
    /// apply, although the iteration remains globally convergent.
    RateConditionViolated { tau_min: f64, rho: f64 },
}

impl std::fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigWarning::RateConditionViolated { tau_min, rho } => write!(
                f,
                "sqrt(tau_min) = {:.3} <= 2 sqrt(rho) = {:.3}: linear-rate condition violated; \
                 consider tau >= 4",
                tau_min.sqrt(),
                2.0 * rho.sqrt()
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("rho must lie in [0, 1), got {0}")]
    RhoOutOfRange(f64),
    #[error("sigma schedule must be bounded away from 0")]
    SigmaNotBoundedBelow,
    #[error("tau schedule must be bounded away from 0")]
    TauNotBoundedBelow,
    #[error("tolerance must be positive, got {0}")]
    TolNonPositive(f64),
}

/// One outer iterate: dual point `y`, multiplier `x`, error variable `w`,
/// plus the stationarity certificates of the last accepted step.
#[derive(Debug, Clone)]
pub struct RipalmState {
    pub y: DenseVector,
    pub x: DenseVector,
    pub w: DenseVector,
    pub k: usize,
    /// Subproblem gradient `Delta_k` at the last accepted `y_k`.
    pub delta: DenseVector,
    /// `theta_k = Delta_k - (tau/sigma)(y_k - y_{k-1})`, an element of the
    /// `y`-component of the saddle subdifferential at the iterate.
    pub theta: DenseVector,
    /// `xi_k = (x_{k-1} - x_k) / sigma`.
    pub xi: DenseVector,
}

impl RipalmState {
    pub fn new(init: InitialPoint) -> Self {
        let m = init.y.len();
        let n = init.x.len();
        RipalmState {
            y: init.y,
            x: init.x,
            w: init.w,
            k: 0,
            delta: DenseVector::zeros(m),
            theta: DenseVector::zeros(m),
            xi: DenseVector::zeros(n),
        }
    }
}

/// Starting point `(y0, x0, w0)`. The error variable starts at zero.
#[derive(Debug, Clone)]
pub struct InitialPoint {
    pub y: DenseVector,
    pub x: DenseVector,
    pub w: DenseVector,
}

impl InitialPoint {
    pub fn origin(dual_dim: usize, primal_dim: usize) -> Self {
        InitialPoint {
            y: DenseVector::zeros(dual_dim),
            x: DenseVector::zeros(primal_dim),
            w: DenseVector::zeros(dual_dim),
        }
    }

    pub fn warm(y: DenseVector, x: DenseVector) -> Self {
        let w = DenseVector::zeros(y.len());
        InitialPoint { y, x, w }
    }
}

/// Relative KKT residual breakdown. `complementarity` is present for problems
/// that measure it separately (QROT); the overall residual is the max of the
/// populated components and the duality gap.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: Option<f64>,
    pub gap: f64,
}

impl KktResiduals {
    pub fn res_max(&self) -> f64 {
        let mut r = self.primal.max(self.dual).max(self.gap);
        if let Some(c) = self.complementarity {
            r = r.max(c);
        }
        r
    }
}

/// Per-iteration trace entry. The criterion fields are present for the ALM
/// loop and absent for baseline solvers, which share this record shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub sigma: f64,
    pub tau: f64,
    pub inner_iterations: usize,
    pub criterion_lhs: Option<f64>,
    pub criterion_rhs: Option<f64>,
    pub residuals: KktResiduals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
}

/// Full solve trace: one record per outer iteration plus the terminating
/// residuals and wall time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: Vec<IterationRecord>,
    pub final_residuals: KktResiduals,
    pub outer_iterations: usize,
    pub total_inner_iterations: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Error)]
pub enum RipalmError {
    #[error("subsolver exhausted its budget at outer iteration {outer}: {source}")]
    SubsolverStalled { outer: usize, source: SsnError },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Gradient of the augmented Lagrangian in `y`:
/// `A prox_{sigma f}(x + sigma A^T y) - b`.
pub fn aug_lag_gradient<O: ProblemOracle + ?Sized>(
    oracle: &O,
    y: &DenseVector,
    x: &DenseVector,
    sigma: f64,
) -> DenseVector {
    debug_assert!(sigma > 0.0);
    let z = x.plus_scaled(sigma, &oracle.apply_at(y));
    let p = oracle.prox_f(&z, sigma);
    oracle.apply_a(&p).minus(oracle.b())
}

/// Left-hand side of the acceptance criterion:
/// `2 |<w - y_next, sigma Delta>| + ||sigma Delta||^2`.
pub fn criterion_lhs(
    w: &DenseVector,
    y_next: &DenseVector,
    delta: &DenseVector,
    sigma: f64,
) -> f64 {
    let diff = w.minus(y_next);
    let inner: f64 = sigma * dot(&diff, delta);
    2.0 * inner.abs() + sigma * sigma * norm2_sq(delta)
}

/// Right-hand side of the acceptance criterion:
/// `rho (||prox_{sigma f}(x_prev + sigma A^T y_next) - x_prev||^2
///       + tau ||y_next - y_prev||^2)`.
pub fn criterion_rhs<O: ProblemOracle + ?Sized>(
    oracle: &O,
    x_prev: &DenseVector,
    y_next: &DenseVector,
    y_prev: &DenseVector,
    sigma: f64,
    tau: f64,
    rho: f64,
) -> f64 {
    let z = x_prev.plus_scaled(sigma, &oracle.apply_at(y_next));
    let prox = oracle.prox_f(&z, sigma);
    rho * (norm2_sq(&prox.minus(x_prev)) + tau * norm2_sq(&y_next.minus(y_prev)))
}

/// Candidate data captured by the acceptance callback so the update step can
/// reuse exactly the quantities the criterion certified.
struct AcceptedCandidate {
    delta: DenseVector,
    x_next: DenseVector,
    lhs: f64,
    rhs: f64,
}

/// Runs one outer iteration: subproblem solve under the acceptance criterion,
/// then the exact multiplier and error-variable updates.
pub fn ripalm_step<O: ProblemOracle + ?Sized>(
    oracle: &O,
    state: &RipalmState,
    cfg: &RipalmConfig,
    ssn_cfg: &SsnConfig,
) -> Result<(RipalmState, IterationRecord), RipalmError> {
    let k = state.k;
    let sigma = cfg.sigma_schedule.value(k);
    let tau = cfg.tau_schedule.value(k);
    let rho = cfg.rho;

    // Degenerate case: y_k already minimizes the subproblem. The gradient at
    // the center is the plain AL gradient (the proximal term vanishes); when
    // it sits at the rounding floor of its own evaluation the error term is
    // numerically zero and the iteration proceeds directly with y_{k+1} = y_k.
    {
        let z0 = state.x.plus_scaled(sigma, &oracle.apply_at(&state.y));
        let p0 = oracle.prox_f(&z0, sigma);
        let ap0 = oracle.apply_a(&p0);
        let delta0 = ap0.minus(oracle.b());
        let zero_tol = 1e-14 * (1.0 + ap0.norm2() + oracle.b().norm2());
        if delta0.norm2() <= zero_tol {
            let rhs = rho * norm2_sq(&p0.minus(&state.x));
            let m = state.y.len();
            let record = IterationRecord {
                k,
                sigma,
                tau,
                inner_iterations: 0,
                criterion_lhs: Some(0.0),
                criterion_rhs: Some(rhs),
                residuals: KktResiduals {
                    primal: f64::NAN,
                    dual: f64::NAN,
                    complementarity: None,
                    gap: f64::NAN,
                },
            };
            let xi = state.x.minus(&p0).scaled(1.0 / sigma);
            let next = RipalmState {
                y: state.y.clone(),
                x: p0,
                w: state.w.clone(),
                k: k + 1,
                delta: DenseVector::zeros(m),
                theta: DenseVector::zeros(m),
                xi,
            };
            return Ok((next, record));
        }
    }

    let mut accepted: Option<AcceptedCandidate> = None;
    let outcome = {
        let x_k = &state.x;
        let y_k = &state.y;
        let w_k = &state.w;
        let mut accept = |y_cand: &DenseVector, grad: &DenseVector| -> bool {
            // grad is the subproblem gradient at y_cand, i.e. the error term
            // Delta for this candidate.
            let lhs = criterion_lhs(w_k, y_cand, grad, sigma);
            let z = x_k.plus_scaled(sigma, &oracle.apply_at(y_cand));
            let x_next = oracle.prox_f(&z, sigma);
            let rhs =
                rho * (norm2_sq(&x_next.minus(x_k)) + tau * norm2_sq(&y_cand.minus(y_k)));
            if lhs <= rhs {
                accepted = Some(AcceptedCandidate {
                    delta: grad.clone(),
                    x_next,
                    lhs,
                    rhs,
                });
                true
            } else {
                false
            }
        };
        let ctx = SubproblemContext {
            x: x_k,
            y_center: y_k,
            sigma,
            tau,
        };
        oracle
            .subsolve(&ctx, &mut accept, ssn_cfg)
            .map_err(|source| RipalmError::SubsolverStalled { outer: k, source })?
    };

    let cand = accepted.expect("subsolve returned without a criterion-accepted candidate");
    let y_next = outcome.y;

    // Exact updates: x_{k+1} = prox(...), w_{k+1} = w_k - sigma Delta.
    let w_next = state.w.plus_scaled(-sigma, &cand.delta);
    let theta = cand
        .delta
        .plus_scaled(-tau / sigma, &y_next.minus(&state.y));
    let xi = state.x.minus(&cand.x_next).scaled(1.0 / sigma);

    let record = IterationRecord {
        k,
        sigma,
        tau,
        inner_iterations: outcome.iterations,
        criterion_lhs: Some(cand.lhs),
        criterion_rhs: Some(cand.rhs),
        residuals: KktResiduals {
            primal: f64::NAN,
            dual: f64::NAN,
            complementarity: None,
            gap: f64::NAN,
        },
    };
    let next = RipalmState {
        y: y_next,
        x: cand.x_next,
        w: w_next,
        k: k + 1,
        delta: cand.delta,
        theta,
        xi,
    };
    Ok((next, record))
}

/// Runs the outer loop until `residual_fn` drops below `cfg.tol` or
/// `cfg.max_outer` iterations have been spent. `MaxIterations` is reported in
/// the status, not as an error; the best (last) state is returned either way.
pub fn ripalm_solve<O: ProblemOracle + ?Sized>(
    oracle: &O,
    cfg: &RipalmConfig,
    ssn_cfg: &SsnConfig,
    residual_fn: impl Fn(&RipalmState) -> KktResiduals,
    init: InitialPoint,
) -> Result<(RipalmState, SolveReport), RipalmError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut state = RipalmState::new(init);
    let mut iterations = Vec::new();

    let mut residuals = residual_fn(&state);
    let mut status = SolveStatus::MaxIterations;
    if residuals.res_max() < cfg.tol {
        status = SolveStatus::Converged;
    } else {
        while state.k < cfg.max_outer {
            let (next, mut record) = ripalm_step(oracle, &state, cfg, ssn_cfg)?;
            state = next;
            residuals = residual_fn(&state);
            record.residuals = residuals;
            iterations.push(record);
            if residuals.res_max() < cfg.tol {
                status = SolveStatus::Converged;
                break;
            }
        }
    }

    let total_inner = iterations.iter().map(|r| r.inner_iterations).sum();
    let report = SolveReport {
        status,
        outer_iterations: state.k,
        total_inner_iterations: total_inner,
        final_residuals: residuals,
        wall_seconds: start.elapsed().as_secs_f64(),
        iterations,
    };
    Ok((state, report))
}
