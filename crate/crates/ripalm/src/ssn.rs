//! Semismooth Newton method for the strongly convex proximal AL subproblems.
//!
//! Each step solves `H d = -g` inexactly for an element `H` of the problem's
//! generalized Jacobian, with direction tolerance `min(mu_bar, ||g||^{1+mu})`,
//! then backtracks with an Armijo line search on the subproblem objective.
//! Termination is delegated to the caller through an acceptance callback so
//! the outer loop's relative error criterion decides when the subproblem is
//! solved well enough.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{dot, norm2, DenseVector, NumericsError};

/// Line-search and direction-tolerance parameters. Defaults follow the
/// reference configuration: `eta = 1e-4`, `delta = 0.5`, `mu_bar = 1e-3`,
/// `mu = 0.2`, 200 inner iterations per subproblem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SsnConfig {
    /// Cap on the Newton-system residual tolerance, in `(0, 1)`.
    pub mu_bar: f64,
    /// Exponent in the `||g||^{1+mu}` tolerance term, in `(0, 1]`.
    pub mu: f64,
    /// Armijo slope fraction, in `(0, 1/2)`.
    pub eta: f64,
    /// Backtracking factor, in `(0, 1)`.
    pub delta: f64,
    pub max_inner: usize,
}

impl Default for SsnConfig {
    fn default() -> Self {
        SsnConfig {
            mu_bar: 1e-3,
            mu: 0.2,
            eta: 1e-4,
            delta: 0.5,
            max_inner: 200,
        }
    }
}

/// Absolute floor on the Newton-system tolerance. `||g||^{1+mu}` can demand
/// an unattainable residual once the gradient is at rounding level.
const DIRECTION_TOL_FLOOR: f64 = 1e-14;

/// Largest backtracking exponent before the line search gives up; hitting it
/// means the direction was not a descent direction (a Jacobian or gradient
/// bug), not a hard problem.
const MAX_BACKTRACKS: usize = 60;

/// Smooth subproblem interface: objective value, gradient, and an inexact
/// Newton direction through the problem's structured generalized Jacobian.
pub trait SubproblemOracle {
    fn dim(&self) -> usize;
    fn value(&self, y: &DenseVector) -> f64;
    fn gradient(&self, y: &DenseVector) -> DenseVector;
    /// Returns `d` with `||H d + g|| <= tol` for some generalized Jacobian
    /// element `H` at `y`.
    fn newton_solve(
        &self,
        y: &DenseVector,
        grad: &DenseVector,
        tol: f64,
    ) -> Result<DenseVector, NumericsError>;
}

#[derive(Debug, Error)]
pub enum SsnError {
    #[error("inner iteration budget ({0}) exhausted before the acceptance criterion held")]
    InnerBudgetExhausted(usize),
    #[error("line search failed after {backtracks} backtracks (directional derivative {slope:.3e})")]
    LinesearchFailed { backtracks: usize, slope: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub struct SsnOutcome {
    pub y: DenseVector,
    pub iterations: usize,
}

/// Runs the semismooth Newton iteration from `y0` until `accept` approves an
/// iterate. The callback is consulted at every iterate (including `y0`) with
/// the freshly computed gradient.
pub fn ssn_solve<O: SubproblemOracle + ?Sized>(
    oracle: &O,
    y0: &DenseVector,
    accept: &mut dyn FnMut(&DenseVector, &DenseVector) -> bool,
    cfg: &SsnConfig,
) -> Result<SsnOutcome, SsnError> {
    let mut y = y0.clone();
    // Objective at y, carried over from the accepted line-search trial.
    let mut value_at_y: Option<f64> = None;
    for t in 0..=cfg.max_inner {
        let grad = oracle.gradient(&y);
        if accept(&y, &grad) {
            return Ok(SsnOutcome { y, iterations: t });
        }
        if t == cfg.max_inner {
            break;
        }
        let gnorm = norm2(&grad);
        let tol = cfg
            .mu_bar
            .min(gnorm.powf(1.0 + cfg.mu))
            .max(DIRECTION_TOL_FLOOR);
        let dir = oracle.newton_solve(&y, &grad, tol)?;
        if dir.iter().all(|&d| d == 0.0) {
            // Stationary point the acceptance callback refuses; no step can
            // change that, so let the budget run out.
            continue;
        }
        let value0 = value_at_y.unwrap_or_else(|| oracle.value(&y));
        let slope = dot(&grad, &dir);
        let (alpha, trial_value) = armijo_backtrack(oracle, &y, &dir, value0, slope, cfg)?;
        y.add_scaled(alpha, &dir);
        value_at_y = Some(trial_value);
    }
    Err(SsnError::InnerBudgetExhausted(cfg.max_inner))
}

/// Backtracking line search: returns the largest `alpha = delta^i` with
/// `value(y + alpha d) - value(y) <= eta * alpha * <grad(y), d>`.
pub fn armijo_linesearch<O: SubproblemOracle + ?Sized>(
    oracle: &O,
    y: &DenseVector,
    dir: &DenseVector,
    cfg: &SsnConfig,
) -> Result<f64, SsnError> {
    let value0 = oracle.value(y);
    let slope = dot(&oracle.gradient(y), dir);
    armijo_backtrack(oracle, y, dir, value0, slope, cfg).map(|(alpha, _)| alpha)
}

fn armijo_backtrack<O: SubproblemOracle + ?Sized>(
    oracle: &O,
    y: &DenseVector,
    dir: &DenseVector,
    value0: f64,
    slope: f64,
    cfg: &SsnConfig,
) -> Result<(f64, f64), SsnError> {
    if slope >= 0.0 {
        // Not a descent direction; backtracking would only shrink the trial
        // step below rounding and report a spurious zero-decrease success.
        return Err(SsnError::LinesearchFailed {
            backtracks: 0,
            slope,
        });
    }
    let mut alpha = 1.0;
    for i in 0..=MAX_BACKTRACKS {
        let trial = y.plus_scaled(alpha, dir);
        let trial_value = oracle.value(&trial);
        if trial_value - value0 <= cfg.eta * alpha * slope {
            return Ok((alpha, trial_value));
        }
        if i == MAX_BACKTRACKS {
            break;
        }
        alpha *= cfg.delta;
    }
    Err(SsnError::LinesearchFailed {
        backtracks: MAX_BACKTRACKS,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `value(y) = 0.5 ||y||^2`: Newton is exact, one full step reaches 0.
    struct Quadratic {
        dim: usize,
    }

    impl SubproblemOracle for Quadratic {
        fn dim(&self) -> usize {
            self.dim
        }
        fn value(&self, y: &DenseVector) -> f64 {
            0.5 * dot(y, y)
        }
        fn gradient(&self, y: &DenseVector) -> DenseVector {
            y.clone()
        }
        fn newton_solve(
            &self,
            _y: &DenseVector,
            grad: &DenseVector,
            _tol: f64,
        ) -> Result<DenseVector, NumericsError> {
            Ok(grad.scaled(-1.0))
        }
    }

    #[test]
    fn accept_at_start_takes_zero_steps() {
        let oracle = Quadratic { dim: 3 };
        let y0 = DenseVector(vec![1.0, -2.0, 0.5]);
        let mut accept = |_: &DenseVector, _: &DenseVector| true;
        let out = ssn_solve(&oracle, &y0, &mut accept, &SsnConfig::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.y, y0);
    }

    #[test]
    fn quadratic_converges_in_one_step() {
        let oracle = Quadratic { dim: 4 };
        let y0 = DenseVector(vec![3.0, -1.0, 2.0, 0.1]);
        let mut accept = |_: &DenseVector, g: &DenseVector| norm2(g) <= 1e-12;
        let out = ssn_solve(&oracle, &y0, &mut accept, &SsnConfig::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(norm2(&out.y) <= 1e-12);
    }

    #[test]
    fn armijo_full_step_on_quadratic() {
        let oracle = Quadratic { dim: 1 };
        let y = DenseVector(vec![1.0]);
        let d = DenseVector(vec![-1.0]);
        let alpha = armijo_linesearch(&oracle, &y, &d, &SsnConfig::default()).unwrap();
        assert_eq!(alpha, 1.0);
    }

    #[test]
    fn armijo_backtracks_on_overscaled_direction() {
        let oracle = Quadratic { dim: 1 };
        let y = DenseVector(vec![1.0]);
        let d = DenseVector(vec![-1000.0]);
        let cfg = SsnConfig::default();
        let alpha = armijo_linesearch(&oracle, &y, &d, &cfg).unwrap();
        assert!(alpha < 1.0);
        // The accepted step satisfies the Armijo inequality.
        let trial = y.plus_scaled(alpha, &d);
        let slope = dot(&oracle.gradient(&y), &d);
        assert!(oracle.value(&trial) - oracle.value(&y) <= cfg.eta * alpha * slope);
    }

    #[test]
    fn armijo_eta_zero_accepts_any_decrease() {
        let oracle = Quadratic { dim: 2 };
        let y = DenseVector(vec![1.0, 1.0]);
        let d = DenseVector(vec![-1.5, -0.5]);
        let mut cfg = SsnConfig::default();
        cfg.eta = 0.0;
        let alpha = armijo_linesearch(&oracle, &y, &d, &cfg).unwrap();
        assert!(oracle.value(&y.plus_scaled(alpha, &d)) < oracle.value(&y));
    }

    #[test]
    fn linesearch_rejects_ascent_direction() {
        let oracle = Quadratic { dim: 1 };
        let y = DenseVector(vec![1.0]);
        let d = DenseVector(vec![1.0]); // ascent
        assert!(matches!(
            armijo_linesearch(&oracle, &y, &d, &SsnConfig::default()),
            Err(SsnError::LinesearchFailed { .. })
        ));
    }

    #[test]
    fn budget_exhaustion_reported() {
        let oracle = Quadratic { dim: 2 };
        let y0 = DenseVector(vec![1.0, 1.0]);
        let mut never = |_: &DenseVector, _: &DenseVector| false;
        let mut cfg = SsnConfig::default();
        cfg.max_inner = 3;
        assert!(matches!(
            ssn_solve(&oracle, &y0, &mut never, &cfg),
            Err(SsnError::InnerBudgetExhausted(3))
        ));
    }
}
