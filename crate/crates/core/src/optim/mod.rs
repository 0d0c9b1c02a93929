//! Complex-valued conjugate-gradient machinery.

mod line_search;
mod linear;
mod nonlinear;
mod preconditioner;
mod roots;

pub use line_search::{
    line_search_polynomial, line_search_quartic, AdaptiveSlice, DirectionImages, LineSearchPolynomial, SearchDirection,
    StepChoice,
};
pub use linear::{linear_cg, linear_cg_system, CgOutcome, LinearSystem};
pub use nonlinear::{nonlinear_prp_cg, preconditioned_cg, DescentProblem, NonlinearOutcome, NonlinearRecord};
pub use preconditioner::{build_preconditioner, hessian_diagonal, DiagonalPreconditioner};
pub use roots::{cubic_real_roots, polynomial_real_roots};

use crate::error::{Error, Result};

/// Stops when `‖g‖² ≤ ‖g₀‖² / T`, after `max_iters` iterations, or when
/// `‖g‖² ≤ absolute_floor`, whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStopRule {
    pub reduction_factor: f64,
    pub max_iters: usize,
    pub absolute_floor: f64,
}

impl CgStopRule {
    pub fn new(reduction_factor: f64, max_iters: usize, absolute_floor: f64) -> Result<Self> {
        let rule = Self { reduction_factor, max_iters, absolute_floor };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reduction_factor >= 1.0) {
            return Err(Error::config(format!("reduction factor T must be >= 1, got {}", self.reduction_factor)));
        }
        if !(self.absolute_floor >= 0.0) {
            return Err(Error::config("absolute gradient floor must be >= 0"));
        }
        Ok(())
    }

    /// True when iteration `k` (0-based) with squared gradient `g_sq`
    /// should not be performed.
    pub fn satisfied(&self, g_sq: f64, g0_sq: f64, k: usize) -> bool {
        k >= self.max_iters || g_sq <= self.absolute_floor || g_sq <= g0_sq / self.reduction_factor
    }
}
