use crate::criterion::QuadraticForm;
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::optim::CgStopRule;

/// Hermitian positive semidefinite operator for [`linear_cg_system`].
pub trait LinearSystem {
    /// `H p`
    fn apply(&mut self, p: &[C64]) -> Vec<C64>;

    /// Called after `v ← v + α p`, with `p` the vector last passed to `apply`.
    fn accept_step(&mut self, _alpha: f64, _p: &[C64]) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub v: Vec<C64>,
    pub iterations: usize,
    /// `‖g‖²` before each iteration, plus the final value.
    pub trace: Vec<f64>,
}

struct QuadSystem<'q, 'a>(&'q QuadraticForm<'a>);

impl LinearSystem for QuadSystem<'_, '_> {
    fn apply(&mut self, p: &[C64]) -> Vec<C64> {
        self.0.apply_hessian(p)
    }
}

/// Minimizes `v†Hv − 2Re(b†v)` starting from `v0`.
pub fn linear_cg(quad: &QuadraticForm, v0: &[C64], stop: &CgStopRule) -> Result<CgOutcome> {
    let hv = quad.apply_hessian(v0);
    let g0 = linalg::sub(&hv, &quad.linear_term);
    linear_cg_system(&mut QuadSystem(quad), v0.to_vec(), g0, stop)
}

/// Linear CG with a caller-supplied initial half-gradient `g0 = H v0 − b`.
///
/// One `apply` per iteration.
pub fn linear_cg_system(
    sys: &mut dyn LinearSystem,
    mut v: Vec<C64>,
    mut g: Vec<C64>,
    stop: &CgStopRule,
) -> Result<CgOutcome> {
    let mut trace = Vec::new();
    let mut p = vec![C64::new(0.0, 0.0); v.len()];
    let mut rho_old = 0.0;
    let mut rho0 = 0.0;
    let mut k = 0;
    loop {
        let rho = linalg::norm_sq(&g);
        if !rho.is_finite() {
            return Err(Error::Divergence(format!("linear CG gradient became {rho} at iteration {k}")));
        }
        trace.push(rho);
        if k == 0 {
            rho0 = rho;
        }
        if stop.satisfied(rho, rho0, k) {
            break;
        }
        if k == 0 {
            p.iter_mut().zip(&g).for_each(|(pi, gi)| *pi = -gi);
        } else {
            let beta = rho / rho_old;
            p.iter_mut().zip(&g).for_each(|(pi, gi)| *pi = -gi + *pi * beta);
        }
        let h = sys.apply(&p);
        let curvature = linalg::re_dot(&p, &h);
        if !(curvature > 0.0) {
            if curvature.is_nan() {
                return Err(Error::Divergence("linear CG curvature is NaN".into()));
            }
            return Err(Error::NotPositiveDefinite { curvature });
        }
        let alpha = rho / curvature;
        linalg::axpy_re(alpha, &p, &mut v);
        linalg::axpy_re(alpha, &h, &mut g);
        sys.accept_step(alpha, &p);
        rho_old = rho;
        k += 1;
    }
    Ok(CgOutcome { v, iterations: k, trace })
}
