use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::optim::{CgStopRule, StepChoice};

/// Objective seen by the nonlinear CG drivers. The problem owns the current
/// point and moves it in [`DescentProblem::step`].
pub trait DescentProblem {
    fn dimension(&self) -> usize;

    /// Criterion value at the current point.
    fn value(&mut self) -> Result<f64>;

    /// Gradient at the current point.
    fn gradient(&mut self) -> Result<Vec<C64>>;

    /// Exact step length along `p` from the current point.
    fn line_search(&mut self, p: &[C64]) -> Result<StepChoice>;

    /// Moves the current point to `v + α p`; `p` is the vector last passed to
    /// `line_search`.
    fn step(&mut self, alpha: f64, p: &[C64]) -> Result<()>;

    /// Inverse diagonal preconditioner at the current point.
    fn preconditioner(&mut self) -> Result<Vec<f64>> {
        Ok(vec![1.0; self.dimension()])
    }

    /// Called after every completed iteration; returning `true` stops.
    fn end_iteration(&mut self, _record: &NonlinearRecord) -> Result<bool> {
        Ok(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearRecord {
    /// 1-based index of the completed iteration.
    pub iteration: usize,
    pub alpha: f64,
    /// Criterion value predicted by the line search.
    pub value: f64,
    /// `‖g‖²` at the new point.
    pub grad_sq: f64,
    pub restarted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearOutcome {
    pub iterations: usize,
    pub records: Vec<NonlinearRecord>,
    /// `‖g‖²` at the starting point.
    pub initial_grad_sq: f64,
    pub stagnated: bool,
}

/// Polak-Ribière-Polyak nonlinear CG.
pub fn nonlinear_prp_cg(problem: &mut dyn DescentProblem, stop: &CgStopRule) -> Result<NonlinearOutcome> {
    run(problem, stop, false)
}

/// Diagonally preconditioned PRP CG; the preconditioner is rebuilt at every
/// iterate and used on both sides of β.
pub fn preconditioned_cg(problem: &mut dyn DescentProblem, stop: &CgStopRule) -> Result<NonlinearOutcome> {
    run(problem, stop, true)
}

fn weighted_dot(u: &[C64], weight: &[f64], v: &[C64]) -> f64 {
    u.iter().zip(weight).zip(v).map(|((a, w), b)| w * (a.conj() * b).re).sum()
}

fn run(problem: &mut dyn DescentProblem, stop: &CgStopRule, precondition: bool) -> Result<NonlinearOutcome> {
    let n = problem.dimension();
    let ones = vec![1.0; n];
    let mut g = problem.gradient()?;
    let g0_sq = linalg::norm_sq(&g);
    let mut p = vec![C64::new(0.0, 0.0); n];
    let mut g_old: Vec<C64> = Vec::new();
    let mut records = Vec::new();
    let mut stagnated = false;
    let mut k = 0;
    loop {
        let g_sq = linalg::norm_sq(&g);
        if !g_sq.is_finite() {
            return Err(Error::Divergence(format!("gradient became {g_sq} at iteration {k}")));
        }
        if stop.satisfied(g_sq, g0_sq, k) {
            break;
        }
        let weight = if precondition { problem.preconditioner()? } else { ones.clone() };
        let pg: Vec<C64> = g.iter().zip(&weight).map(|(z, d)| z * d).collect();
        let mut restarted = k == 0;
        if k == 0 {
            p.iter_mut().zip(&pg).for_each(|(pi, z)| *pi = -z);
        } else {
            let diff = linalg::sub(&g, &g_old);
            let beta = weighted_dot(&diff, &weight, &g) / weighted_dot(&g_old, &weight, &g_old);
            p.iter_mut().zip(&pg).for_each(|(pi, z)| *pi = -z + *pi * beta);
            if !(linalg::re_dot(&g, &p) < 0.0) {
                p.iter_mut().zip(&pg).for_each(|(pi, z)| *pi = -z);
                restarted = true;
            }
        }
        let choice = problem.line_search(&p)?;
        if !choice.alpha.is_finite() {
            return Err(Error::Divergence(format!("line search returned step {}", choice.alpha)));
        }
        if choice.stagnation {
            stagnated = true;
            break;
        }
        problem.step(choice.alpha, &p)?;
        g_old = std::mem::replace(&mut g, problem.gradient()?);
        k += 1;
        let record = NonlinearRecord {
            iteration: k,
            alpha: choice.alpha,
            value: choice.value,
            grad_sq: linalg::norm_sq(&g),
            restarted,
        };
        records.push(record);
        if problem.end_iteration(&record)? {
            break;
        }
    }
    Ok(NonlinearOutcome { iterations: k, records, initial_grad_sq: g0_sq, stagnated })
}
