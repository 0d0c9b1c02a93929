//! Inversion drivers: block-alternating CSI, alternated CG for CSI and
//! simultaneous (preconditioned) CG over `(x, W)`.

mod acg;
mod csi;
mod degeneracy;
mod simultaneous;

pub use acg::{run_acg_csi, run_acg_csi_from};
pub use csi::{run_csi, run_csi_from};
pub use degeneracy::{assess_degeneracy, DegeneracyReport};
pub use simultaneous::{run_simultaneous, run_simultaneous_from};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::criterion::{evaluate, gradient_x, pixelwise_contrast, CriterionParams, GradientMode, Iterate, LambdaMode};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::model::{ContrastImage, CurrentSet, FieldOperators, MeasurementSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Csi,
    AcgCsi,
    SimultaneousCg,
    SimultaneousPcg,
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csi" => Ok(Self::Csi),
            "acg-csi" => Ok(Self::AcgCsi),
            "simultaneous-cg" => Ok(Self::SimultaneousCg),
            "simultaneous-pcg" => Ok(Self::SimultaneousPcg),
            other => Err(Error::config(format!(
                "unknown algorithm '{other}' (expected csi, acg-csi, simultaneous-cg or simultaneous-pcg)"
            ))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csi => "csi",
            Self::AcgCsi => "acg-csi",
            Self::SimultaneousCg => "simultaneous-cg",
            Self::SimultaneousPcg => "simultaneous-pcg",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Zero,
    Backprop,
}

impl FromStr for InitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "backprop" => Ok(Self::Backprop),
            other => Err(Error::config(format!("unknown init mode '{other}' (expected zero or backprop)"))),
        }
    }
}

/// Outer stopping rule; the first condition met ends the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterStop {
    pub max_outer: usize,
    /// Stop once `‖∇_x F‖ ≤ grad_floor · ‖∇_x F₀‖`.
    pub grad_floor: f64,
    /// Stop once `|F_k − F_{k−1}| < f_rel_floor · |F_{k−1}|` for
    /// `f_rel_window` consecutive iterations.
    pub f_rel_floor: f64,
    pub f_rel_window: usize,
    /// Stop once the cumulative operator count reaches this value.
    pub op_budget: Option<u64>,
}

impl Default for OuterStop {
    fn default() -> Self {
        Self { max_outer: 500, grad_floor: 0.0, f_rel_floor: 1e-8, f_rel_window: 5, op_budget: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionOptions {
    pub algorithm: Algorithm,
    pub lambda_mode: LambdaMode,
    pub lambda_reg: f64,
    /// Direction used for the contrast update of CSI.
    pub gradient_mode: GradientMode,
    /// Inner truncation factor `T` on the squared gradient norm.
    pub inner_reduction: f64,
    pub inner_max_iters: usize,
    pub overrelax_w: f64,
    pub overrelax_x: f64,
    pub outer_stop: OuterStop,
    pub parallel_w: bool,
    pub init: InitMode,
    /// Runs simultaneous-pcg with `P = I`.
    pub identity_preconditioner: bool,
    /// Keeps a copy of `x` after every outer iteration in the trace.
    pub record_contrast: bool,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::AcgCsi,
            lambda_mode: LambdaMode::Fixed(0.01),
            lambda_reg: 0.001,
            gradient_mode: GradientMode::Exact,
            inner_reduction: 10.0,
            inner_max_iters: 1000,
            overrelax_w: 1.5,
            overrelax_x: 1.5,
            outer_stop: OuterStop::default(),
            parallel_w: false,
            init: InitMode::Backprop,
            identity_preconditioner: false,
            record_contrast: false,
        }
    }
}

impl InversionOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, theta) in [("overrelax_w", self.overrelax_w), ("overrelax_x", self.overrelax_x)] {
            if !(1.0..2.0).contains(&theta) {
                return Err(Error::config(format!("{name} must lie in [1, 2), got {theta}")));
            }
        }
        if !(self.inner_reduction >= 1.0) {
            return Err(Error::config(format!("inner_reduction T must be >= 1, got {}", self.inner_reduction)));
        }
        if self.inner_max_iters == 0 {
            return Err(Error::config("inner_max_iters must be >= 1"));
        }
        let stop = &self.outer_stop;
        if !(stop.grad_floor >= 0.0) || !(stop.f_rel_floor >= 0.0) {
            return Err(Error::config("outer stop floors must be >= 0"));
        }
        if stop.f_rel_window == 0 {
            return Err(Error::config("f_rel_window must be >= 1"));
        }
        if self.lambda_mode == LambdaMode::CsiAdaptive {
            if self.init == InitMode::Zero {
                return Err(Error::config(
                    "csi-adaptive lambda is undefined at x = 0; use init = backprop",
                ));
            }
            match self.algorithm {
                Algorithm::AcgCsi => {
                    return Err(Error::config(
                        "acg-csi needs a fixed lambda: its quadratic sub-problems assume lambda does not depend on x",
                    ))
                }
                Algorithm::SimultaneousCg | Algorithm::SimultaneousPcg => {
                    return Err(Error::config(
                        "simultaneous schemes need a fixed lambda: the quartic step assumes lambda does not depend on x",
                    ))
                }
                Algorithm::Csi => {}
            }
        }
        Ok(())
    }

    pub fn criterion_params(&self, grid_side: usize) -> Result<CriterionParams> {
        CriterionParams::new(self.lambda_mode, self.lambda_reg, grid_side)
    }
}

/// PRP memory of one block: previous gradient and direction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockMemory {
    pub gradient: Option<Vec<C64>>,
    pub direction: Option<Vec<C64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionState {
    pub x: ContrastImage,
    pub w: CurrentSet,
    pub iterations: usize,
    pub x_memory: BlockMemory,
    pub w_memory: Vec<BlockMemory>,
}

impl InversionState {
    pub fn new(x: ContrastImage, w: CurrentSet) -> Self {
        let m = w.currents.len();
        Self { x, w, iterations: 0, x_memory: BlockMemory::default(), w_memory: vec![BlockMemory::default(); m] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub time_s: f64,
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
    pub f_reg: f64,
    pub lambda: f64,
    /// Exact `‖∇_x F‖`.
    pub grad_x_norm: f64,
    pub mse: Option<f64>,
    pub op_count: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InversionTrace {
    pub rows: Vec<TraceRow>,
    /// `x` after each row, when requested.
    pub contrasts: Vec<Vec<C64>>,
}

impl InversionTrace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxOuter,
    GradFloor,
    FRelFloor,
    OpBudget,
    Stagnation,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MaxOuter => "max_outer",
            Self::GradFloor => "grad_floor",
            Self::FRelFloor => "f_rel_floor",
            Self::OpBudget => "op_budget",
            Self::Stagnation => "stagnation",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionResult {
    pub state: InversionState,
    pub trace: InversionTrace,
    pub stop_reason: StopReason,
}

/// Starting point.
///
/// `Backprop` sets `w_i = η_i G_O†y_i` with the least-squares scale
/// `η_i = ‖G_O†y_i‖² / ‖G_O G_O†y_i‖²`, then the per-pixel minimizer of `F2`
/// for `x`.
pub fn init_state(ops: &dyn FieldOperators, data: &MeasurementSet, mode: InitMode) -> InversionState {
    let n = ops.num_cells();
    let m = ops.num_illuminations();
    match mode {
        InitMode::Zero => InversionState::new(ContrastImage::zeros(n), CurrentSet::zeros(m, n)),
        InitMode::Backprop => {
            let currents: Vec<Vec<C64>> = (0..m)
                .map(|i| {
                    let back = ops.observe_adjoint(&data.data[i]);
                    let denom = linalg::norm_sq(&ops.observe(&back));
                    let eta = if denom > 0.0 { linalg::norm_sq(&back) / denom } else { 0.0 };
                    linalg::scale(eta, &back)
                })
                .collect();
            let fields: Vec<Vec<C64>> =
                currents.iter().enumerate().map(|(i, w)| linalg::add(ops.incident(i), &ops.couple(w))).collect();
            let x = pixelwise_contrast(&fields, &currents);
            InversionState::new(ContrastImage { values: x }, CurrentSet { currents })
        }
    }
}

/// Runs the algorithm selected in `opts` from its configured starting point.
pub fn run_inversion(
    ops: &dyn FieldOperators,
    data: &MeasurementSet,
    opts: &InversionOptions,
    grid_side: usize,
    truth: Option<&ContrastImage>,
) -> Result<InversionResult> {
    match opts.algorithm {
        Algorithm::Csi => run_csi(ops, data, opts, grid_side, truth),
        Algorithm::AcgCsi => run_acg_csi(ops, data, opts, grid_side, truth),
        Algorithm::SimultaneousCg | Algorithm::SimultaneousPcg => run_simultaneous(ops, data, opts, grid_side, truth),
    }
}

/// Runs the algorithm selected in `opts` from `start`.
pub fn run_inversion_from(
    ops: &dyn FieldOperators,
    data: &MeasurementSet,
    opts: &InversionOptions,
    grid_side: usize,
    truth: Option<&ContrastImage>,
    start: InversionState,
) -> Result<InversionResult> {
    match opts.algorithm {
        Algorithm::Csi => run_csi_from(ops, data, opts, grid_side, truth, start),
        Algorithm::AcgCsi => run_acg_csi_from(ops, data, opts, grid_side, truth, start),
        Algorithm::SimultaneousCg | Algorithm::SimultaneousPcg => {
            run_simultaneous_from(ops, data, opts, grid_side, truth, start)
        }
    }
}

/// Trace bookkeeping and outer stopping shared by the drivers.
pub(crate) struct Recorder<'a> {
    data: &'a MeasurementSet,
    params: &'a CriterionParams,
    opts: &'a InversionOptions,
    truth: Option<&'a ContrastImage>,
    start: Instant,
    trace: InversionTrace,
    quiet_iterations: usize,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(
        data: &'a MeasurementSet,
        params: &'a CriterionParams,
        opts: &'a InversionOptions,
        truth: Option<&'a ContrastImage>,
    ) -> Result<Self> {
        if let Some(t) = truth {
            if linalg::norm_sq(&t.values) == 0.0 {
                return Err(Error::config("reference contrast is identically zero"));
            }
        }
        Ok(Self { data, params, opts, truth, start: Instant::now(), trace: InversionTrace::default(), quiet_iterations: 0 })
    }

    /// Appends a row for `it`; costs no operator applications.
    pub(crate) fn record(&mut self, it: &Iterate, ops: &dyn FieldOperators, iter: usize, op_count: u64) -> Result<TraceRow> {
        let value = evaluate(it, ops, self.data, self.params)?;
        let grad = gradient_x(it, ops, self.data, self.params, GradientMode::Exact)?;
        let mse = match self.truth {
            Some(t) => Some(crate::criterion::mse(&it.contrast(), t)?),
            None => None,
        };
        if !value.total.is_finite() {
            return Err(Error::Divergence(format!("criterion became {} at iteration {iter}", value.total)));
        }
        let row = TraceRow {
            iter,
            time_s: self.start.elapsed().as_secs_f64(),
            f: value.total,
            f1: value.f1,
            f2: value.f2,
            f_reg: value.f_reg,
            lambda: value.lambda_used,
            grad_x_norm: linalg::norm(&grad),
            mse,
            op_count,
        };
        self.trace.rows.push(row);
        if self.opts.record_contrast {
            self.trace.contrasts.push(it.x.clone());
        }
        Ok(row)
    }

    /// Outer stopping test after the latest row.
    pub(crate) fn stop_reason(&mut self) -> Option<StopReason> {
        let stop = &self.opts.outer_stop;
        let rows = &self.trace.rows;
        let last = rows.last()?;
        if rows.len() >= 2 {
            let prev = rows[rows.len() - 2];
            if (last.f - prev.f).abs() < stop.f_rel_floor * prev.f.abs() {
                self.quiet_iterations += 1;
            } else {
                self.quiet_iterations = 0;
            }
        }
        if last.iter >= stop.max_outer {
            return Some(StopReason::MaxOuter);
        }
        if let Some(budget) = stop.op_budget {
            if last.op_count >= budget {
                return Some(StopReason::OpBudget);
            }
        }
        if stop.grad_floor > 0.0 && last.grad_x_norm <= stop.grad_floor * rows[0].grad_x_norm {
            return Some(StopReason::GradFloor);
        }
        if self.quiet_iterations >= stop.f_rel_window {
            return Some(StopReason::FRelFloor);
        }
        None
    }

    pub(crate) fn finish(self) -> InversionTrace {
        self.trace
    }
}

/// Fills `state` from the iterate at the end of a run.
pub(crate) fn state_from(it: Iterate, iterations: usize, x_memory: BlockMemory, w_memory: Vec<BlockMemory>) -> InversionState {
    InversionState {
        x: ContrastImage { values: it.x },
        w: CurrentSet { currents: it.w },
        iterations,
        x_memory,
        w_memory,
    }
}

pub(crate) fn check_dimensions(ops: &dyn FieldOperators, data: &MeasurementSet, state: &InversionState, grid_side: usize) -> Result<()> {
    let n = ops.num_cells();
    let m = ops.num_illuminations();
    if grid_side * grid_side != n {
        return Err(Error::config(format!("grid side {grid_side} does not match {n} cells")));
    }
    if data.data.len() != m || data.data.iter().any(|y| y.len() != ops.num_receivers()) {
        return Err(Error::config("measurement dimensions do not match the operators"));
    }
    if state.x.len() != n || state.w.currents.len() != m || state.w.currents.iter().any(|w| w.len() != n) {
        return Err(Error::config("starting point dimensions do not match the operators"));
    }
    Ok(())
}

/// Polak-Ribière direction for one block, restarting on non-descent.
pub(crate) fn prp_direction(g: &[C64], memory: &BlockMemory) -> Vec<C64> {
    let steepest: Vec<C64> = g.iter().map(|z| -z).collect();
    let (Some(g_old), Some(p_old)) = (&memory.gradient, &memory.direction) else {
        return steepest;
    };
    let denom = linalg::norm_sq(g_old);
    if !(denom > 0.0) {
        return steepest;
    }
    let beta = linalg::re_dot(&linalg::sub(g, g_old), g) / denom;
    let p: Vec<C64> = steepest.iter().zip(p_old).map(|(s, q)| s + q * beta).collect();
    if linalg::re_dot(g, &p) < 0.0 {
        p
    } else {
        steepest
    }
}
