use rayon::prelude::*;

use crate::criterion::{gradient_w, x_quadratic_from_fields, Iterate};
use crate::error::Result;
use crate::inversion::{
    check_dimensions, init_state, state_from, BlockMemory, InversionOptions, InversionResult, InversionState,
    Recorder, StopReason,
};
use crate::linalg::{self, C64};
use crate::model::{ContrastImage, CountingOperators, FieldOperators, MeasurementSet};
use crate::optim::{linear_cg, linear_cg_system, CgStopRule, LinearSystem};

/// Alternated truncated CG: for each block a fresh linear CG on its quadratic
/// sub-problem, stopped once `‖g‖²` drops by `T`, followed by overrelaxation.
pub fn run_acg_csi(
    ops: &dyn FieldOperators,
    data: &MeasurementSet,
    opts: &InversionOptions,
    grid_side: usize,
    truth: Option<&ContrastImage>,
) -> Result<InversionResult> {
    opts.validate()?;
    let counting = CountingOperators::new(ops);
    let start = init_state(&counting, data, opts.init);
    drive(&counting, data, opts, grid_side, truth, start)
}

pub fn run_acg_csi_from(
    ops: &dyn FieldOperators,
    data: &MeasurementSet,
    opts: &InversionOptions,
    grid_side: usize,
    truth: Option<&ContrastImage>,
    start: InversionState,
) -> Result<InversionResult> {
    opts.validate()?;
    let counting = CountingOperators::new(ops);
    drive(&counting, data, opts, grid_side, truth, start)
}

/// `A = G_O†G_O + λ(XG_D − I)†(XG_D − I)`, keeping `G_O p`, `G_D p` of the last
/// product to advance the cached images of the iterate.
struct CurrentSystem<'a> {
    ops: &'a dyn FieldOperators,
    x: &'a [C64],
    lambda: f64,
    last: Option<(Vec<C64>, Vec<C64>)>,
    observed_step: Vec<C64>,
    coupled_step: Vec<C64>,
}

impl LinearSystem for CurrentSystem<'_> {
    fn apply(&mut self, p: &[C64]) -> Vec<C64> {
        let observed = self.ops.observe(p);
        let coupled = self.ops.couple(p);
        let u: Vec<C64> = (0..p.len()).map(|k| self.x[k] * coupled[k] - p[k]).collect();
        let mut out = self.ops.observe_adjoint(&observed);
        let mut back = self.ops.couple_adjoint(&linalg::conj_hadamard(self.x, &u));
        back.iter_mut().zip(&u).for_each(|(b, uk)| *b -= uk);
        linalg::axpy_re(self.lambda, &back, &mut out);
        self.last = Some((observed, coupled));
        out
    }

    fn accept_step(&mut self, alpha: f64, _p: &[C64]) {
        if let Some((observed, coupled)) = &self.last {
            linalg::axpy_re(alpha, observed, &mut self.observed_step);
            linalg::axpy_re(alpha, coupled, &mut self.coupled_step);
        }
    }
}

struct BlockUpdate {
    w: Vec<C64>,
    observed: Vec<C64>,
    coupled: Vec<C64>,
    iterations: usize,
}

fn solve_block(
    it: &Iterate,
    i: usize,
    ops: &dyn FieldOperators,
    data: &MeasurementSet,
    lambda: f64,
    theta: f64,
    stop: &CgStopRule,
) -> Result<BlockUpdate> {
    let n = it.x.len();
    let g0: Vec<C64> = gradient_w(it, i, ops, data, lambda).iter().map(|z| z * 0.5).collect();
    let mut sys = CurrentSystem {
        ops,
        x: &it.x,
        lambda,
        last: None,
        observed_step: vec![C64::new(0.0, 0.0); ops.num_receivers()],
        coupled_step: vec![C64::new(0.0, 0.0); n],
    };
    let out = linear_cg_system(&mut sys, it.w[i].clone(), g0, stop)?;
    let mut w = it.w[i].clone();
    let mut observed = it.observed[i].clone();
    let mut coupled = it.coupled[i].clone();
    let step = linalg::sub(&out.v, &it.w[i]);
    linalg::axpy_re(theta, &step, &mut w);
    linalg::axpy_re(theta, &sys.observed_step, &mut observed);
    linalg::axpy_re(theta, &sys.coupled_step, &mut coupled);
    Ok(BlockUpdate { w, observed, coupled, iterations: out.iterations })
}

fn drive(
    ops: &CountingOperators,
    data: &MeasurementSet,
    opts: &InversionOptions,
    grid_side: usize,
    truth: Option<&ContrastImage>,
    start: InversionState,
) -> Result<InversionResult> {
    check_dimensions(ops, data, &start, grid_side)?;
    let params = opts.criterion_params(grid_side)?;
    let lambda = params.fixed_lambda()?;
    let stop = CgStopRule::new(opts.inner_reduction, opts.inner_max_iters, 0.0)?;
    let mut rec = Recorder::new(data, &params, opts, truth)?;
    let m = ops.num_illuminations();
    let mut it = Iterate::new(start.x.values, start.w.currents, ops);
    let mut k = start.iterations;
    rec.record(&it, ops, k, ops.count())?;
    let reason = loop {
        if let Some(r) = rec.stop_reason() {
            break r;
        }
        let dyn_ops: &dyn FieldOperators = ops;
        let solve = |i: usize| solve_block(&it, i, dyn_ops, data, lambda, opts.overrelax_w, &stop);
        let updates: Vec<BlockUpdate> = if opts.parallel_w {
            (0..m).into_par_iter().map(solve).collect::<Result<_>>()?
        } else {
            (0..m).map(solve).collect::<Result<_>>()?
        };
        let mut inner = 0;
        for (i, u) in updates.into_iter().enumerate() {
            inner += u.iterations;
            it.w[i] = u.w;
            it.observed[i] = u.observed;
            it.coupled[i] = u.coupled;
        }

        let fields: Vec<Vec<C64>> = (0..m).map(|i| it.total_field(ops, i)).collect();
        let quad = x_quadratic_from_fields(&fields, &it.w, lambda, &params)?;
        let out = linear_cg(&quad, &it.x, &stop)?;
        inner += out.iterations;
        let step = linalg::sub(&out.v, &it.x);
        linalg::axpy_re(opts.overrelax_x, &step, &mut it.x);

        k += 1;
        rec.record(&it, ops, k, ops.count())?;
        if inner == 0 {
            break StopReason::Stagnation;
        }
    };
    let trace = rec.finish();
    let memory = vec![BlockMemory::default(); m];
    Ok(InversionResult { state: state_from(it, k, BlockMemory::default(), memory), trace, stop_reason: reason })
}
