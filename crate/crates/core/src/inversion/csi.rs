use crate::criterion::{gradient_w, gradient_x, GradientMode, Iterate, LambdaMode};
use crate::error::Result;
use crate::inversion::{
    check_dimensions, init_state, prp_direction, state_from, BlockMemory, InversionOptions, InversionResult,
    InversionState, Recorder, StopReason,
};
use crate::linalg;
use crate::model::{ContrastImage, CountingOperators, FieldOperators, MeasurementSet};
use crate::optim::{line_search_quartic, AdaptiveSlice, SearchDirection};

/// Block-alternating CSI: one conjugate-gradient step per current block, then
/// one on the contrast, with each block's conjugation memory carried across
/// outer iterations.
pub fn run_csi(
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

pub fn run_csi_from(
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
    let mut rec = Recorder::new(data, &params, opts, truth)?;
    let m = ops.num_illuminations();
    let mut x_memory = start.x_memory;
    let mut w_memory = start.w_memory;
    w_memory.resize(m, BlockMemory::default());
    let mut it = Iterate::new(start.x.values, start.w.currents, ops);
    let mut k = start.iterations;
    rec.record(&it, ops, k, ops.count())?;
    let reason = loop {
        if let Some(r) = rec.stop_reason() {
            break r;
        }
        let mut moved = false;
        let lambda = params.lambda_at(&it.x, ops, data)?;
        for (i, memory) in w_memory.iter_mut().enumerate() {
            let g = gradient_w(&it, i, ops, data, lambda);
            let dir = SearchDirection::w_only(i, prp_direction(&g, memory), m);
            let (choice, images) = line_search_quartic(&it, &dir, ops, data, lambda, &params)?;
            if !choice.stagnation {
                images.advance(&mut it, choice.alpha, &dir);
                moved = true;
            }
            let SearchDirection { mut w, .. } = dir;
            *memory = BlockMemory { gradient: Some(g), direction: w[i].take() };
        }

        let g = gradient_x(&it, ops, data, &params, opts.gradient_mode)?;
        let p = prp_direction(&g, &x_memory);
        let choice = if params.lambda_mode == LambdaMode::CsiAdaptive && opts.gradient_mode == GradientMode::Exact {
            AdaptiveSlice::new(&it, &p, ops, data, &params).minimize()?
        } else {
            // λ is frozen at the current contrast for the approximate update.
            let lambda = params.lambda_at(&it.x, ops, data)?;
            let dir = SearchDirection::x_only(p.clone(), m);
            line_search_quartic(&it, &dir, ops, data, lambda, &params)?.0
        };
        if !choice.stagnation {
            linalg::axpy_re(choice.alpha, &p, &mut it.x);
            moved = true;
        }
        x_memory = BlockMemory { gradient: Some(g), direction: Some(p) };

        k += 1;
        rec.record(&it, ops, k, ops.count())?;
        if !moved {
            break StopReason::Stagnation;
        }
    };
    let trace = rec.finish();
    Ok(InversionResult { state: state_from(it, k, x_memory, w_memory), trace, stop_reason: reason })
}
