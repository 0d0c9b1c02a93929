use crate::criterion::{evaluate, gradient_w, gradient_x, CriterionParams, GradientMode, Iterate};
use crate::error::Result;
use crate::inversion::{
    check_dimensions, init_state, state_from, Algorithm, BlockMemory, InversionOptions, InversionResult,
    InversionState, Recorder, StopReason,
};
use crate::linalg::C64;
use crate::model::{ContrastImage, CountingOperators, FieldOperators, MeasurementSet};
use crate::optim::{
    build_preconditioner, line_search_quartic, nonlinear_prp_cg, preconditioned_cg, CgStopRule, DescentProblem,
    DirectionImages, NonlinearRecord, SearchDirection, StepChoice,
};

/// Nonlinear CG (optionally preconditioned) on the stacked `(x, w_1, …, w_M)`.
pub fn run_simultaneous(
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

pub fn run_simultaneous_from(
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

struct Stacked<'r, 'a> {
    it: Iterate,
    ops: &'a CountingOperators<'a>,
    data: &'a MeasurementSet,
    params: &'a CriterionParams,
    lambda: f64,
    identity_preconditioner: bool,
    pending: Option<(SearchDirection, DirectionImages)>,
    rec: &'r mut Recorder<'a>,
    first_iteration: usize,
    stop: Option<StopReason>,
}

impl DescentProblem for Stacked<'_, '_> {
    fn dimension(&self) -> usize {
        self.it.x.len() * (self.it.num_illuminations() + 1)
    }

    fn value(&mut self) -> Result<f64> {
        Ok(evaluate(&self.it, self.ops, self.data, self.params)?.total)
    }

    fn gradient(&mut self) -> Result<Vec<C64>> {
        let mut g = gradient_x(&self.it, self.ops, self.data, self.params, GradientMode::Exact)?;
        for i in 0..self.it.num_illuminations() {
            g.extend(gradient_w(&self.it, i, self.ops, self.data, self.lambda));
        }
        Ok(g)
    }

    fn line_search(&mut self, p: &[C64]) -> Result<StepChoice> {
        let dir = SearchDirection::from_stacked(p, self.it.x.len(), self.it.num_illuminations());
        let (choice, images) = line_search_quartic(&self.it, &dir, self.ops, self.data, self.lambda, self.params)?;
        self.pending = Some((dir, images));
        Ok(choice)
    }

    fn step(&mut self, alpha: f64, _p: &[C64]) -> Result<()> {
        if let Some((dir, images)) = self.pending.take() {
            images.advance(&mut self.it, alpha, &dir);
        }
        Ok(())
    }

    fn preconditioner(&mut self) -> Result<Vec<f64>> {
        if self.identity_preconditioner {
            return Ok(vec![1.0; self.dimension()]);
        }
        Ok(build_preconditioner(&self.it, self.ops, self.lambda, self.params)?.inverse_diag)
    }

    fn end_iteration(&mut self, record: &NonlinearRecord) -> Result<bool> {
        let k = self.first_iteration + record.iteration;
        self.rec.record(&self.it, self.ops, k, self.ops.count())?;
        self.stop = self.rec.stop_reason();
        Ok(self.stop.is_some())
    }
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
    let mut rec = Recorder::new(data, &params, opts, truth)?;
    let m = ops.num_illuminations();
    let it = Iterate::new(start.x.values, start.w.currents, ops);
    let first = start.iterations;
    rec.record(&it, ops, first, ops.count())?;
    let (it, k, reason) = match rec.stop_reason() {
        Some(r) => (it, first, r),
        None => {
            let mut problem = Stacked {
                it,
                ops,
                data,
                params: &params,
                lambda,
                identity_preconditioner: opts.identity_preconditioner,
                pending: None,
                rec: &mut rec,
                first_iteration: first,
                stop: None,
            };
            // Outer stopping is decided in `end_iteration`.
            let inner_stop = CgStopRule::new(f64::INFINITY, usize::MAX, 0.0)?;
            let outcome = match opts.algorithm {
                Algorithm::SimultaneousPcg => preconditioned_cg(&mut problem, &inner_stop)?,
                _ => nonlinear_prp_cg(&mut problem, &inner_stop)?,
            };
            let reason = match problem.stop {
                Some(r) => r,
                None if outcome.stagnated => StopReason::Stagnation,
                None => StopReason::GradFloor,
            };
            (problem.it, first + outcome.iterations, reason)
        }
    };
    let trace = rec.finish();
    let memory = vec![BlockMemory::default(); m];
    Ok(InversionResult { state: state_from(it, k, BlockMemory::default(), memory), trace, stop_reason: reason })
}
