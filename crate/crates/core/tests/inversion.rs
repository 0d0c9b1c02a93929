mod common;

use common::*;
use mwt_core::criterion::{eval_criterion, CriterionParams, GradientMode, LambdaMode};
use mwt_core::inversion::{
    init_state, run_inversion, run_inversion_from, Algorithm, InitMode, InversionOptions, InversionResult,
    InversionState, StopReason, TraceRow,
};
use mwt_core::linalg::{self, C64};
use mwt_core::model::{CountingOperators, CurrentScaling, ImagingSetup, Instance, MeasurementSet, PhantomKind};

const ALL: [Algorithm; 4] = [Algorithm::Csi, Algorithm::AcgCsi, Algorithm::SimultaneousCg, Algorithm::SimultaneousPcg];

fn options(algorithm: Algorithm, lambda: f64, lambda_reg: f64, max_outer: usize) -> InversionOptions {
    let mut opts = InversionOptions { algorithm, lambda_mode: LambdaMode::Fixed(lambda), lambda_reg, ..Default::default() };
    opts.outer_stop.max_outer = max_outer;
    opts
}

fn noiseless(side: usize, antennas: usize, phantom: PhantomKind) -> Instance {
    Instance::synthetic(ImagingSetup::wavelength_square(side, antennas, antennas), phantom, f64::INFINITY).unwrap()
}

fn without_time(rows: &[TraceRow]) -> Vec<TraceRow> {
    rows.iter().map(|r| TraceRow { time_s: 0.0, ..*r }).collect()
}

fn assert_descent(result: &InversionResult) {
    for pair in result.trace.rows.windows(2) {
        assert!(pair[1].f <= pair[0].f + 1e-12 * pair[0].f.abs(), "{} -> {}", pair[0].f, pair[1].f);
    }
}

#[test]
fn backprop_of_zero_data_is_zero() {
    let inst = small_instance(6, 4, 51);
    let zero = MeasurementSet { data: vec![vec![C64::new(0.0, 0.0); 4]; 4], ..inst.data.clone() };
    let s = init_state(&inst.ops, &zero, InitMode::Backprop);
    assert!(linalg::is_all_zero(&s.x.values));
    assert!(s.w.currents.iter().all(|w| linalg::is_all_zero(w)));
}

#[test]
fn backprop_scale_is_the_least_squares_scale() {
    let inst = small_instance(6, 4, 52);
    let s = init_state(&inst.ops, &inst.data, InitMode::Backprop);
    for i in 0..4 {
        let back = inst.ops.g_o.apply_adjoint(&inst.data.data[i]);
        let eta = linalg::norm(&s.w.currents[i]) / linalg::norm(&back);
        let image = inst.ops.g_o.apply(&back);
        let misfit = |e: f64| linalg::norm_sq(&linalg::sub(&inst.data.data[i], &linalg::scale(e, &image)));
        let best = (0..=4000).map(|k| eta * (0.5 + k as f64 / 4000.0)).fold((eta, misfit(eta)), |b, e| {
            let v = misfit(e);
            if v < b.1 {
                (e, v)
            } else {
                b
            }
        });
        assert!((best.0 - eta).abs() <= 1e-3 * eta, "grid {} vs {}", best.0, eta);
    }
}

#[test]
fn backprop_starts_below_zero_init() {
    for seed in 0..10 {
        let inst = small_instance(8, 6, 100 + seed);
        let p = CriterionParams::new(LambdaMode::Fixed(0.05), 0.001, 8).unwrap();
        let value = |mode| {
            let s = init_state(&inst.ops, &inst.data, mode);
            eval_criterion(&s.x, &s.w, &inst.ops, &inst.data, &p).unwrap().total
        };
        assert!(value(InitMode::Backprop) < value(InitMode::Zero), "seed {seed}");
    }
}

#[test]
fn invalid_combinations_are_rejected() {
    let inst = small_instance(5, 3, 53);
    let mut opts = options(Algorithm::Csi, 0.1, 0.0, 5);
    opts.lambda_mode = LambdaMode::CsiAdaptive;
    opts.init = InitMode::Zero;
    assert!(matches!(run_inversion(&inst.ops, &inst.data, &opts, 5, None), Err(mwt_core::Error::Config(_))));
    opts.init = InitMode::Backprop;
    for alg in [Algorithm::AcgCsi, Algorithm::SimultaneousCg, Algorithm::SimultaneousPcg] {
        opts.algorithm = alg;
        let err = run_inversion(&inst.ops, &inst.data, &opts, 5, None).unwrap_err();
        assert!(matches!(err, mwt_core::Error::Config(_)), "{alg}");
    }
    let mut bad = options(Algorithm::AcgCsi, 0.1, 0.0, 5);
    bad.overrelax_w = 2.0;
    assert!(run_inversion(&inst.ops, &inst.data, &bad, 5, None).is_err());
}

#[test]
fn zero_iterations_keep_the_starting_point() {
    let inst = small_instance(6, 4, 54);
    let init = init_state(&inst.ops, &inst.data, InitMode::Backprop);
    for alg in ALL {
        let r = run_inversion(&inst.ops, &inst.data, &options(alg, 0.05, 0.001, 0), 6, Some(&inst.truth)).unwrap();
        assert_eq!(r.trace.rows.len(), 1);
        assert_eq!(r.stop_reason, StopReason::MaxOuter);
        assert_eq!(r.state.x, init.x);
        assert_eq!(r.state.w, init.w);
    }
}

#[test]
fn truth_is_stationary_on_noiseless_data() {
    let inst = noiseless(8, 6, PhantomKind::SmallSquare);
    let start = InversionState::new(inst.truth.clone(), inst.true_currents.clone());
    let mut cases: Vec<InversionOptions> = ALL.iter().map(|&a| options(a, 0.05, 0.0, 10)).collect();
    let mut adaptive = options(Algorithm::Csi, 1.0, 0.0, 10);
    adaptive.lambda_mode = LambdaMode::CsiAdaptive;
    cases.push(adaptive.clone());
    adaptive.gradient_mode = GradientMode::CsiApprox;
    cases.push(adaptive);
    let x_norm = linalg::norm(&inst.truth.values);
    for opts in cases {
        let r = run_inversion_from(&inst.ops, &inst.data, &opts, 8, None, start.clone()).unwrap();
        let f0 = r.trace.rows[0].f;
        for row in &r.trace.rows {
            assert!((row.f - f0).abs() <= 1e-10, "{}: {} vs {}", opts.algorithm, row.f, f0);
        }
        let dx = linalg::norm(&linalg::sub(&r.state.x.values, &inst.truth.values));
        assert!(dx <= 1e-6 * x_norm, "{}: moved {dx:e}", opts.algorithm);
        for (w, wt) in r.state.w.currents.iter().zip(&inst.true_currents.currents) {
            assert!(linalg::norm(&linalg::sub(w, wt)) <= 1e-6 * linalg::norm(wt));
        }
    }
}

#[test]
fn trace_counts_match_an_external_counter() {
    let inst = small_instance(8, 5, 55);
    for alg in ALL {
        let counter = CountingOperators::new(&inst.ops);
        let r = run_inversion(&counter, &inst.data, &options(alg, 0.05, 0.001, 8), 8, None).unwrap();
        let rows = &r.trace.rows;
        assert_eq!(rows.last().unwrap().op_count, counter.count(), "{alg}");
        for pair in rows.windows(2) {
            assert!(pair[1].op_count > pair[0].op_count, "{alg}");
            assert!(pair[1].time_s >= pair[0].time_s);
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let inst = small_instance(8, 5, 56);
    for alg in ALL {
        let opts = options(alg, 0.05, 0.001, 10);
        let a = run_inversion(&inst.ops, &inst.data, &opts, 8, Some(&inst.truth)).unwrap();
        let b = run_inversion(&inst.ops, &inst.data, &opts, 8, Some(&inst.truth)).unwrap();
        assert_eq!(without_time(&a.trace.rows), without_time(&b.trace.rows), "{alg}");
        assert_eq!(a.state, b.state);
    }
}

#[test]
fn parallel_current_solves_match_sequential() {
    let inst = small_instance(8, 6, 57);
    let mut opts = options(Algorithm::AcgCsi, 0.05, 0.001, 10);
    let seq = run_inversion(&inst.ops, &inst.data, &opts, 8, Some(&inst.truth)).unwrap();
    opts.parallel_w = true;
    let par = run_inversion(&inst.ops, &inst.data, &opts, 8, Some(&inst.truth)).unwrap();
    assert_eq!(without_time(&seq.trace.rows), without_time(&par.trace.rows));
    assert_eq!(seq.state.x, par.state.x);
}

#[test]
fn descent_holds_for_every_driver() {
    let inst = small_instance(10, 8, 58);
    for alg in ALL {
        let r = run_inversion(&inst.ops, &inst.data, &options(alg, 0.05, 0.001, 40), 10, None).unwrap();
        assert_descent(&r);
    }
    let mut opts = options(Algorithm::AcgCsi, 0.05, 0.001, 15);
    opts.overrelax_w = 1.0;
    opts.overrelax_x = 1.0;
    opts.inner_reduction = 1e30;
    let exact = run_inversion(&inst.ops, &inst.data, &opts, 10, None).unwrap();
    assert_descent(&exact);
}

#[test]
fn identity_preconditioner_reproduces_plain_cg() {
    let inst = small_instance(8, 5, 59);
    let plain = run_inversion(&inst.ops, &inst.data, &options(Algorithm::SimultaneousCg, 0.05, 0.001, 25), 8, None).unwrap();
    let mut opts = options(Algorithm::SimultaneousPcg, 0.05, 0.001, 25);
    opts.identity_preconditioner = true;
    let pcg = run_inversion(&inst.ops, &inst.data, &opts, 8, None).unwrap();
    assert_eq!(plain.trace.rows.len(), pcg.trace.rows.len());
    for (a, b) in plain.trace.rows.iter().zip(&pcg.trace.rows) {
        assert!((a.f - b.f).abs() <= 1e-12 * a.f);
    }
    assert_eq!(plain.state.x, pcg.state.x);
}

#[test]
fn preconditioned_iterates_ignore_current_units() {
    let inst = small_instance(8, 5, 60);
    let c = 0.1;
    let scaled = CurrentScaling::new(&inst.ops, c);
    let lambda = 0.05;
    let run = |alg, ops: &dyn mwt_core::model::FieldOperators, l: f64| {
        let mut opts = options(alg, l, 0.001, 30);
        opts.record_contrast = true;
        opts.outer_stop.f_rel_floor = 0.0;
        run_inversion(ops, &inst.data, &opts, 8, None).unwrap()
    };
    let a = run(Algorithm::SimultaneousPcg, &inst.ops, lambda);
    let b = run(Algorithm::SimultaneousPcg, &scaled, lambda * scaled.lambda_factor());
    assert_eq!(a.trace.contrasts.len(), b.trace.contrasts.len());
    for (xa, xb) in a.trace.contrasts.iter().zip(&b.trace.contrasts) {
        assert!(rel_err(xb, xa) <= 1e-8);
    }
    for (wa, wb) in a.state.w.currents.iter().zip(&b.state.w.currents) {
        assert!(rel_err(&linalg::scale(c, wb), wa) <= 1e-8);
    }
    let pa = run(Algorithm::SimultaneousCg, &inst.ops, lambda);
    let pb = run(Algorithm::SimultaneousCg, &scaled, lambda * scaled.lambda_factor());
    let gap = pa.trace.contrasts.iter().zip(&pb.trace.contrasts).map(|(x, y)| rel_err(y, x)).fold(0.0, f64::max);
    assert!(gap > 1e-3, "plain CG should depend on units, gap {gap:e}");
}

#[test]
fn csi_with_exact_gradient_approaches_a_stationary_point() {
    let inst = small_instance(10, 8, 61);
    let mut opts = options(Algorithm::Csi, 0.05, 0.001, 500);
    opts.outer_stop.f_rel_floor = 0.0;
    opts.outer_stop.grad_floor = 1e-2;
    let r = run_inversion(&inst.ops, &inst.data, &opts, 10, None).unwrap();
    assert_eq!(r.stop_reason, StopReason::GradFloor);
    assert_descent(&r);
}

#[test]
fn budget_stop_fires() {
    let inst = small_instance(8, 5, 62);
    let mut opts = options(Algorithm::Csi, 0.05, 0.001, 1000);
    opts.outer_stop.op_budget = Some(300);
    opts.outer_stop.f_rel_floor = 0.0;
    let r = run_inversion(&inst.ops, &inst.data, &opts, 8, None).unwrap();
    assert_eq!(r.stop_reason, StopReason::OpBudget);
    let rows = &r.trace.rows;
    assert!(rows.last().unwrap().op_count >= 300);
    assert!(rows[rows.len() - 2].op_count < 300);
}
