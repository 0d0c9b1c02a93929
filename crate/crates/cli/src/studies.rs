//! Experiment runners. Each returns its results and, given an output
//! directory, writes them there.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::info;
use mwt_core::criterion::{mse, GradientMode, LambdaMode};
use mwt_core::inversion::{
    assess_degeneracy, init_state, run_inversion, run_inversion_from, Algorithm, DegeneracyReport, InversionOptions,
    InversionResult, InversionTrace,
};
use mwt_core::io::{load_contrast, load_measurements, save_contrast, save_measurements, save_trace};
use mwt_core::model::{build_grid, build_operators, make_phantom, total_field, FieldOperators};
use mwt_core::{ContrastImage, Error, Instance, MeasurementSet, Result, ScatteringOperators};

use crate::config::ExperimentConfig;

/// Model, data and optional reference contrast for one experiment.
pub struct Prepared {
    pub ops: ScatteringOperators,
    pub data: MeasurementSet,
    pub truth: Option<ContrastImage>,
    pub grid_side: usize,
}

/// Simulates data from the phantom, or loads the configured files.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let grid_side = cfg.setup.grid_side;
    let Some(path) = &cfg.data else {
        let inst = Instance::synthetic(cfg.setup.clone(), cfg.phantom, cfg.snr_db)?;
        return Ok(Prepared { ops: inst.ops, data: inst.data, truth: Some(inst.truth), grid_side });
    };
    let grid = build_grid(&cfg.setup)?;
    let ops = build_operators(&cfg.setup, &grid)?;
    let data = load_measurements(path)?;
    if data.data.len() != ops.num_illuminations() || data.data.iter().any(|b| b.len() != ops.num_receivers()) {
        return Err(Error::Config(format!(
            "{} does not match the setup ({} emitters, {} receivers)",
            path.display(),
            ops.num_illuminations(),
            ops.num_receivers()
        )));
    }
    let truth = cfg.truth.as_deref().map(load_contrast).transpose()?;
    if truth.as_ref().is_some_and(|t| t.len() != ops.num_cells()) {
        return Err(Error::Config("reference contrast does not match the grid".into()));
    }
    Ok(Prepared { ops, data, truth, grid_side })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Headline numbers of one inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_f: f64,
    pub delta_x: Option<f64>,
    pub iterations: usize,
    pub op_count: u64,
    pub wall_time_s: f64,
    pub stop_reason: String,
}

impl RunSummary {
    pub fn of(result: &InversionResult, wall_time_s: f64) -> Self {
        let last = result.trace.last().copied();
        Self {
            final_f: last.map_or(f64::NAN, |r| r.f),
            delta_x: last.and_then(|r| r.mse),
            iterations: last.map_or(0, |r| r.iter),
            op_count: last.map_or(0, |r| r.op_count),
            wall_time_s,
            stop_reason: result.stop_reason.to_string(),
        }
    }

    pub fn to_text(&self) -> String {
        let delta = self.delta_x.map_or("n/a".to_string(), |d| format!("{d:.10e}"));
        format!(
            "final_F {:.10e}\ndelta_x {delta}\niterations {}\nop_count {}\nwall_time_s {:.3}\nstop_reason {}\n",
            self.final_f, self.iterations, self.op_count, self.wall_time_s, self.stop_reason
        )
    }
}

/// Writes `phantom.contrast` and returns the image.
pub fn phantom(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ContrastImage> {
    let grid = build_grid(&cfg.setup)?;
    let x = make_phantom(cfg.phantom, &grid);
    if let Some(dir) = out {
        ensure_dir(dir)?;
        save_contrast(&dir.join("phantom.contrast"), &x)?;
    }
    Ok(x)
}

/// Writes `truth.contrast` and the noisy `measurements.txt`.
pub fn simulate(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Instance> {
    let inst = Instance::synthetic(cfg.setup.clone(), cfg.phantom, cfg.snr_db)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        save_contrast(&dir.join("truth.contrast"), &inst.truth)?;
        save_measurements(&dir.join("measurements.txt"), &inst.data)?;
    }
    Ok(inst)
}

fn write_run(dir: &Path, result: &InversionResult, summary: &RunSummary) -> Result<()> {
    ensure_dir(dir)?;
    save_trace(&dir.join("trace.csv"), &result.trace)?;
    save_contrast(&dir.join("solution.contrast"), &result.state.x)?;
    fs::write(dir.join("summary.txt"), summary.to_text())?;
    Ok(())
}

/// Single inversion with `trace.csv`, `solution.contrast` and `summary.txt`.
pub fn invert(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(InversionResult, RunSummary)> {
    let p = prepare(cfg)?;
    let clock = Instant::now();
    let result = run_inversion(&p.ops, &p.data, &cfg.inversion, p.grid_side, p.truth.as_ref())?;
    let summary = RunSummary::of(&result, clock.elapsed().as_secs_f64());
    info!("{} finished: {}", cfg.inversion.algorithm, summary.to_text().replace('\n', "; "));
    if let Some(dir) = out {
        write_run(dir, &result, &summary)?;
    }
    Ok((result, summary))
}

#[derive(Debug, Clone)]
pub struct DegeneracyOutcome {
    pub result: InversionResult,
    pub report: DegeneracyReport,
    /// `max_k |x_k|` after each trace row.
    pub max_abs_x: Vec<f64>,
}

/// The demo options: CSI with adaptive λ, exact gradients and no penalty.
pub fn degeneracy_options(base: &InversionOptions) -> InversionOptions {
    InversionOptions {
        algorithm: Algorithm::Csi,
        lambda_mode: LambdaMode::CsiAdaptive,
        lambda_reg: 0.0,
        gradient_mode: GradientMode::Exact,
        record_contrast: true,
        ..base.clone()
    }
}

/// Minimizes the adaptive-λ criterion and checks whether the solution has
/// blown up where the total field vanishes.
pub fn degeneracy_demo(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<DegeneracyOutcome> {
    let p = prepare(cfg)?;
    let truth = p.truth.as_ref().ok_or_else(|| Error::Config("the degeneracy demo needs a reference contrast".into()))?;
    let opts = degeneracy_options(&cfg.inversion);
    let clock = Instant::now();
    let mut result = run_inversion(&p.ops, &p.data, &opts, p.grid_side, Some(truth))?;
    let wall = clock.elapsed().as_secs_f64();
    let rows = &result.trace.rows;
    let (first, last) = (rows[0].f, rows[rows.len() - 1].f);
    let report = assess_degeneracy(first, last, &result.state.x, &result.state.w, truth, &p.ops)?;
    let max_abs_x = result.trace.contrasts.iter().map(|x| mwt_core::linalg::max_abs(x)).collect();
    result.trace.contrasts.clear();
    info!("degeneracy demo: {report:?}");
    let outcome = DegeneracyOutcome { result, report, max_abs_x };
    if let Some(dir) = out {
        let summary = RunSummary::of(&outcome.result, wall);
        write_run(dir, &outcome.result, &summary)?;
        let mut csv = String::from("iter,F,lambda_csi,max_abs_x\n");
        for (r, m) in outcome.result.trace.rows.iter().zip(&outcome.max_abs_x) {
            writeln!(csv, "{},{:.16e},{:.16e},{:.16e}", r.iter, r.f, r.lambda, m).unwrap();
        }
        fs::write(dir.join("degeneracy.csv"), csv)?;
        let mut fields = String::from("illumination,pixel,abs_total,abs_incident\n");
        for (i, w) in outcome.result.state.w.currents.iter().enumerate() {
            let e = total_field(&p.ops, w, i);
            for (k, (t, e0)) in e.iter().zip(p.ops.incident(i)).enumerate() {
                writeln!(fields, "{i},{k},{:.16e},{:.16e}", t.norm(), e0.norm()).unwrap();
            }
        }
        fs::write(dir.join("total_field.csv"), fields)?;
        let r = &outcome.report;
        let text = format!(
            "{}degenerate {}\nf_ratio {:.6e}\nmax_abs_x {:.6e}\nmax_abs_truth {:.6e}\nblowup_pixel {}\nfield_ratio {:.6e}\n",
            summary.to_text(),
            r.degenerate,
            r.f_ratio,
            r.max_abs_x,
            r.max_abs_truth,
            r.blowup_pixel,
            r.field_ratio
        );
        fs::write(dir.join("summary.txt"), text)?;
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    /// `None` when the run failed.
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

/// One inversion per λ of the grid; failures are recorded and the sweep
/// continues. Writes `sweep.csv`.
pub fn lambda_sweep(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<SweepRow>> {
    let p = prepare(cfg)?;
    let mut rows = Vec::with_capacity(cfg.lambdas.len());
    for &lambda in &cfg.lambdas {
        let opts = InversionOptions { lambda_mode: LambdaMode::Fixed(lambda), ..cfg.inversion.clone() };
        let clock = Instant::now();
        let row = match run_inversion(&p.ops, &p.data, &opts, p.grid_side, p.truth.as_ref()) {
            Ok(r) => SweepRow { lambda, summary: Some(RunSummary::of(&r, clock.elapsed().as_secs_f64())), error: None },
            Err(e) => SweepRow { lambda, summary: None, error: Some(e.to_string()) },
        };
        info!("lambda {lambda:e}: {:?}", row.summary.as_ref().map(|s| (s.delta_x, s.op_count)));
        rows.push(row);
    }
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let mut csv = String::from("lambda,delta_x,wall_time_s,op_count,iterations,stop_reason,error\n");
        for r in &rows {
            match &r.summary {
                Some(s) => {
                    let d = s.delta_x.map(|d| format!("{d:.16e}")).unwrap_or_default();
                    writeln!(
                        csv,
                        "{:.16e},{d},{:.6},{},{},{},",
                        r.lambda, s.wall_time_s, s.op_count, s.iterations, s.stop_reason
                    )
                    .unwrap();
                }
                None => {
                    let msg = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
                    writeln!(csv, "{:.16e},,,,,,{msg}", r.lambda).unwrap();
                }
            }
        }
        fs::write(dir.join("sweep.csv"), csv)?;
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct RegStudyOutcome {
    /// Unpenalized run to convergence.
    pub unregularized: InversionResult,
    /// Iteration of the unpenalized run with the smallest `Δ_x`.
    pub early_iteration: usize,
    pub early_contrast: ContrastImage,
    pub early_delta_x: f64,
    /// Penalized run to convergence.
    pub regularized: InversionResult,
}

impl RegStudyOutcome {
    pub fn unregularized_delta_x(&self) -> f64 {
        self.unregularized.trace.last().and_then(|r| r.mse).unwrap_or(f64::NAN)
    }

    pub fn regularized_delta_x(&self) -> f64 {
        self.regularized.trace.last().and_then(|r| r.mse).unwrap_or(f64::NAN)
    }
}

/// Unpenalized at convergence, unpenalized stopped at its best `Δ_x`, and
/// penalized at convergence.
pub fn reg_study(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RegStudyOutcome> {
    let p = prepare(cfg)?;
    let truth = p.truth.as_ref().ok_or_else(|| Error::Config("the regularization study needs a reference contrast".into()))?;
    let unreg_opts = InversionOptions { lambda_reg: 0.0, record_contrast: true, ..cfg.inversion.clone() };
    let mut unregularized = run_inversion(&p.ops, &p.data, &unreg_opts, p.grid_side, Some(truth))?;
    let (best, _) = unregularized
        .trace
        .rows
        .iter()
        .enumerate()
        .map(|(j, r)| (j, r.mse.unwrap_or(f64::INFINITY)))
        .fold((0, f64::INFINITY), |acc, (j, d)| if d < acc.1 { (j, d) } else { acc });
    let early_contrast = ContrastImage { values: std::mem::take(&mut unregularized.trace.contrasts[best]) };
    unregularized.trace.contrasts.clear();
    let early_delta_x = mse(&early_contrast, truth)?;
    let early_iteration = unregularized.trace.rows[best].iter;
    let reg_opts = InversionOptions { lambda_reg: cfg.reg_lambda, record_contrast: false, ..cfg.inversion.clone() };
    let regularized = run_inversion(&p.ops, &p.data, &reg_opts, p.grid_side, Some(truth))?;
    let outcome = RegStudyOutcome { unregularized, early_iteration, early_contrast, early_delta_x, regularized };
    info!(
        "reg study: unregularized {:.4}, early {:.4} at {}, regularized {:.4}",
        outcome.unregularized_delta_x(),
        outcome.early_delta_x,
        outcome.early_iteration,
        outcome.regularized_delta_x()
    );
    if let Some(dir) = out {
        ensure_dir(dir)?;
        save_contrast(&dir.join("unregularized.contrast"), &outcome.unregularized.state.x)?;
        save_contrast(&dir.join("early_stopped.contrast"), &outcome.early_contrast)?;
        save_contrast(&dir.join("regularized.contrast"), &outcome.regularized.state.x)?;
        save_trace(&dir.join("trace_unregularized.csv"), &outcome.unregularized.trace)?;
        save_trace(&dir.join("trace_regularized.csv"), &outcome.regularized.trace)?;
        let unreg_iters = outcome.unregularized.trace.last().map_or(0, |r| r.iter);
        let reg_iters = outcome.regularized.trace.last().map_or(0, |r| r.iter);
        let csv = format!(
            "run,lambda_reg,iteration,delta_x\nunregularized,0,{unreg_iters},{:.16e}\nearly_stopped,0,{},{:.16e}\nregularized,{},{reg_iters},{:.16e}\n",
            outcome.unregularized_delta_x(),
            outcome.early_iteration,
            outcome.early_delta_x,
            cfg.reg_lambda,
            outcome.regularized_delta_x()
        );
        fs::write(dir.join("reg_study.csv"), csv)?;
    }
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct RaceEntry {
    pub options: InversionOptions,
    pub result: InversionResult,
}

/// F of the last row within `budget` operator applications.
pub fn f_at_budget(trace: &InversionTrace, budget: u64) -> Option<f64> {
    trace.rows.iter().take_while(|r| r.op_count <= budget).last().map(|r| r.f)
}

/// Operator count of the first row with `F ≤ target`.
pub fn ops_to_reach(trace: &InversionTrace, target: f64) -> Option<u64> {
    trace.rows.iter().find(|r| r.f <= target).map(|r| r.op_count)
}

/// Runs every contender from one shared starting point, concurrently.
/// Counts exclude the shared initialization. Writes one
/// `trace_<k>_<algorithm>.csv` per contender and `race.csv`.
pub fn race(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<RaceEntry>> {
    let p = prepare(cfg)?;
    let contenders = cfg.race_options();
    let start = init_state(&p.ops, &p.data, cfg.inversion.init);
    let results: Vec<Result<InversionResult>> = std::thread::scope(|s| {
        let handles: Vec<_> = contenders
            .iter()
            .map(|o| {
                let (p, start) = (&p, start.clone());
                s.spawn(move || run_inversion_from(&p.ops, &p.data, o, p.grid_side, p.truth.as_ref(), start))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("race worker panicked")).collect()
    });
    let entries = contenders
        .into_iter()
        .zip(results)
        .map(|(options, r)| Ok(RaceEntry { options, result: r? }))
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let reference = entries[0].result.trace.last().map_or(f64::NAN, |r| r.f);
        let mut csv = String::from("run,algorithm,final_f,op_count,ops_to_reference_f\n");
        for (k, e) in entries.iter().enumerate() {
            let name = format!("trace_{k}_{}.csv", e.options.algorithm);
            save_trace(&dir.join(name), &e.result.trace)?;
            let last = e.result.trace.last();
            let reach = ops_to_reach(&e.result.trace, reference).map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                csv,
                "{k},{},{:.16e},{},{reach}",
                e.options.algorithm,
                last.map_or(f64::NAN, |r| r.f),
                last.map_or(0, |r| r.op_count)
            )
            .unwrap();
        }
        fs::write(dir.join("race.csv"), csv)?;
    }
    Ok(entries)
}

/// Spearman rank correlation, ties sharing their average rank.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut s = 0;
        while s < idx.len() {
            let mut e = s;
            while e + 1 < idx.len() && v[idx[e + 1]] == v[idx[s]] {
                e += 1;
            }
            let avg = (s + e) as f64 / 2.0 + 1.0;
            for &i in &idx[s..=e] {
                r[i] = avg;
            }
            s = e + 1;
        }
        r
    }
    assert_eq!(a.len(), b.len(), "spearman needs paired samples");
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        // 1 − 6Σd²/(n(n²−1)) without ties
        let r = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]);
        assert!((r - (1.0 - 6.0 * 4.0 / 120.0)).abs() < 1e-12);
        // tied values share the average rank
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 3.0]);
        let expected = 4.5 / (5.0f64 * 4.5).sqrt();
        assert!((r - expected).abs() < 1e-12, "{r} vs {expected}");
    }
}
