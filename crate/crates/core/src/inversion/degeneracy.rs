use crate::error::{Error, Result};
use crate::model::{total_field, ContrastImage, CurrentSet, FieldOperators};

/// Diagnostics for a solution blowing up where the total field vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneracyReport {
    /// `F_final / F_init`.
    pub f_ratio: f64,
    pub max_abs_x: f64,
    pub max_abs_truth: f64,
    /// Index of the largest `|x_k|`.
    pub blowup_pixel: usize,
    /// `(Σ_i |E_i,k|² / Σ_i |E⁰_i,k|²)^½` at the blow-up pixel.
    pub field_ratio: f64,
    pub degenerate: bool,
}

pub const F_RATIO_THRESHOLD: f64 = 0.01;
pub const BLOWUP_FACTOR: f64 = 10.0;
pub const FIELD_RATIO_THRESHOLD: f64 = 0.05;

/// Flags a run as degenerate when `F` fell below 1% of its initial value
/// while `max|x|` exceeds ten times `max|x_true|` and the total field at that
/// pixel is under 5% of the incident one. `M` operator applications.
pub fn assess_degeneracy(
    f_init: f64,
    f_final: f64,
    x: &ContrastImage,
    w: &CurrentSet,
    truth: &ContrastImage,
    ops: &dyn FieldOperators,
) -> Result<DegeneracyReport> {
    if !(f_init > 0.0) {
        return Err(Error::config("initial criterion value must be positive"));
    }
    let (blowup_pixel, max_abs_x) = x
        .values
        .iter()
        .map(|z| z.norm())
        .enumerate()
        .fold((0, 0.0f64), |best, (k, v)| if v > best.1 { (k, v) } else { best });
    let max_abs_truth = truth.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut total = 0.0;
    let mut incident = 0.0;
    for (i, wi) in w.currents.iter().enumerate() {
        total += total_field(ops, wi, i)[blowup_pixel].norm_sqr();
        incident += ops.incident(i)[blowup_pixel].norm_sqr();
    }
    let field_ratio = (total / incident).sqrt();
    let f_ratio = f_final / f_init;
    let degenerate = f_ratio < F_RATIO_THRESHOLD
        && max_abs_x > BLOWUP_FACTOR * max_abs_truth
        && field_ratio < FIELD_RATIO_THRESHOLD;
    Ok(DegeneracyReport { f_ratio, max_abs_x, max_abs_truth, blowup_pixel, field_ratio, degenerate })
}
