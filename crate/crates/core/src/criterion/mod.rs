//! The penalized criterion `F = F1 + λ F2 + λ_r ‖D x‖²`, its gradients and
//! its quadratic restrictions.
//!
//! `F1 = Σ_i ‖y_i − G_O w_i‖²` is the observation misfit and
//! `F2 = Σ_i ‖X(E⁰_i + G_D w_i) − w_i‖²` the coupling misfit. Gradients are
//! twice the Wirtinger derivative with respect to the conjugate variable, so
//! a quadratic `v†Hv − 2Re(b†v)` has gradient `2(Hv − b)`.

mod difference;
mod quadratic;

pub use difference::{difference_operator, DifferenceOperator};
pub use quadratic::{
    pixelwise_contrast, total_fields, w_quadratic, x_quadratic, x_quadratic_from_fields, QuadraticForm,
};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::model::{ContrastImage, CurrentSet, FieldOperators, MeasurementSet};

/// How the coupling weight λ is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    Fixed(f64),
    /// `λ = Σ‖y_i‖² / Σ‖X E⁰_i‖²`, re-evaluated at the current contrast.
    CsiAdaptive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionParams {
    pub lambda_mode: LambdaMode,
    pub lambda_reg: f64,
    pub diff: DifferenceOperator,
}

impl CriterionParams {
    pub fn new(lambda_mode: LambdaMode, lambda_reg: f64, grid_side: usize) -> Result<Self> {
        let params = Self { lambda_mode, lambda_reg, diff: difference_operator(grid_side) };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if let LambdaMode::Fixed(l) = self.lambda_mode {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::config(format!("fixed lambda must be > 0, got {l}")));
            }
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::config(format!("lambda_reg must be >= 0, got {}", self.lambda_reg)));
        }
        Ok(())
    }

    /// The fixed λ, or an error for the adaptive mode.
    pub fn fixed_lambda(&self) -> Result<f64> {
        match self.lambda_mode {
            LambdaMode::Fixed(l) => Ok(l),
            LambdaMode::CsiAdaptive => Err(Error::config(
                "this operation needs a fixed lambda; csi-adaptive lambda depends on x",
            )),
        }
    }

    /// λ at contrast `x`.
    pub fn lambda_at(&self, x: &[C64], ops: &dyn FieldOperators, data: &MeasurementSet) -> Result<f64> {
        match self.lambda_mode {
            LambdaMode::Fixed(l) => Ok(l),
            LambdaMode::CsiAdaptive => lambda_csi_values(x, data, ops),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionValue {
    pub f1: f64,
    pub f2: f64,
    pub f_reg: f64,
    pub lambda_used: f64,
    pub total: f64,
}

/// Gradient with respect to `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    Exact,
    /// Drops the `F2 ∇λ` term, as the original CSI update does.
    CsiApprox,
}

/// A point `(x, W)` together with `G_O w_i` and `G_D w_i`.
///
/// Drivers update the cached products by linearity, so criterion values and
/// x-gradients cost no operator applications.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: Vec<C64>,
    pub w: Vec<Vec<C64>>,
    pub observed: Vec<Vec<C64>>,
    pub coupled: Vec<Vec<C64>>,
}

impl Iterate {
    /// Computes the cached products (`2M` operator applications).
    pub fn new(x: Vec<C64>, w: Vec<Vec<C64>>, ops: &dyn FieldOperators) -> Self {
        let observed = w.iter().map(|wi| ops.observe(wi)).collect();
        let coupled = w.iter().map(|wi| ops.couple(wi)).collect();
        Self { x, w, observed, coupled }
    }

    pub fn from_sets(x: &ContrastImage, w: &CurrentSet, ops: &dyn FieldOperators) -> Self {
        Self::new(x.values.clone(), w.currents.clone(), ops)
    }

    pub fn num_illuminations(&self) -> usize {
        self.w.len()
    }

    /// `E⁰_i + G_D w_i`
    pub fn total_field(&self, ops: &dyn FieldOperators, i: usize) -> Vec<C64> {
        linalg::add(ops.incident(i), &self.coupled[i])
    }

    /// `y_i − G_O w_i`
    pub fn observation_residual(&self, data: &MeasurementSet, i: usize) -> Vec<C64> {
        linalg::sub(&data.data[i], &self.observed[i])
    }

    /// `X(E⁰_i + G_D w_i) − w_i`
    pub fn coupling_residual(&self, ops: &dyn FieldOperators, i: usize) -> Vec<C64> {
        let e0 = ops.incident(i);
        (0..self.x.len())
            .map(|k| self.x[k] * (e0[k] + self.coupled[i][k]) - self.w[i][k])
            .collect()
    }

    /// Moves block `i` along `p` given `G_O p` and `G_D p`.
    pub fn step_w(&mut self, i: usize, alpha: f64, p: &[C64], observed_p: &[C64], coupled_p: &[C64]) {
        linalg::axpy_re(alpha, p, &mut self.w[i]);
        linalg::axpy_re(alpha, observed_p, &mut self.observed[i]);
        linalg::axpy_re(alpha, coupled_p, &mut self.coupled[i]);
    }

    pub fn contrast(&self) -> ContrastImage {
        ContrastImage { values: self.x.clone() }
    }

    pub fn currents(&self) -> CurrentSet {
        CurrentSet { currents: self.w.clone() }
    }
}

/// `Σ_i ‖y_i‖²`
pub fn data_energy(data: &MeasurementSet) -> f64 {
    data.energy()
}

/// `e_k = Σ_i |E⁰_i,k|²`
pub fn incident_energy(ops: &dyn FieldOperators) -> Vec<f64> {
    let mut e = vec![0.0; ops.num_cells()];
    for i in 0..ops.num_illuminations() {
        for (ek, z) in e.iter_mut().zip(ops.incident(i)) {
            *ek += z.norm_sqr();
        }
    }
    e
}

/// `Σ_i ‖X E⁰_i‖² = Σ_k |x_k|² e_k`, summed per illumination in a fixed order.
fn illuminated_contrast_energy(x: &[C64], ops: &dyn FieldOperators) -> f64 {
    (0..ops.num_illuminations())
        .map(|i| x.iter().zip(ops.incident(i)).map(|(a, b)| (a * b).norm_sqr()).sum::<f64>())
        .sum()
}

fn lambda_csi_values(x: &[C64], data: &MeasurementSet, ops: &dyn FieldOperators) -> Result<f64> {
    let s = illuminated_contrast_energy(x, ops);
    if !(s > 0.0) {
        return Err(Error::UndefinedWeight);
    }
    Ok(data.energy() / s)
}

/// `λ_CSI = Σ‖y_i‖² / Σ‖X E⁰_i‖²`.
pub fn lambda_csi(x: &ContrastImage, data: &MeasurementSet, ops: &dyn FieldOperators) -> Result<f64> {
    lambda_csi_values(&x.values, data, ops)
}

/// Criterion value from the cached products; no operator applications.
pub fn evaluate(
    it: &Iterate,
    ops: &dyn FieldOperators,
    data: &MeasurementSet,
    params: &CriterionParams,
) -> Result<CriterionValue> {
    let lambda = params.lambda_at(&it.x, ops, data)?;
    let mut f1 = 0.0;
    let mut f2 = 0.0;
    for i in 0..it.num_illuminations() {
        f1 += linalg::norm_sq(&it.observation_residual(data, i));
        f2 += linalg::norm_sq(&it.coupling_residual(ops, i));
    }
    let f_reg = params.diff.penalty(&it.x);
    Ok(CriterionValue { f1, f2, f_reg, lambda_used: lambda, total: f1 + lambda * f2 + params.lambda_reg * f_reg })
}

/// `F(x, W)`.
pub fn eval_criterion(
    x: &ContrastImage,
    w: &CurrentSet,
    ops: &dyn FieldOperators,
    data: &MeasurementSet,
    params: &CriterionParams,
) -> Result<CriterionValue> {
    evaluate(&Iterate::from_sets(x, w, ops), ops, data, params)
}

/// `∇_x F` from the cached products; no operator applications.
///
/// `2λ Σ_i conj(Δ_i) r2_i + F2 ∇λ + 2λ_r DᵀD x`, with
/// `∇λ_CSI = −2 λ_CSI (e ⊙ x) / Σ‖X E⁰_i‖²` in exact mode.
pub fn gradient_x(
    it: &Iterate,
    ops: &dyn FieldOperators,
    data: &MeasurementSet,
    params: &CriterionParams,
    mode: GradientMode,
) -> Result<Vec<C64>> {
    let n = it.x.len();
    let lambda = params.lambda_at(&it.x, ops, data)?;
    let mut coupling = vec![C64::new(0.0, 0.0); n];
    let mut f2 = 0.0;
    for i in 0..it.num_illuminations() {
        let e = it.total_field(ops, i);
        let r2 = it.coupling_residual(ops, i);
        f2 += linalg::norm_sq(&r2);
        for k in 0..n {
            coupling[k] += e[k].conj() * r2[k];
        }
    }
    let mut g: Vec<C64> = coupling.iter().map(|z| z * (2.0 * lambda)).collect();
    if params.lambda_mode == LambdaMode::CsiAdaptive && mode == GradientMode::Exact {
        let s = illuminated_contrast_energy(&it.x, ops);
        let e = incident_energy(ops);
        let factor = -2.0 * lambda * f2 / s;
        for k in 0..n {
            g[k] += it.x[k] * (factor * e[k]);
        }
    }
    if params.lambda_reg > 0.0 {
        let dtd = params.diff.normal_apply(&it.x);
        linalg::axpy_re(2.0 * params.lambda_reg, &dtd, &mut g);
    }
    Ok(g)
}

/// `∇_{w_i} F = 2(A w_i − b_i) = −2 G_O† r1_i + 2λ (G_D† X† r2_i − r2_i)`.
///
/// Two operator applications.
pub fn gradient_w(it: &Iterate, i: usize, ops: &dyn FieldOperators, data: &MeasurementSet, lambda: f64) -> Vec<C64> {
    let r1 = it.observation_residual(data, i);
    let r2 = it.coupling_residual(ops, i);
    let back = ops.observe_adjoint(&r1);
    let xr2 = linalg::conj_hadamard(&it.x, &r2);
    let coupled = ops.couple_adjoint(&xr2);
    (0..it.x.len())
        .map(|k| -2.0 * back[k] + 2.0 * lambda * (coupled[k] - r2[k]))
        .collect()
}

/// `∇_x F` at `(x, W)`.
pub fn grad_x(
    x: &ContrastImage,
    w: &CurrentSet,
    ops: &dyn FieldOperators,
    data: &MeasurementSet,
    params: &CriterionParams,
    mode: GradientMode,
) -> Result<Vec<C64>> {
    gradient_x(&Iterate::from_sets(x, w, ops), ops, data, params, mode)
}

/// `∇_{w_i} F` at `(x, W)`; λ is evaluated at `x` and held constant in `w_i`.
pub fn grad_w(
    i: usize,
    x: &ContrastImage,
    w: &CurrentSet,
    ops: &dyn FieldOperators,
    data: &MeasurementSet,
    params: &CriterionParams,
) -> Result<Vec<C64>> {
    let lambda = params.lambda_at(&x.values, ops, data)?;
    Ok(gradient_w(&Iterate::from_sets(x, w, ops), i, ops, data, lambda))
}

/// Relative squared reconstruction error `‖x − x_true‖² / ‖x_true‖²`.
pub fn mse(x: &ContrastImage, x_true: &ContrastImage) -> Result<f64> {
    let denom = linalg::norm_sq(&x_true.values);
    if denom == 0.0 {
        return Err(Error::config("reference contrast is identically zero"));
    }
    if x.len() != x_true.len() {
        return Err(Error::config("contrast sizes differ"));
    }
    Ok(linalg::norm_sq(&linalg::sub(&x.values, &x_true.values)) / denom)
}
