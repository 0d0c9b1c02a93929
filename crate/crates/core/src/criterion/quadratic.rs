use crate::criterion::{CriterionParams, Iterate};
use crate::error::Result;
use crate::linalg::{self, C64};
use crate::model::{ContrastImage, CurrentSet, FieldOperators, MeasurementSet};

/// `q(v) = v†Hv − 2Re(b†v)` up to a constant, with `H` applied matrix-free.
pub struct QuadraticForm<'a> {
    hessian: Box<dyn Fn(&[C64]) -> Vec<C64> + 'a>,
    pub linear_term: Vec<C64>,
}

impl<'a> QuadraticForm<'a> {
    pub fn new(hessian: impl Fn(&[C64]) -> Vec<C64> + 'a, linear_term: Vec<C64>) -> Self {
        Self { hessian: Box::new(hessian), linear_term }
    }

    pub fn dimension(&self) -> usize {
        self.linear_term.len()
    }

    pub fn apply_hessian(&self, v: &[C64]) -> Vec<C64> {
        (self.hessian)(v)
    }

    /// `v†Hv − 2Re(b†v)`; differences of this match differences of `F`.
    pub fn value(&self, v: &[C64]) -> f64 {
        linalg::re_dot(v, &self.apply_hessian(v)) - 2.0 * linalg::re_dot(&self.linear_term, v)
    }

    /// `2(Hv − b)`
    pub fn gradient(&self, v: &[C64]) -> Vec<C64> {
        let hv = self.apply_hessian(v);
        hv.iter().zip(&self.linear_term).map(|(a, b)| 2.0 * (a - b)).collect()
    }
}

/// `F` as a function of `w_i` alone:
/// `A = G_O†G_O + λ(XG_D − I)†(XG_D − I)`,
/// `b_i = G_O†y_i − λ(XG_D − I)†X E⁰_i`.
///
/// Each Hessian product costs four operator applications.
pub fn w_quadratic<'a>(
    i: usize,
    x: &'a ContrastImage,
    ops: &'a dyn FieldOperators,
    data: &MeasurementSet,
    params: &CriterionParams,
) -> Result<QuadraticForm<'a>> {
    let lambda = params.lambda_at(&x.values, ops, data)?;
    let xv = &x.values;
    let xe0 = linalg::hadamard(xv, ops.incident(i));
    let mut b = ops.observe_adjoint(&data.data[i]);
    let back = coupling_adjoint(xv, &xe0, ops);
    linalg::axpy_re(-lambda, &back, &mut b);
    let hessian = move |v: &[C64]| {
        let gv = ops.couple(v);
        let u: Vec<C64> = (0..v.len()).map(|k| xv[k] * gv[k] - v[k]).collect();
        let mut out = ops.observe_adjoint(&ops.observe(v));
        linalg::axpy_re(lambda, &coupling_adjoint(xv, &u, ops), &mut out);
        out
    };
    Ok(QuadraticForm::new(hessian, b))
}

/// `(XG_D − I)† u = G_D†(conj(x) ⊙ u) − u`
fn coupling_adjoint(x: &[C64], u: &[C64], ops: &dyn FieldOperators) -> Vec<C64> {
    let mut out = ops.couple_adjoint(&linalg::conj_hadamard(x, u));
    for (o, uk) in out.iter_mut().zip(u) {
        *o -= uk;
    }
    out
}

/// `F` as a function of `x` alone: `Q = λ Σ Δ_i†Δ_i + λ_r DᵀD`,
/// `b = λ Σ Δ_i† w_i`, where `Δ_i = diag(E⁰_i + G_D w_i)`.
pub fn x_quadratic<'a>(
    w: &CurrentSet,
    ops: &dyn FieldOperators,
    params: &'a CriterionParams,
) -> Result<QuadraticForm<'a>> {
    let fields: Vec<Vec<C64>> = w
        .currents
        .iter()
        .enumerate()
        .map(|(i, wi)| linalg::add(ops.incident(i), &ops.couple(wi)))
        .collect();
    x_quadratic_from_fields(&fields, &w.currents, params.fixed_lambda()?, params)
}

/// [`x_quadratic`] for known total fields and an explicit λ; no operator
/// applications.
pub fn x_quadratic_from_fields<'a>(
    fields: &[Vec<C64>],
    w: &[Vec<C64>],
    lambda: f64,
    params: &'a CriterionParams,
) -> Result<QuadraticForm<'a>> {
    let n = params.diff.num_cells;
    let mut weight = vec![0.0; n];
    let mut b = vec![C64::new(0.0, 0.0); n];
    for (e, wi) in fields.iter().zip(w) {
        for k in 0..n {
            weight[k] += e[k].norm_sqr();
            b[k] += e[k].conj() * wi[k];
        }
    }
    b.iter_mut().for_each(|z| *z *= lambda);
    let lambda_reg = params.lambda_reg;
    let hessian = move |v: &[C64]| {
        let mut out: Vec<C64> = v.iter().zip(&weight).map(|(z, d)| z * (lambda * d)).collect();
        if lambda_reg > 0.0 {
            linalg::axpy_re(lambda_reg, &params.diff.normal_apply(v), &mut out);
        }
        out
    };
    Ok(QuadraticForm::new(hessian, b))
}

/// Exact x-minimizer of `F2` for fixed currents, pixel by pixel:
/// `x_k = Σ_i conj(Δ_i,kk) w_i,k / Σ_i |Δ_i,kk|²` (zero where the field vanishes).
pub fn pixelwise_contrast(fields: &[Vec<C64>], w: &[Vec<C64>]) -> Vec<C64> {
    let n = fields.first().map_or(0, |f| f.len());
    (0..n)
        .map(|k| {
            let mut num = C64::new(0.0, 0.0);
            let mut den = 0.0;
            for (e, wi) in fields.iter().zip(w) {
                num += e[k].conj() * wi[k];
                den += e[k].norm_sqr();
            }
            if den > 0.0 {
                num / den
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// Total fields at an iterate.
pub fn total_fields(it: &Iterate, ops: &dyn FieldOperators) -> Vec<Vec<C64>> {
    (0..it.num_illuminations()).map(|i| it.total_field(ops, i)).collect()
}
