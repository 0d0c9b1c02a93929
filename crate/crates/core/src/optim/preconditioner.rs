use crate::criterion::{CriterionParams, Iterate};
use crate::error::Result;
use crate::linalg::C64;
use crate::model::FieldOperators;

/// Inverse Hessian diagonal over the stacked `(x, w_1, …, w_M)` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPreconditioner {
    pub inverse_diag: Vec<f64>,
}

impl DiagonalPreconditioner {
    pub fn identity(len: usize) -> Self {
        Self { inverse_diag: vec![1.0; len] }
    }

    pub fn len(&self) -> usize {
        self.inverse_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inverse_diag.is_empty()
    }

    /// `P g`
    pub fn apply(&self, g: &[C64]) -> Vec<C64> {
        g.iter().zip(&self.inverse_diag).map(|(z, d)| z * d).collect()
    }

    /// Entrywise inverse after clamping entries below `1e-12·max` to that floor.
    pub fn from_diagonal(mut diag: Vec<f64>) -> Self {
        let max = diag.iter().copied().filter(|d| d.is_finite()).fold(0.0f64, f64::max);
        let floor = if max > 0.0 { 1e-12 * max } else { 1.0 };
        let mut clamped = 0;
        for d in diag.iter_mut() {
            if !(*d >= floor) {
                *d = floor;
                clamped += 1;
            }
        }
        if clamped > 0 {
            log::warn!("preconditioner: clamped {clamped} diagonal entries to {floor:e}");
        }
        Self { inverse_diag: diag.into_iter().map(|d| 1.0 / d).collect() }
    }
}

/// Hessian diagonals at `it` for a fixed λ.
///
/// The x-block is `λ Σ_i |E⁰_i,k + (G_D w_i)_k|² + λ_r (DᵀD)_kk`. The w-block,
/// shared by all illuminations, is
/// `(G_O†G_O)_kk + λ (Σ_m |x_m|² |G_D,mk|² − 2 Re(x_k G_D,kk) + 1)`.
/// One matrix application (`|G_D|²ᵀ |x|²`).
pub fn hessian_diagonal(it: &Iterate, ops: &dyn FieldOperators, lambda: f64, params: &CriterionParams) -> Vec<f64> {
    let n = it.x.len();
    let m = it.num_illuminations();
    let mut out = vec![0.0; n * (m + 1)];
    for i in 0..m {
        let e = it.total_field(ops, i);
        for k in 0..n {
            out[k] += e[k].norm_sqr();
        }
    }
    let neighbors = params.diff.normal_diagonal();
    for k in 0..n {
        out[k] = lambda * out[k] + params.lambda_reg * neighbors[k];
    }
    let gram = ops.observation_gram_diagonal();
    let gdiag = ops.coupling_diagonal();
    let x_sq: Vec<f64> = it.x.iter().map(|z| z.norm_sqr()).collect();
    let weighted = ops.coupling_abs_sq_apply(&x_sq);
    let block: Vec<f64> = (0..n)
        .map(|k| gram[k] + lambda * (weighted[k] - 2.0 * (it.x[k] * gdiag[k]).re + 1.0))
        .collect();
    for i in 0..m {
        out[n * (i + 1)..n * (i + 2)].copy_from_slice(&block);
    }
    out
}

/// Diagonal preconditioner at `it`.
pub fn build_preconditioner(
    it: &Iterate,
    ops: &dyn FieldOperators,
    lambda: f64,
    params: &CriterionParams,
) -> Result<DiagonalPreconditioner> {
    Ok(DiagonalPreconditioner::from_diagonal(hessian_diagonal(it, ops, lambda, params)))
}
