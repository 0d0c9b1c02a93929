use crate::criterion::{incident_energy, CriterionParams, Iterate};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::model::{FieldOperators, MeasurementSet};
use crate::optim::roots::{cubic_real_roots, polynomial_real_roots};

/// Search direction over `(x, w_1, …, w_M)`; `None` marks a frozen block.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchDirection {
    pub x: Option<Vec<C64>>,
    pub w: Vec<Option<Vec<C64>>>,
}

impl SearchDirection {
    pub fn x_only(p: Vec<C64>, num_illuminations: usize) -> Self {
        Self { x: Some(p), w: vec![None; num_illuminations] }
    }

    pub fn w_only(i: usize, p: Vec<C64>, num_illuminations: usize) -> Self {
        let mut w = vec![None; num_illuminations];
        w[i] = Some(p);
        Self { x: None, w }
    }

    /// Splits a stacked `(p_x, p_1, …, p_M)` vector.
    pub fn from_stacked(p: &[C64], n: usize, num_illuminations: usize) -> Self {
        Self {
            x: Some(p[..n].to_vec()),
            w: (0..num_illuminations).map(|i| Some(p[n * (i + 1)..n * (i + 2)].to_vec())).collect(),
        }
    }
}

/// `G_O p_i` and `G_D p_i` for each active current direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionImages {
    pub observed: Vec<Option<Vec<C64>>>,
    pub coupled: Vec<Option<Vec<C64>>>,
}

impl DirectionImages {
    /// Two operator applications per active block.
    pub fn compute(dir: &SearchDirection, ops: &dyn FieldOperators) -> Self {
        let observed = dir.w.iter().map(|p| p.as_ref().map(|p| ops.observe(p))).collect();
        let coupled = dir.w.iter().map(|p| p.as_ref().map(|p| ops.couple(p))).collect();
        Self { observed, coupled }
    }

    /// Moves `it` by `α·dir`, updating the cached products without operator
    /// applications.
    pub fn advance(&self, it: &mut Iterate, alpha: f64, dir: &SearchDirection) {
        if let Some(px) = &dir.x {
            linalg::axpy_re(alpha, px, &mut it.x);
        }
        for (i, p) in dir.w.iter().enumerate() {
            if let (Some(p), Some(o), Some(c)) = (p, &self.observed[i], &self.coupled[i]) {
                it.step_w(i, alpha, p, o, c);
            }
        }
    }
}

/// `F(α) = R₀ + αR₁ + α²R₂ + α³R₃ + α⁴R₄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchPolynomial {
    pub r: [f64; 5],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepChoice {
    pub alpha: f64,
    /// Predicted criterion value at `alpha`.
    pub value: f64,
    /// The slice is flat: no step is possible.
    pub stagnation: bool,
}

/// Relative gap under which two candidate values count as a tie.
const TIE_TOLERANCE: f64 = 1e-13;

/// Picks the candidate with the lowest value, ties toward the smallest `|α|`.
fn select(candidates: &[f64], value: impl Fn(f64) -> f64) -> Option<StepChoice> {
    let mut best: Option<StepChoice> = None;
    for &alpha in candidates {
        let v = value(alpha);
        if !v.is_finite() {
            continue;
        }
        best = match best {
            None => Some(StepChoice { alpha, value: v, stagnation: false }),
            Some(b) => {
                let tol = TIE_TOLERANCE * b.value.abs().max(v.abs());
                if v < b.value - tol || (v <= b.value + tol && alpha.abs() < b.alpha.abs()) {
                    Some(StepChoice { alpha, value: v, stagnation: false })
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

impl LineSearchPolynomial {
    pub fn eval(&self, alpha: f64) -> f64 {
        let r = &self.r;
        r[0] + alpha * (r[1] + alpha * (r[2] + alpha * (r[3] + alpha * r[4])))
    }

    /// Global minimizer over real `α`.
    pub fn minimize(&self) -> Result<StepChoice> {
        let [r0, r1, r2, r3, r4] = self.r;
        if self.r.iter().any(|c| !c.is_finite()) {
            return Err(Error::Divergence(format!("non-finite line-search coefficients {:?}", self.r)));
        }
        let flat = StepChoice { alpha: 0.0, value: r0, stagnation: true };
        if r4 == 0.0 && r3 == 0.0 {
            if r2 == 0.0 {
                return Ok(flat);
            }
            if r2 < 0.0 {
                return Err(Error::Divergence(format!("line-search quadratic is concave (R2 = {r2})")));
            }
            let alpha = -r1 / (2.0 * r2);
            return Ok(StepChoice { alpha, value: self.eval(alpha), stagnation: false });
        }
        if r4 < 0.0 || (r4 == 0.0 && r3 != 0.0) {
            return Err(Error::Divergence(format!("line-search polynomial is unbounded below {:?}", self.r)));
        }
        let roots = cubic_real_roots(4.0 * r4, 3.0 * r3, 2.0 * r2, r1)?;
        select(&roots, |a| self.eval(a))
            .ok_or_else(|| Error::Divergence("line search found no finite stationary point".into()))
    }
}

/// Coefficients of `F(x + α p_x, W + α P)` for a fixed λ, together with the
/// direction images (two operator applications per active current block).
pub fn line_search_polynomial(
    it: &Iterate,
    dir: &SearchDirection,
    ops: &dyn FieldOperators,
    data: &MeasurementSet,
    lambda: f64,
    params: &CriterionParams,
) -> (LineSearchPolynomial, DirectionImages) {
    let images = DirectionImages::compute(dir, ops);
    let n = it.x.len();
    let zero = C64::new(0.0, 0.0);
    let mut r = [0.0; 5];
    for i in 0..it.num_illuminations() {
        let r1 = it.observation_residual(data, i);
        let r2 = it.coupling_residual(ops, i);
        let e = it.total_field(ops, i);
        r[0] += linalg::norm_sq(&r1) + lambda * linalg::norm_sq(&r2);
        if let Some(op) = &images.observed[i] {
            r[1] -= 2.0 * linalg::re_dot(&r1, op);
            r[2] += linalg::norm_sq(op);
        }
        let pw = dir.w[i].as_deref();
        let gp = images.coupled[i].as_deref();
        let mut q2 = vec![zero; n];
        let mut s2 = vec![zero; n];
        for k in 0..n {
            let mut q = zero;
            if let Some(px) = &dir.x {
                q += px[k] * e[k];
            }
            if let (Some(pw), Some(gp)) = (pw, gp) {
                q += it.x[k] * gp[k] - pw[k];
                if let Some(px) = &dir.x {
                    s2[k] = px[k] * gp[k];
                }
            }
            q2[k] = q;
        }
        r[1] += 2.0 * lambda * linalg::re_dot(&r2, &q2);
        r[2] += lambda * (2.0 * linalg::re_dot(&r2, &s2) + linalg::norm_sq(&q2));
        r[3] += 2.0 * lambda * linalg::re_dot(&q2, &s2);
        r[4] += lambda * linalg::norm_sq(&s2);
    }
    if params.lambda_reg > 0.0 {
        let rr = params.diff.apply(&it.x);
        r[0] += params.lambda_reg * linalg::norm_sq(&rr);
        if let Some(px) = &dir.x {
            let dp = params.diff.apply(px);
            r[1] += 2.0 * params.lambda_reg * linalg::re_dot(&rr, &dp);
            r[2] += params.lambda_reg * linalg::norm_sq(&dp);
        }
    }
    (LineSearchPolynomial { r }, images)
}

/// Exact step along `dir` for a fixed λ.
pub fn line_search_quartic(
    it: &Iterate,
    dir: &SearchDirection,
    ops: &dyn FieldOperators,
    data: &MeasurementSet,
    lambda: f64,
    params: &CriterionParams,
) -> Result<(StepChoice, DirectionImages)> {
    let (poly, images) = line_search_polynomial(it, dir, ops, data, lambda, params);
    Ok((poly.minimize()?, images))
}

/// `F(x + α p)` along a contrast-only direction with `λ = λ_CSI(x + α p)`.
///
/// With `W` fixed, `F1` is constant, `F2(α)`, `Fr(α)` and
/// `S(α) = Σ‖(X + αP)E⁰_i‖²` are quadratics, and
/// `F(α) = F1 + ‖y‖² F2(α)/S(α) + λ_r Fr(α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSlice {
    pub f1: f64,
    pub data_energy: f64,
    pub lambda_reg: f64,
    pub f2: [f64; 3],
    pub s: [f64; 3],
    pub reg: [f64; 3],
}

fn quad_eval(c: &[f64; 3], a: f64) -> f64 {
    c[0] + a * (c[1] + a * c[2])
}

impl AdaptiveSlice {
    /// No operator applications: only the cached products are used.
    pub fn new(
        it: &Iterate,
        p: &[C64],
        ops: &dyn FieldOperators,
        data: &MeasurementSet,
        params: &CriterionParams,
    ) -> Self {
        let n = it.x.len();
        let mut f1 = 0.0;
        let mut f2 = [0.0; 3];
        for i in 0..it.num_illuminations() {
            f1 += linalg::norm_sq(&it.observation_residual(data, i));
            let r2 = it.coupling_residual(ops, i);
            let e = it.total_field(ops, i);
            let q2: Vec<C64> = (0..n).map(|k| p[k] * e[k]).collect();
            f2[0] += linalg::norm_sq(&r2);
            f2[1] += 2.0 * linalg::re_dot(&r2, &q2);
            f2[2] += linalg::norm_sq(&q2);
        }
        let energy = incident_energy(ops);
        let mut s = [0.0; 3];
        for k in 0..n {
            s[0] += energy[k] * it.x[k].norm_sqr();
            s[1] += 2.0 * energy[k] * (it.x[k].conj() * p[k]).re;
            s[2] += energy[k] * p[k].norm_sqr();
        }
        let rr = params.diff.apply(&it.x);
        let dp = params.diff.apply(p);
        let reg = [linalg::norm_sq(&rr), 2.0 * linalg::re_dot(&rr, &dp), linalg::norm_sq(&dp)];
        Self { f1, data_energy: data.energy(), lambda_reg: params.lambda_reg, f2, s, reg }
    }

    /// `F(α)`; infinite where `S(α)` vanishes.
    pub fn eval(&self, alpha: f64) -> f64 {
        let s = quad_eval(&self.s, alpha);
        if !(s > 0.0) {
            return f64::INFINITY;
        }
        self.f1 + self.data_energy * quad_eval(&self.f2, alpha) / s + self.lambda_reg * quad_eval(&self.reg, alpha)
    }

    /// Global minimizer: real roots of the numerator of `F'(α)`,
    /// `‖y‖²(F2'S − F2 S') + λ_r Fr' S²` (degree ≤ 5).
    pub fn minimize(&self) -> Result<StepChoice> {
        let f0 = self.eval(0.0);
        let [a0, a1, a2] = self.f2;
        let [d0, d1, d2] = self.s;
        // F2'S − F2S'; the cubic terms cancel.
        let mut num = [
            a1 * d0 - a0 * d1,
            2.0 * (a2 * d0 - a0 * d2),
            a2 * d1 - a1 * d2,
            0.0,
            0.0,
            0.0,
        ];
        num.iter_mut().for_each(|c| *c *= self.data_energy);
        if self.lambda_reg > 0.0 {
            let fr = [self.reg[1], 2.0 * self.reg[2]];
            let s2 = [d0 * d0, 2.0 * d0 * d1, d1 * d1 + 2.0 * d0 * d2, 2.0 * d1 * d2, d2 * d2];
            for (j, sj) in s2.iter().enumerate() {
                num[j] += self.lambda_reg * fr[0] * sj;
                num[j + 1] += self.lambda_reg * fr[1] * sj;
            }
        }
        if num.iter().any(|c| !c.is_finite()) {
            return Err(Error::Divergence("non-finite adaptive line-search coefficients".into()));
        }
        let scale = num.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if scale == 0.0 {
            return Ok(StepChoice { alpha: 0.0, value: f0, stagnation: true });
        }
        let roots = polynomial_real_roots(&num)?;
        match select(&roots, |a| self.eval(a)) {
            Some(best) if best.value <= f0 => Ok(best),
            _ => Ok(StepChoice { alpha: 0.0, value: f0, stagnation: true }),
        }
    }
}
