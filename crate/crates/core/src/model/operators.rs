use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, C64, J};
use crate::model::setup::{GridGeometry, ImagingSetup};
use crate::special;

/// Linear operators of the frozen scattering model.
///
/// Every method that multiplies by `G_O`, `G_D` or an adjoint counts as one
/// operator application; the diagonal helpers are precomputed and free.
pub trait FieldOperators: Sync {
    fn num_cells(&self) -> usize;
    fn num_receivers(&self) -> usize;
    fn num_illuminations(&self) -> usize;
    /// Incident field `E⁰_i` at the cell centers.
    fn incident(&self, i: usize) -> &[C64];
    /// `G_O w`
    fn observe(&self, w: &[C64]) -> Vec<C64>;
    /// `G_O† r`
    fn observe_adjoint(&self, r: &[C64]) -> Vec<C64>;
    /// `G_D w`
    fn couple(&self, w: &[C64]) -> Vec<C64>;
    /// `G_D† v`
    fn couple_adjoint(&self, v: &[C64]) -> Vec<C64>;
    /// `diag(G_O† G_O)`
    fn observation_gram_diagonal(&self) -> Vec<f64>;
    /// `diag(G_D)`
    fn coupling_diagonal(&self) -> Vec<C64>;
    /// `(|G_D|²)ᵀ u`, entrywise squared moduli. Counts as one application.
    fn coupling_abs_sq_apply(&self, u: &[f64]) -> Vec<f64>;
}

/// Dense Green matrices and incident fields of one imaging setup.
#[derive(Debug, Clone)]
pub struct ScatteringOperators {
    pub g_o: DenseMatrix,
    pub g_d: DenseMatrix,
    pub incident_fields: Vec<Vec<C64>>,
    pub background_wavenumber: f64,
    gram_diag: Vec<f64>,
    coupling_diag: Vec<C64>,
}

/// Off-diagonal weight `-(jπ k a / 2) J1(k a)` of the equivalent-circle rule.
fn offdiag_weight(k: f64, a: f64) -> C64 {
    -J * (0.5 * PI * k * a * special::j1(k * a))
}

/// Self term `-(j/2)(π k a H1⁽²⁾(k a) − 2j)`.
fn self_term(k: f64, a: f64) -> C64 {
    -0.5 * J * (PI * k * a * special::hankel2(1, k * a) - 2.0 * J)
}

fn distance(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

impl ScatteringOperators {
    /// Method-of-moments operators for arbitrary cells of equal area.
    ///
    /// Uses the 2-D Green function `-(j/4) H0⁽²⁾(k ρ)` (time factor
    /// `e^{+jωt}`) integrated over the disc of radius `equivalent_radius`.
    pub fn from_cells(
        k: f64,
        cells: &[[f64; 2]],
        equivalent_radius: f64,
        emitters: &[[f64; 2]],
        receivers: &[[f64; 2]],
    ) -> Self {
        let n = cells.len();
        let a = equivalent_radius;
        let weight = offdiag_weight(k, a);
        let diag = self_term(k, a);
        let mut gd = vec![C64::new(0.0, 0.0); n * n];
        for m in 0..n {
            gd[m * n + m] = diag;
            for c in (m + 1)..n {
                let v = weight * special::hankel2(0, k * distance(cells[m], cells[c]));
                gd[m * n + c] = v;
                gd[c * n + m] = v;
            }
        }
        let g_d = DenseMatrix::from_row_major(n, n, gd);
        let g_o = DenseMatrix::from_fn(receivers.len(), n, |r, c| {
            weight * special::hankel2(0, k * distance(receivers[r], cells[c]))
        });
        let incident_fields = emitters
            .iter()
            .map(|&s| cells.iter().map(|&c| special::hankel2(0, k * distance(c, s))).collect())
            .collect();
        let gram_diag = g_o.column_norms_sq();
        let coupling_diag = g_d.diagonal();
        Self {
            g_o,
            g_d,
            incident_fields,
            background_wavenumber: k,
            gram_diag,
            coupling_diag,
        }
    }
}

/// Builds `G_O`, `G_D` and the incident fields for `setup` on `grid`.
pub fn build_operators(setup: &ImagingSetup, grid: &GridGeometry) -> Result<ScatteringOperators> {
    setup.validate()?;
    if grid.num_cells() != setup.num_cells() {
        return Err(Error::config(format!(
            "grid has {} cells, setup expects {}",
            grid.num_cells(),
            setup.num_cells()
        )));
    }
    let half = 0.5 * setup.domain_side;
    let inside = |p: &[f64; 2]| p[0].abs() <= half && p[1].abs() <= half;
    if setup.emitter_positions().iter().any(inside) {
        return Err(Error::config("emitter inside the imaging domain"));
    }
    if setup.receiver_positions().iter().any(inside) {
        return Err(Error::config("receiver inside the imaging domain"));
    }
    Ok(ScatteringOperators::from_cells(
        setup.background_wavenumber(),
        &grid.cell_centers,
        grid.equivalent_radius,
        &setup.emitter_positions(),
        &setup.receiver_positions(),
    ))
}

impl FieldOperators for ScatteringOperators {
    fn num_cells(&self) -> usize {
        self.g_d.rows()
    }
    fn num_receivers(&self) -> usize {
        self.g_o.rows()
    }
    fn num_illuminations(&self) -> usize {
        self.incident_fields.len()
    }
    fn incident(&self, i: usize) -> &[C64] {
        &self.incident_fields[i]
    }
    fn observe(&self, w: &[C64]) -> Vec<C64> {
        self.g_o.apply(w)
    }
    fn observe_adjoint(&self, r: &[C64]) -> Vec<C64> {
        self.g_o.apply_adjoint(r)
    }
    fn couple(&self, w: &[C64]) -> Vec<C64> {
        self.g_d.apply(w)
    }
    fn couple_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.g_d.apply_adjoint(v)
    }
    fn observation_gram_diagonal(&self) -> Vec<f64> {
        self.gram_diag.clone()
    }
    fn coupling_diagonal(&self) -> Vec<C64> {
        self.coupling_diag.clone()
    }
    fn coupling_abs_sq_apply(&self, u: &[f64]) -> Vec<f64> {
        self.g_d.abs_sq_transpose_apply(u)
    }
}

/// Counts operator applications of the wrapped operators.
pub struct CountingOperators<'a> {
    inner: &'a dyn FieldOperators,
    count: AtomicU64,
}

impl<'a> CountingOperators<'a> {
    pub fn new(inner: &'a dyn FieldOperators) -> Self {
        Self { inner, count: AtomicU64::new(0) }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    fn tick(&self) {
        self.count.fetch_add(1, Ordering::Relaxed);
    }
}

impl FieldOperators for CountingOperators<'_> {
    fn num_cells(&self) -> usize {
        self.inner.num_cells()
    }
    fn num_receivers(&self) -> usize {
        self.inner.num_receivers()
    }
    fn num_illuminations(&self) -> usize {
        self.inner.num_illuminations()
    }
    fn incident(&self, i: usize) -> &[C64] {
        self.inner.incident(i)
    }
    fn observe(&self, w: &[C64]) -> Vec<C64> {
        self.tick();
        self.inner.observe(w)
    }
    fn observe_adjoint(&self, r: &[C64]) -> Vec<C64> {
        self.tick();
        self.inner.observe_adjoint(r)
    }
    fn couple(&self, w: &[C64]) -> Vec<C64> {
        self.tick();
        self.inner.couple(w)
    }
    fn couple_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.tick();
        self.inner.couple_adjoint(v)
    }
    fn observation_gram_diagonal(&self) -> Vec<f64> {
        self.inner.observation_gram_diagonal()
    }
    fn coupling_diagonal(&self) -> Vec<C64> {
        self.inner.coupling_diagonal()
    }
    fn coupling_abs_sq_apply(&self, u: &[f64]) -> Vec<f64> {
        self.tick();
        self.inner.coupling_abs_sq_apply(u)
    }
}

/// The same model expressed in rescaled current units `w = c·w'`.
///
/// Observations are unchanged when `G_O' = c·G_O`, `E⁰' = E⁰/c` and the
/// coupling weight becomes `λ' = c²·λ` (see [`CurrentScaling::lambda_factor`]).
pub struct CurrentScaling<'a> {
    inner: &'a dyn FieldOperators,
    factor: f64,
    incident: Vec<Vec<C64>>,
}

impl<'a> CurrentScaling<'a> {
    pub fn new(inner: &'a dyn FieldOperators, factor: f64) -> Self {
        let incident = (0..inner.num_illuminations())
            .map(|i| inner.incident(i).iter().map(|e| e / factor).collect())
            .collect();
        Self { inner, factor, incident }
    }

    /// Multiplier to apply to a fixed coupling weight λ.
    pub fn lambda_factor(&self) -> f64 {
        self.factor * self.factor
    }
}

impl FieldOperators for CurrentScaling<'_> {
    fn num_cells(&self) -> usize {
        self.inner.num_cells()
    }
    fn num_receivers(&self) -> usize {
        self.inner.num_receivers()
    }
    fn num_illuminations(&self) -> usize {
        self.inner.num_illuminations()
    }
    fn incident(&self, i: usize) -> &[C64] {
        &self.incident[i]
    }
    fn observe(&self, w: &[C64]) -> Vec<C64> {
        let mut v = self.inner.observe(w);
        v.iter_mut().for_each(|z| *z *= self.factor);
        v
    }
    fn observe_adjoint(&self, r: &[C64]) -> Vec<C64> {
        let mut v = self.inner.observe_adjoint(r);
        v.iter_mut().for_each(|z| *z *= self.factor);
        v
    }
    fn couple(&self, w: &[C64]) -> Vec<C64> {
        self.inner.couple(w)
    }
    fn couple_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.inner.couple_adjoint(v)
    }
    fn observation_gram_diagonal(&self) -> Vec<f64> {
        let c2 = self.factor * self.factor;
        self.inner.observation_gram_diagonal().into_iter().map(|d| d * c2).collect()
    }
    fn coupling_diagonal(&self) -> Vec<C64> {
        self.inner.coupling_diagonal()
    }
    fn coupling_abs_sq_apply(&self, u: &[f64]) -> Vec<f64> {
        self.inner.coupling_abs_sq_apply(u)
    }
}

/// `E⁰_i + G_D w_i`.
pub fn total_field(ops: &dyn FieldOperators, w: &[C64], i: usize) -> Vec<C64> {
    let mut e = ops.couple(w);
    for (z, e0) in e.iter_mut().zip(ops.incident(i)) {
        *z += e0;
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::setup::build_grid;

    /// Green function `-(j/4) H0⁽²⁾(kρ)` times `k²`.
    fn kernel(k: f64, rho: f64) -> C64 {
        -0.25 * J * k * k * special::hankel2(0, k * rho)
    }

    /// Gauss-Legendre nodes and weights on [-1, 1] by Newton on P_n.
    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-15 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    }

    /// Integral of `k² g` over the square cell of side `h` centered on the
    /// origin, observed at `obs`. Self cells are split into polar sectors
    /// around the singularity.
    fn cell_quadrature(k: f64, h: f64, obs: [f64; 2]) -> C64 {
        let gl = gauss_legendre(48);
        let half = 0.5 * h;
        if obs[0].abs() < 1e-12 && obs[1].abs() < 1e-12 {
            // Polar integration over the square: 8 triangles, radial bound h/2 / cos.
            let mut sum = C64::new(0.0, 0.0);
            for s in 0..8 {
                let t0 = -PI / 4.0 + s as f64 * PI / 4.0;
                for &(u, wu) in &gl {
                    let theta = t0 + PI / 8.0 * (u + 1.0);
                    let rel = theta - (PI / 2.0) * ((theta + PI / 4.0) / (PI / 2.0)).floor();
                    let rmax = half / rel.cos();
                    for &(v, wv) in &gl {
                        let r = 0.5 * rmax * (v + 1.0);
                        sum += kernel(k, r) * r * (PI / 8.0 * wu) * (0.5 * rmax * wv);
                    }
                }
            }
            sum
        } else {
            let mut sum = C64::new(0.0, 0.0);
            for &(u, wu) in &gl {
                for &(v, wv) in &gl {
                    let p = [half * u, half * v];
                    sum += kernel(k, distance(p, obs)) * (half * wu) * (half * wv);
                }
            }
            sum
        }
    }

    /// Integral of `k² g` over the disc of radius `a` centered on the origin,
    /// observed at `obs`, in polar coordinates around the disc center.
    fn disc_quadrature(k: f64, a: f64, obs: [f64; 2]) -> C64 {
        let gl = gauss_legendre(64);
        let mut sum = C64::new(0.0, 0.0);
        if obs[0].hypot(obs[1]) < 1e-12 {
            for &(v, wv) in &gl {
                let r = 0.5 * a * (v + 1.0);
                sum += kernel(k, r) * r * (0.5 * a * wv) * (2.0 * PI);
            }
            return sum;
        }
        for &(u, wu) in &gl {
            let t = PI * (u + 1.0);
            for &(v, wv) in &gl {
                let r = 0.5 * a * (v + 1.0);
                let p = [r * t.cos(), r * t.sin()];
                sum += kernel(k, distance(p, obs)) * r * (PI * wu) * (0.5 * a * wv);
            }
        }
        sum
    }

    fn single_cell(k: f64, h: f64) -> ScatteringOperators {
        ScatteringOperators::from_cells(k, &[[0.0, 0.0]], h / PI.sqrt(), &[[1.0, 0.0]], &[[1.0, 0.0]])
    }

    #[test]
    fn self_term_matches_equivalent_disc_quadrature() {
        let k = ImagingSetup::wavelength_square(32, 1, 1).background_wavenumber();
        let lambda = 2.0 * PI / k;
        for side in [8.0, 20.0, 32.0, 64.0] {
            let h = lambda / side;
            let got = single_cell(k, h).g_d.get(0, 0);
            let want = disc_quadrature(k, h / PI.sqrt(), [0.0, 0.0]);
            assert!((got - want).norm() <= 1e-7 * want.norm(), "h = λ/{side}: {got} vs {want}");
        }
    }

    #[test]
    fn self_term_approximates_square_cell() {
        // The disc of equal area only approximates the square cell. Both
        // integrals scale like h², so the relative gap stays near 3.5e-3.
        let k = ImagingSetup::wavelength_square(32, 1, 1).background_wavenumber();
        let lambda = 2.0 * PI / k;
        for side in [20.0, 32.0, 64.0] {
            let h = lambda / side;
            let got = single_cell(k, h).g_d.get(0, 0);
            let want = cell_quadrature(k, h, [0.0, 0.0]);
            assert!((got - want).norm() <= 5e-3 * want.norm(), "h = λ/{side}: {got} vs {want}");
        }
    }

    #[test]
    fn offdiagonal_matches_quadrature() {
        let k = ImagingSetup::wavelength_square(32, 1, 1).background_wavenumber();
        let h = 2.0 * PI / k / 32.0;
        let a = h / PI.sqrt();
        for rho in [h, 2.0 * h, 5.0 * h, 20.0 * h] {
            let cells = [[0.0, 0.0], [rho, 0.0]];
            let ops = ScatteringOperators::from_cells(k, &cells, a, &[[1.0, 1.0]], &[[1.0, 1.0]]);
            let got = ops.g_d.get(1, 0);
            let disc = disc_quadrature(k, a, [rho, 0.0]);
            assert!((got - disc).norm() <= 1e-9 * disc.norm(), "rho = {rho}: {got} vs {disc}");
            let square = cell_quadrature(k, h, [rho, 0.0]);
            let tol = if rho <= h { 1e-2 } else { 1e-3 };
            assert!((got - square).norm() <= tol * square.norm(), "rho = {rho}: {got} vs {square}");
        }
    }

    #[test]
    fn coupling_matrix_is_symmetric() {
        let setup = ImagingSetup::wavelength_square(12, 4, 6);
        let ops = build_operators(&setup, &build_grid(&setup).unwrap()).unwrap();
        let n = ops.num_cells();
        let mut worst: f64 = 0.0;
        for m in 0..n {
            for c in 0..n {
                worst = worst.max((ops.g_d.get(m, c) - ops.g_d.get(c, m)).norm());
            }
        }
        assert!(worst <= 1e-12 * ops.g_d.max_abs());
        assert_eq!(ops.num_receivers(), 6);
        assert_eq!(ops.num_illuminations(), 4);
        for i in 0..4 {
            assert!(ops.incident(i).iter().all(|e| e.norm() > 0.0));
        }
    }

    #[test]
    fn total_field_matches_naive_product() {
        let setup = ImagingSetup::wavelength_square(6, 2, 3);
        let ops = build_operators(&setup, &build_grid(&setup).unwrap()).unwrap();
        let n = ops.num_cells();
        let w: Vec<C64> = (0..n).map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.91).cos())).collect();
        let got = total_field(&ops, &w, 1);
        for m in 0..n {
            let mut want = ops.incident(1)[m];
            for c in 0..n {
                want += ops.g_d.get(m, c) * w[c];
            }
            assert!((got[m] - want).norm() <= 1e-12 * want.norm().max(1.0));
        }
        assert_eq!(total_field(&ops, &vec![C64::new(0.0, 0.0); n], 0), ops.incident(0));
    }

    #[test]
    fn counting_and_scaling_decorators() {
        let setup = ImagingSetup::wavelength_square(4, 2, 3);
        let ops = build_operators(&setup, &build_grid(&setup).unwrap()).unwrap();
        let counted = CountingOperators::new(&ops);
        let w = vec![C64::new(1.0, -0.5); 16];
        let _ = counted.observe(&w);
        let _ = counted.couple_adjoint(&w);
        let _ = counted.observation_gram_diagonal();
        assert_eq!(counted.count(), 2);

        let scaled = CurrentScaling::new(&ops, 0.1);
        let y = ops.observe(&w);
        let w_scaled: Vec<C64> = w.iter().map(|z| z / 0.1).collect();
        let y2 = scaled.observe(&w_scaled);
        for (a, b) in y.iter().zip(&y2) {
            assert!((a - b).norm() <= 1e-13 * a.norm());
        }
        assert!((scaled.lambda_factor() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn antennas_inside_domain_are_rejected() {
        let setup = ImagingSetup::wavelength_square(4, 2, 3);
        let grid = build_grid(&setup).unwrap();
        let mut bad = setup.clone();
        bad.ring_radius = 0.6 * setup.domain_side;
        assert!(build_operators(&bad, &grid).is_err());
    }
}
