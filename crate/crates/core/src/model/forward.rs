use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, LuSolver, C64};
use crate::model::operators::{FieldOperators, ScatteringOperators};

/// Complex contrast per cell, row-major with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastImage {
    pub values: Vec<C64>,
}

impl ContrastImage {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Side of the square grid, if `len` is a perfect square.
    pub fn grid_side(&self) -> Option<usize> {
        let s = (self.values.len() as f64).sqrt().round() as usize;
        (s * s == self.values.len()).then_some(s)
    }
}

/// One contrast-source vector per illumination.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentSet {
    pub currents: Vec<Vec<C64>>,
}

impl CurrentSet {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self { currents: vec![vec![C64::new(0.0, 0.0); n]; m] }
    }
}

/// Scattered field at the receivers, one block per illumination.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub data: Vec<Vec<C64>>,
    pub frequency: f64,
    /// `f64::INFINITY` for noiseless data.
    pub snr_db: f64,
    pub seed: Option<u64>,
}

impl MeasurementSet {
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|y| linalg::norm_sq(y)).sum()
    }
}

/// Solves `(I − X G_D) w_i = X E⁰_i` for every illumination by dense LU.
pub fn forward_solve(
    x: &ContrastImage,
    ops: &ScatteringOperators,
    frequency: f64,
) -> Result<(CurrentSet, MeasurementSet)> {
    let n = ops.num_cells();
    if x.len() != n {
        return Err(Error::config(format!("contrast has {} cells, operators {}", x.len(), n)));
    }
    let m = ops.num_illuminations();
    let currents: Vec<Vec<C64>> = if linalg::is_all_zero(&x.values) {
        vec![vec![C64::new(0.0, 0.0); n]; m]
    } else {
        let xv = &x.values;
        let system = DMatrix::from_fn(n, n, |r, c| {
            let id = if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            id - xv[r] * ops.g_d.get(r, c)
        });
        let lu = LuSolver::new(system)?;
        (0..m)
            .into_par_iter()
            .map(|i| {
                let rhs = linalg::hadamard(xv, ops.incident(i));
                let w = lu.solve(&rhs)?;
                check_coupling_residual(xv, &w, ops, i)?;
                Ok(w)
            })
            .collect::<Result<_>>()?
    };
    let data = currents.iter().map(|w| ops.observe(w)).collect();
    Ok((
        CurrentSet { currents },
        MeasurementSet { data, frequency, snr_db: f64::INFINITY, seed: None },
    ))
}

fn check_coupling_residual(x: &[C64], w: &[C64], ops: &ScatteringOperators, i: usize) -> Result<()> {
    let scale = linalg::norm(w);
    if scale == 0.0 {
        return Ok(());
    }
    let r = coupling_residual(x, w, ops, i);
    if !(r <= 1e-8 * scale) {
        return Err(Error::SingularSystem { condition: r / scale });
    }
    Ok(())
}

/// `‖X(E⁰_i + G_D w) − w‖`
pub fn coupling_residual(x: &[C64], w: &[C64], ops: &dyn FieldOperators, i: usize) -> f64 {
    let e = crate::model::operators::total_field(ops, w, i);
    x.iter()
        .zip(&e)
        .zip(w)
        .map(|((xk, ek), wk)| (xk * ek - wk).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Adds circular complex white Gaussian noise at a global SNR.
///
/// The per-sample variance is `Σ‖y_i‖² / (M N 10^{snr/10})`. An infinite SNR
/// returns the input unchanged.
pub fn add_noise(m: &MeasurementSet, snr_db: f64, seed: u64) -> MeasurementSet {
    if snr_db == f64::INFINITY {
        return m.clone();
    }
    let samples: usize = m.data.iter().map(|y| y.len()).sum();
    let variance = m.energy() / (samples as f64 * 10f64.powf(snr_db / 10.0));
    let sigma = (0.5 * variance).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = m
        .data
        .iter()
        .map(|y| {
            y.iter()
                .map(|v| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    v + C64::new(sigma * re, sigma * im)
                })
                .collect()
        })
        .collect();
    MeasurementSet { data, frequency: m.frequency, snr_db, seed: Some(seed) }
}
