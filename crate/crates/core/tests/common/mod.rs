#![allow(dead_code)]

use mwt_core::criterion::{eval_criterion, CriterionParams};
use mwt_core::linalg::C64;
use mwt_core::model::{ContrastImage, CurrentSet, ImagingSetup, Instance, PhantomKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) * scale
        })
        .collect()
}

/// Small noisy small-square instance.
pub fn small_instance(side: usize, antennas: usize, seed: u64) -> Instance {
    let mut setup = ImagingSetup::wavelength_square(side, antennas, antennas);
    setup.seed = seed;
    Instance::synthetic(setup, PhantomKind::SmallSquare, 20.0).unwrap()
}

/// Random point with contrast of order one and currents at the scale of the true ones.
pub fn random_point(inst: &Instance, rng: &mut ChaCha8Rng) -> (ContrastImage, CurrentSet) {
    let n = inst.ops.g_d.rows();
    let w_scale = inst
        .true_currents
        .currents
        .iter()
        .map(|w| mwt_core::linalg::norm(w))
        .fold(0.0, f64::max)
        / (n as f64).sqrt();
    let x = ContrastImage { values: random_vec(rng, n, 0.5) };
    let w = CurrentSet {
        currents: (0..inst.true_currents.currents.len()).map(|_| random_vec(rng, n, w_scale)).collect(),
    };
    (x, w)
}

pub fn total(inst: &Instance, x: &ContrastImage, w: &CurrentSet, params: &CriterionParams) -> f64 {
    eval_criterion(x, w, &inst.ops, &inst.data, params).unwrap().total
}

/// Central differences of `F` along the real and imaginary part of every
/// x-entry, assembled as `∂F/∂Re + j ∂F/∂Im`.
pub fn fd_grad_x(inst: &Instance, x: &ContrastImage, w: &CurrentSet, params: &CriterionParams, h: f64) -> Vec<C64> {
    (0..x.len())
        .map(|k| {
            let mut d = [0.0; 2];
            for (part, dir) in [C64::new(h, 0.0), C64::new(0.0, h)].into_iter().enumerate() {
                let mut xp = x.clone();
                xp.values[k] += dir;
                let mut xm = x.clone();
                xm.values[k] -= dir;
                d[part] = (total(inst, &xp, w, params) - total(inst, &xm, w, params)) / (2.0 * h);
            }
            C64::new(d[0], d[1])
        })
        .collect()
}

pub fn fd_grad_w(
    inst: &Instance,
    i: usize,
    x: &ContrastImage,
    w: &CurrentSet,
    params: &CriterionParams,
    h: f64,
) -> Vec<C64> {
    (0..x.len())
        .map(|k| {
            let mut d = [0.0; 2];
            for (part, dir) in [C64::new(h, 0.0), C64::new(0.0, h)].into_iter().enumerate() {
                let mut wp = w.clone();
                wp.currents[i][k] += dir;
                let mut wm = w.clone();
                wm.currents[i][k] -= dir;
                d[part] = (total(inst, x, &wp, params) - total(inst, x, &wm, params)) / (2.0 * h);
            }
            C64::new(d[0], d[1])
        })
        .collect()
}

pub fn rel_err(got: &[C64], want: &[C64]) -> f64 {
    let diff: f64 = got.iter().zip(want).map(|(a, b)| (a - b).norm_sqr()).sum();
    let norm: f64 = want.iter().map(|b| b.norm_sqr()).sum();
    (diff / norm).sqrt()
}
