//! Analytic scattering by a homogeneous circular cylinder (TM, line source).

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::special;

/// Scattered field of a cylinder of radius `radius` and real contrast
/// `contrast` centered at the origin, illuminated by the line source
/// `H0⁽²⁾(k |r − source|)`, observed at `points` outside the cylinder.
pub fn cylinder_scattered_field(
    k: f64,
    contrast: f64,
    radius: f64,
    source: [f64; 2],
    points: &[[f64; 2]],
) -> Result<Vec<C64>> {
    if !(contrast > -1.0) {
        return Err(Error::config(format!("cylinder contrast must exceed -1, got {contrast}")));
    }
    let k1 = k * (1.0 + contrast).sqrt();
    let rs = source[0].hypot(source[1]);
    let phis = source[1].atan2(source[0]);
    if rs <= radius || points.iter().any(|p| p[0].hypot(p[1]) <= radius) {
        return Err(Error::config("source and observation points must lie outside the cylinder"));
    }
    let ka = k * radius;
    let k1a = k1 * radius;
    let order = (k1a.max(ka) + 4.0 * k1a.max(ka).cbrt() + 12.0).ceil() as i32;

    let mut coeffs = Vec::with_capacity(2 * order as usize + 1);
    for n in -order..=order {
        let jn0 = special::jn_signed(n, ka);
        let jn0p = special::jn_prime(n, ka);
        let jn1 = special::jn_signed(n, k1a);
        let jn1p = special::jn_prime(n, k1a);
        let hn0 = special::hankel2_signed(n, ka);
        let hn0p = special::hankel2_prime(n, ka);
        let num = k * jn0p * jn1 - k1 * jn0 * jn1p;
        let den = hn0p * (k * jn1) - hn0 * (k1 * jn1p);
        coeffs.push((n, -num / den * special::hankel2_signed(n, k * rs)));
    }

    Ok(points
        .iter()
        .map(|p| {
            let r = p[0].hypot(p[1]);
            let phi = p[1].atan2(p[0]);
            coeffs
                .iter()
                .map(|&(n, c)| {
                    let angle = n as f64 * (phi - phis);
                    c * special::hankel2_signed(n, k * r) * C64::new(angle.cos(), angle.sin())
                })
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishes_without_contrast() {
        let f = cylinder_scattered_field(60.0, 0.0, 0.02, [0.1, 0.0], &[[0.0, 0.1], [-0.1, 0.0]]).unwrap();
        assert!(f.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn reciprocity_between_source_and_receiver() {
        let k = 62.8;
        let a = [0.1, 0.02];
        let b = [-0.03, 0.095];
        let ab = cylinder_scattered_field(k, 0.7, 0.03, a, &[b]).unwrap()[0];
        let ba = cylinder_scattered_field(k, 0.7, 0.03, b, &[a]).unwrap()[0];
        assert!((ab - ba).norm() <= 1e-12 * ab.norm());
    }

    #[test]
    fn weak_cylinder_matches_born_integral() {
        // First Born approximation: k²χ ∫ g(r − r') E⁰(r') dr' over the disc, g = -(j/4) H0⁽²⁾.
        let k = 20.0;
        let chi = 1e-4;
        let a = 0.05;
        let src = [0.3, 0.0];
        let obs = [-0.1, 0.25];
        let mie = cylinder_scattered_field(k, chi, a, src, &[obs]).unwrap()[0];
        let nr = 200;
        let nt = 256;
        let mut born = C64::new(0.0, 0.0);
        for ir in 0..nr {
            let r = (ir as f64 + 0.5) * a / nr as f64;
            for it in 0..nt {
                let t = 2.0 * std::f64::consts::PI * it as f64 / nt as f64;
                let p = [r * t.cos(), r * t.sin()];
                let e0 = special::hankel2(0, k * (p[0] - src[0]).hypot(p[1] - src[1]));
                let g = special::hankel2(0, k * (p[0] - obs[0]).hypot(p[1] - obs[1]));
                born += C64::new(0.0, -0.25) * g * e0 * r;
            }
        }
        born *= k * k * chi * (a / nr as f64) * (2.0 * std::f64::consts::PI / nt as f64);
        assert!((mie - born).norm() <= 2e-3 * born.norm(), "{mie} vs {born}");
    }
}
