use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Real roots of `c3 α³ + c2 α² + c1 α + c0`, ascending.
///
/// Cardano's formula with the trigonometric form when all three roots are
/// real, then Newton polishing. Leading zeros fall through to the quadratic
/// and linear cases.
pub fn cubic_real_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Result<Vec<f64>> {
    let coeffs = [c0, c1, c2, c3];
    if coeffs.iter().all(|&c| c == 0.0) {
        return Err(Error::config("polynomial is identically zero"));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Divergence("non-finite polynomial coefficient".into()));
    }
    let mut roots = if c3 != 0.0 {
        cardano(c2 / c3, c1 / c3, c0 / c3)
    } else if c2 != 0.0 {
        quadratic(c2, c1, c0)
    } else if c1 != 0.0 {
        vec![-c0 / c1]
    } else {
        Vec::new()
    };
    for r in roots.iter_mut() {
        *r = polish(&coeffs, *r);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + a.abs().max(b.abs())));
    Ok(roots)
}

fn quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![-b / (2.0 * a)];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Roots of the monic cubic `α³ + a α² + b α + c`.
fn cardano(a: f64, b: f64, c: f64) -> Vec<f64> {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    if p == 0.0 && q == 0.0 {
        return vec![-shift];
    }
    if disc > 0.0 {
        let s = disc.sqrt();
        let u = (-half_q - half_q.signum() * s).cbrt();
        let u = if u == 0.0 { (-half_q + s).cbrt() } else { u };
        let t = u - third_p / u;
        vec![t - shift]
    } else {
        let m = 2.0 * (-third_p).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3).map(|k| m * (theta - 2.0 * PI * k as f64 / 3.0).cos() - shift).collect()
    }
}

/// Horner evaluation of `Σ c_k α^k` and its derivative.
fn eval_with_derivative(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// A few Newton steps, kept only while they reduce `|p|`.
fn polish(coeffs: &[f64], mut x: f64) -> f64 {
    let (mut px, _) = eval_with_derivative(coeffs, x);
    for _ in 0..4 {
        let (_, d) = eval_with_derivative(coeffs, x);
        if d == 0.0 || px == 0.0 {
            break;
        }
        let next = x - px / d;
        let (pn, _) = eval_with_derivative(coeffs, next);
        if pn.abs() < px.abs() {
            x = next;
            px = pn;
        } else {
            break;
        }
    }
    x
}

/// Real roots of `Σ c_k α^k` (ascending coefficients), ascending order.
///
/// Degrees up to three use [`cubic_real_roots`]; higher degrees isolate
/// roots between the critical points (found recursively) and bisect.
pub fn polynomial_real_roots(coeffs: &[f64]) -> Result<Vec<f64>> {
    let degree = match coeffs.iter().rposition(|&c| c != 0.0) {
        Some(d) => d,
        None => return Err(Error::config("polynomial is identically zero")),
    };
    let c = &coeffs[..=degree];
    if degree <= 3 {
        let mut padded = [0.0; 4];
        padded[..=degree].copy_from_slice(c);
        return cubic_real_roots(padded[3], padded[2], padded[1], padded[0]);
    }
    let derivative: Vec<f64> = (1..=degree).map(|k| k as f64 * c[k]).collect();
    let critical = polynomial_real_roots(&derivative)?;
    let lead = c[degree];
    let bound = 1.0 + c[..degree].iter().map(|x| (x / lead).abs()).fold(0.0, f64::max);
    let mut knots = vec![-bound];
    knots.extend(critical.iter().copied().filter(|x| x.abs() < bound));
    knots.push(bound);
    let value = |x: f64| eval_with_derivative(c, x).0;
    let scale = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut roots = Vec::new();
    for pair in knots.windows(2) {
        let (mut lo, mut hi) = (pair[0], pair[1]);
        let (mut flo, fhi) = (value(lo), value(hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = value(mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        roots.push(polish(c, 0.5 * (lo + hi)));
    }
    // Double roots touch zero at a critical point without a sign change.
    for &x in &critical {
        if value(x).abs() <= 1e-12 * scale * (1.0 + x.abs()).powi(degree as i32) {
            roots.push(x);
        }
    }
    if value(bound) == 0.0 {
        roots.push(bound);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())));
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_roots(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol * (1.0 + w.abs()), "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn textbook_cases() {
        assert_roots(&cubic_real_roots(1.0, 0.0, -1.0, 0.0).unwrap(), &[-1.0, 0.0, 1.0], 1e-14);
        assert_roots(&cubic_real_roots(1.0, 0.0, 0.0, 1.0).unwrap(), &[-1.0], 1e-14);
        assert_roots(&cubic_real_roots(0.0, 1.0, -3.0, 2.0).unwrap(), &[1.0, 2.0], 1e-14);
        assert_roots(&cubic_real_roots(0.0, 0.0, 2.0, -1.0).unwrap(), &[0.5], 1e-15);
        assert!(cubic_real_roots(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(cubic_real_roots(0.0, 0.0, 0.0, 3.0).unwrap().is_empty());
        assert_roots(&cubic_real_roots(1.0, -3.0, 3.0, -1.0).unwrap(), &[1.0], 1e-5);
    }

    #[test]
    fn quintic_with_planted_roots() {
        // (x+2)(x+0.5)(x-1)(x-3)(x^2... ) expanded by convolution.
        let planted = [-2.0, -0.5, 1.0, 3.0, 7.5];
        let mut c = vec![1.0];
        for r in planted {
            let mut next = vec![0.0; c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= r * ck;
            }
            c = next;
        }
        assert_roots(&polynomial_real_roots(&c).unwrap(), &planted, 1e-10);
        // x^4 + 1 has no real roots; x^4 - 2x^2 + 1 has double roots at ±1.
        assert!(polynomial_real_roots(&[1.0, 0.0, 0.0, 0.0, 1.0]).unwrap().is_empty());
        assert_roots(&polynomial_real_roots(&[1.0, 0.0, -2.0, 0.0, 1.0]).unwrap(), &[-1.0, 1.0], 1e-7);
    }

    proptest! {
        #[test]
        fn planted_cubic_roots(a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0, lead in 0.1f64..5.0) {
            let mut want = [a, b, c];
            want.sort_by(f64::total_cmp);
            prop_assume!(want[1] - want[0] > 1e-2 && want[2] - want[1] > 1e-2);
            let c2 = -lead * (a + b + c);
            let c1 = lead * (a * b + b * c + a * c);
            let c0 = -lead * a * b * c;
            let got = cubic_real_roots(lead, c2, c1, c0).unwrap();
            prop_assert_eq!(got.len(), 3);
            let scale = [lead, c2, c1, c0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-9 * (1.0 + w.abs()));
                let p = ((lead * g + c2) * g + c1) * g + c0;
                prop_assert!(p.abs() <= 1e-9 * scale * (1.0 + g.abs()).powi(3));
            }
        }

        #[test]
        fn every_reported_root_is_a_root(c in prop::collection::vec(-5.0f64..5.0, 4)) {
            prop_assume!(c.iter().any(|x| *x != 0.0));
            let roots = cubic_real_roots(c[3], c[2], c[1], c[0]).unwrap();
            let scale = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for r in roots {
                let p = ((c[3] * r + c[2]) * r + c[1]) * r + c[0];
                prop_assert!(p.abs() <= 1e-9 * scale * (1.0 + r.abs()).powi(3));
            }
        }
    }
}
