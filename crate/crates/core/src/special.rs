//! Bessel functions of the first and second kind for real positive arguments.
//!
//! `J0, J1, Y0, Y1` use the ascending series below [`SERIES_LIMIT`] and the
//! Hankel asymptotic expansion above it; both sides hold about 1e-11 absolute
//! accuracy at the crossover. Integer orders come from Miller's backward
//! recurrence (`J_n`) and the forward recurrence (`Y_n`).

use std::f64::consts::PI;

use crate::linalg::C64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Arguments below this use the power series.
const SERIES_LIMIT: f64 = 13.0;

pub fn j0(x: f64) -> f64 {
    if x.abs() < SERIES_LIMIT {
        series_j(0, x)
    } else {
        asymptotic(0, x.abs()).0
    }
}

pub fn j1(x: f64) -> f64 {
    if x.abs() < SERIES_LIMIT {
        series_j(1, x)
    } else {
        asymptotic(1, x.abs()).0 * x.signum()
    }
}

/// Second kind, order 0. Requires `x > 0`.
pub fn y0(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < SERIES_LIMIT {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut harmonic = 0.0;
        let mut sum = 0.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= -q / (kf * kf);
            harmonic += 1.0 / kf;
            let t = -term * harmonic;
            sum += t;
            if t.abs() < 1e-18 * sum.abs().max(1e-300) && k > 4 {
                break;
            }
        }
        2.0 / PI * ((0.5 * x).ln() + EULER_GAMMA) * series_j(0, x) + 2.0 / PI * sum
    } else {
        asymptotic(0, x).1
    }
}

/// Second kind, order 1. Requires `x > 0`.
pub fn y1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < SERIES_LIMIT {
        let q = 0.25 * x * x;
        let mut term = 1.0; // (-q)^k / (k! (k+1)!)
        let mut psi_k1 = -EULER_GAMMA; // psi(k+1)
        let mut psi_k2 = 1.0 - EULER_GAMMA; // psi(k+2)
        let mut sum = term * (psi_k1 + psi_k2);
        for k in 1..200 {
            let kf = k as f64;
            term *= -q / (kf * (kf + 1.0));
            psi_k1 += 1.0 / kf;
            psi_k2 += 1.0 / (kf + 1.0);
            let t = term * (psi_k1 + psi_k2);
            sum += t;
            if t.abs() < 1e-18 * sum.abs().max(1e-300) && k > 4 {
                break;
            }
        }
        -2.0 / (PI * x) + 2.0 / PI * (0.5 * x).ln() * series_j(1, x) - 0.5 * x / PI * sum
    } else {
        asymptotic(1, x).1
    }
}

/// `J_order(x)` for `order` in {0, 1}: `(x/2)^ν Σ (-x²/4)^k / (k! (k+ν)!)`.
fn series_j(order: u32, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let nu = order as f64;
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && k > 4 {
            break;
        }
    }
    sum
}

/// Hankel asymptotic expansion, returns `(J_ν(x), Y_ν(x))`.
fn asymptotic(order: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (order * order) as f64;
    let z = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..100 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * z);
        let mag = a.abs();
        if mag > last {
            break;
        }
        last = mag;
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if mag < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * order as f64 + 0.25) * PI;
    let amp = (2.0 / (PI * x)).sqrt();
    let (s, c) = chi.sin_cos();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// `J_n(x)` for integer `n >= 0`, `x >= 0`.
pub fn jn(n: u32, x: f64) -> f64 {
    match n {
        0 => return j0(x),
        1 => return j1(x),
        _ => {}
    }
    if x == 0.0 {
        return 0.0;
    }
    // Miller's algorithm normalized with J0 + 2 Σ J_2k = 1.
    let top = n.max(x.ceil() as u32) as f64;
    let mut m = (top + 20.0 + 4.0 * top.sqrt()) as u32;
    m += m % 2;
    let mut next = 0.0;
    let mut cur = 1e-300;
    let mut norm = 0.0;
    let mut wanted = 0.0;
    for k in (1..=m).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if k - 1 == n {
            wanted = cur;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
    }
    norm += cur;
    wanted / norm
}

/// `Y_n(x)` for integer `n >= 0`, `x > 0`, via the stable upward recurrence.
pub fn yn(n: u32, x: f64) -> f64 {
    let mut prev = y0(x);
    if n == 0 {
        return prev;
    }
    let mut cur = y1(x);
    for k in 1..n {
        let next = 2.0 * k as f64 / x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Hankel function of the second kind, `H_n^(2)(x) = J_n(x) - j Y_n(x)`.
pub fn hankel2(n: u32, x: f64) -> C64 {
    match n {
        0 => C64::new(j0(x), -y0(x)),
        1 => C64::new(j1(x), -y1(x)),
        _ => C64::new(jn(n, x), -yn(n, x)),
    }
}

/// Integer orders including negatives, `Z_{-n} = (-1)^n Z_n`.
pub fn jn_signed(n: i32, x: f64) -> f64 {
    let v = jn(n.unsigned_abs(), x);
    if n < 0 && n % 2 != 0 {
        -v
    } else {
        v
    }
}

pub fn hankel2_signed(n: i32, x: f64) -> C64 {
    let v = hankel2(n.unsigned_abs(), x);
    if n < 0 && n % 2 != 0 {
        -v
    } else {
        v
    }
}

/// `d/dx J_n(x) = J_{n-1}(x) - n J_n(x) / x`.
pub fn jn_prime(n: i32, x: f64) -> f64 {
    jn_signed(n - 1, x) - n as f64 / x * jn_signed(n, x)
}

pub fn hankel2_prime(n: i32, x: f64) -> C64 {
    hankel2_signed(n - 1, x) - hankel2_signed(n, x) * (n as f64 / x)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with mpmath at 40 digits.
    // (x, J0, J1, Y0, Y1)
    const LOW_ORDER: &[(f64, f64, f64, f64, f64)] = &[
        (0.001, 0.999999750000015625, 0.00049999993750000261457, -4.4714166113759232557, -636.62216723113941482),
        (0.01, 0.99997500015624956597, 0.0049999375002604162282, -3.0054556370836459445, -63.678596282060655049),
        (0.1, 0.997501562066040032, 0.049937526036242000321, -1.5342386513503668083, -6.4589510947020266377),
        (0.5, 0.93846980724081290423, 0.24226845767487388638, -0.44451873350670655715, -1.4714723926702430692),
        (1.0, 0.76519768655796655145, 0.44005058574493351596, 0.088256964215676957983, -0.78121282130028871655),
        (2.404825557695773, -6.1087652597367303971e-17, 0.51914749728946676274, 0.50992438344847906518, 0.1027466824382595953),
        (3.0, -0.26005195490193343762, 0.33905895852593645893, 0.37685001001279038197, 0.32467442479179997844),
        (3.831705970207512, -0.4027593957025529721, 1.1736302822728639658e-16, 0.051397673099411083221, 0.41251739515882578387),
        (5.0, -0.17759677131433830435, -0.32757913759146522204, -0.30851762524903378007, 0.1478631433912268448),
        (7.0, 0.30007927051955559665, -0.0046828234823458326991, -0.025949743967209264884, -0.30266723702418487006),
        (7.9, 0.19436184484127823969, 0.21917939992175120327, 0.20652094814437576859, -0.18172107728057312765),
        (8.0, 0.17165080713755390609, 0.23463634685391462438, 0.22352148938756622053, -0.15806046173124749426),
        (9.5, -0.1939287476874223554, 0.16126443075752985095, 0.17121062620272384487, 0.20317989938720766824),
        (11.0, -0.17119030040719608835, -0.17678529895672150114, -0.16884732389207954182, 0.16370553741494285432),
        (12.0, 0.047689310796833536624, -0.22344710449062761237, -0.22523731263436143369, -0.05709921826089652105),
        (12.9, 0.1988424371363309866, -0.091248252249939371216, -0.09887037024149840586, -0.20281697432366468521),
        (13.0, 0.206926102377067811, -0.070318052121778371157, -0.078207864527875911021, -0.21008140842069350592),
        (13.1, 0.21288819752206036269, -0.048852473334223783711, -0.056925256781293835245, -0.21521150600500221136),
        (14.0, 0.17107347611045865906, 0.13337515469879325311, 0.12719256858218368838, -0.16664484185617226675),
        (15.0, -0.014224472826780773234, 0.20510403861352276115, 0.20546429603891826479, 0.02107362803687351194),
        (17.5, -0.10311039822868592217, -0.16341996942575490589, -0.16041119250501116909, 0.098572798734216046215),
        (20.0, 0.16702466434058315473, 0.066833124175850045579, 0.062640596809383831162, -0.16551161436252129586),
        (25.0, 0.096266783275958116174, -0.12535024958028990465, -0.12724943226800613783, -0.098829964783237410053),
        (31.4, 0.098653744091573117803, -0.10110399295094175924, -0.1026615205116387722, -0.10030055613730202656),
        (37.3, 0.048811957363259748132, -0.1205318200240868866, -0.12117514374425367552, -0.050440378439893514868),
        (50.0, 0.055812327669251815005, -0.097511828125175137661, -0.098064995470077079029, -0.056795668562014767942),
        (63.0, 0.08185768644780927319, -0.057696680293943615991, -0.058344466801545565179, -0.082323285647628229905),
        (75.0, 0.034643913805097056137, -0.085139995044829103941, -0.085369047647775609895, -0.035213785160580485664),
        (100.0, 0.019985850304223122424, -0.077145352014112158033, -0.077244313365083152254, -0.020372312002759793305),
        (127.7, 0.022269289567405309998, 0.067090069708476057271, 0.067002363729247122235, -0.022007121423164262847),
        (150.0, -0.00077409037539429124695, -0.065145163657727360305, -0.065142221509037354596, 0.0005569563495608399837),
        (180.2, -0.055972893213128965497, -0.020152201956697900162, -0.019996818484100612839, 0.055917624027685229477),
        (199.9, -0.020783067565633878885, -0.052518759199274574316, -0.052466611747900348221, 0.020651901250686607598),
        (200.0, -0.015437439930565091592, -0.054304538182378222711, -0.054265775249817910694, 0.01530182458038998922),
    ];

    // (n, x, Jn, Yn)
    const HIGH_ORDER: &[(u32, f64, f64, f64)] = &[
        (2, 0.3, 0.011165861949063963219, -14.480094011452341896),
        (2, 1.7, 0.28173894235274134474, -0.78699905319818568909),
        (2, 4.2, 0.31053470097421229485, 0.26899539553070850527),
        (2, 9.0, 0.14484734153250397263, -0.22675568157464336765),
        (2, 16.0, 0.18619872094129220811, -0.073564100963285295688),
        (2, 40.0, -0.0010649746823580395933, -0.1262260923493384109),
        (3, 0.3, 0.00055934304774884605867, -190.77481501430936996),
        (3, 1.7, 0.085149926948015258315, -1.5670362330493097343),
        (3, 4.2, 0.43439427638720078235, -0.11182671687254791326),
        (3, 9.0, -0.18093519033665684004, -0.20509487811877960661),
        (3, 16.0, -0.043847495425981134212, -0.19636619418023818355),
        (3, 40.0, -0.12614481550582080316, -0.0068291034133842081488),
        (5, 0.3, 6.3044326337710711158e-7, -101169.65735231196634),
        (5, 1.7, 0.0032745981410678641998, -20.756338183169218129),
        (5, 4.2, 0.15613629696042411127, -0.70483585113845575892),
        (5, 9.0, -0.055038855669513707505, 0.28511777841103764801),
        (5, 16.0, -0.057473270437036432507, 0.19632958325308617198),
        (5, 40.0, 0.12257346597711778699, 0.031869448780850364084),
        (8, 0.3, 6.340502484263519302e-12, -6279815900.0979426378),
        (8, 1.7, 6.2348407605872909426e-6, -6533.5820923981441148),
        (8, 4.2, 0.0056738730765718701308, -8.3004739344900972103),
        (8, 9.0, 0.30506707225300013697, -0.19994686666043448738),
        (8, 16.0, -0.0070211419529606526289, -0.2139937392608976407),
        (8, 40.0, -0.086308315245317327674, 0.093770449281398151418),
        (12, 0.3, 2.7039984267648414084e-19, -98129403109316558.757),
        (12, 1.7, 2.8086993025985705419e-10, -95411031.938569363093),
        (12, 4.2, 0.000010892498575515280863, -2601.3945326458375451),
        (12, 9.0, 0.027392888670559681084, -1.5064941541877062036),
        (12, 16.0, 0.11240023492610678972, 0.21597027298252575048),
        (12, 40.0, -0.12697799611784806361, -0.023626554843633342666),
        (20, 0.3, 1.3653224688572001285e-35, -1.165826385988877703e+33),
        (20, 1.7, 1.5392189177224386682e-20, -1037763399787799029.4),
        (20, 4.2, 9.260165883419703728e-13, -17580165419.73854953),
        (20, 9.0, 1.7766747419148994924e-6, -10036.402327721984445),
        (20, 16.0, 0.017328746227591996192, -1.5671739908588116172),
        (20, 40.0, 0.12779393355084889625, 0.04516182056580589068),
    ];

    /// Absolute error for O(1) values, relative error for the large `Y` values near 0.
    fn close(got: f64, want: f64, tol: f64) -> bool {
        (got - want).abs() <= tol * want.abs().max(1.0)
    }

    #[test]
    fn low_orders_match_reference_to_1e10() {
        for &(x, rj0, rj1, ry0, ry1) in LOW_ORDER {
            assert!(close(j0(x), rj0, 1e-10), "J0({x}) = {} vs {rj0}", j0(x));
            assert!(close(j1(x), rj1, 1e-10), "J1({x}) = {} vs {rj1}", j1(x));
            assert!(close(y0(x), ry0, 1e-10), "Y0({x}) = {} vs {ry0}", y0(x));
            assert!(close(y1(x), ry1, 1e-10), "Y1({x}) = {} vs {ry1}", y1(x));
        }
    }

    #[test]
    fn integer_orders_match_reference() {
        for &(n, x, rj, ry) in HIGH_ORDER {
            let gj = jn(n, x);
            let gy = yn(n, x);
            assert!((gj - rj).abs() <= 1e-10 * rj.abs() + 1e-15, "J{n}({x}) = {gj} vs {rj}");
            assert!((gy - ry).abs() <= 1e-9 * ry.abs().max(1.0), "Y{n}({x}) = {gy} vs {ry}");
        }
    }

    #[test]
    fn wronskian_holds_across_crossover() {
        let mut x = 0.05;
        while x < 200.0 {
            let w = j1(x) * y0(x) - j0(x) * y1(x);
            assert!((w - 2.0 / (PI * x)).abs() < 1e-11 * (1.0 + 2.0 / (PI * x)), "x = {x}");
            x *= 1.07;
        }
    }

    #[test]
    fn negative_orders_and_derivatives() {
        let x = 2.3;
        assert!((jn_signed(-1, x) + j1(x)).abs() < 1e-15);
        assert!((jn_prime(0, x) + j1(x)).abs() < 1e-14);
        let h = 1e-6;
        let fd = (hankel2_signed(3, x + h) - hankel2_signed(3, x - h)) / (2.0 * h);
        assert!((hankel2_prime(3, x) - fd).norm() < 1e-7);
    }
}
