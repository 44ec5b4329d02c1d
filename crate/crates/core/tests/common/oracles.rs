//! Independent reference computations shared by the test suites and the
//! acceptance runner. Nothing here calls into the library under test.

#![allow(dead_code)]

/// 15-point Kronrod nodes on [0, 1] (the negative half mirrors) with the
/// Kronrod and embedded 7-point Gauss weights.
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XK[i]) + f(c + h * XK[i]);
        k += WK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[a, b]` to
/// absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn go(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = kronrod(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        go(f, a, m, 0.5 * tol, depth - 1) + go(f, m, b, 0.5 * tol, depth - 1)
    }
    go(f, a, b, tol, 40)
}

/// `∫_u^∞ φ(x) dx` by quadrature over `[u, max(u, 0) + 40]`; the cut-off
/// tail is below 1e-300.
pub fn tail_by_quadrature(u: f64) -> f64 {
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let top = u.max(0.0) + 40.0;
    // split at the mode so the integrand is monotone on each piece
    if u < 0.0 {
        integrate(&phi, u, 0.0, 1e-16) + integrate(&phi, 0.0, top, 1e-16)
    } else {
        integrate(&phi, u, top, 1e-16)
    }
}

/// Area of `{x ∈ R² : dist(x, [0, a] × [0, b]) ≤ r}` by counting the
/// midpoints of a uniform grid of about `points` cells over its bounding box.
pub fn rectangle_tube_area_by_count(a: f64, b: f64, r: f64, points: usize) -> f64 {
    let (w, h) = (a + 2.0 * r, b + 2.0 * r);
    let nx = ((points as f64) * w / h).sqrt().round() as usize;
    let ny = points / nx;
    let (dx, dy) = (w / nx as f64, h / ny as f64);
    let mut hits = 0usize;
    for j in 0..ny {
        let y = -r + (j as f64 + 0.5) * dy;
        let ey = (-y).max(y - b).max(0.0);
        for i in 0..nx {
            let x = -r + (i as f64 + 0.5) * dx;
            let ex = (-x).max(x - a).max(0.0);
            if ex * ex + ey * ey <= r * r {
                hits += 1;
            }
        }
    }
    hits as f64 * dx * dy
}

/// Area of `{x ∈ R² : |x| ≤ radius + r}` by the same grid count.
pub fn disc_tube_area_by_count(radius: f64, r: f64, points: usize) -> f64 {
    let big = radius + r;
    let n = (points as f64).sqrt().round() as usize;
    let d = 2.0 * big / n as f64;
    let mut hits = 0usize;
    for j in 0..n {
        let y = -big + (j as f64 + 0.5) * d;
        for i in 0..n {
            let x = -big + (i as f64 + 0.5) * d;
            if x * x + y * y <= big * big {
                hits += 1;
            }
        }
    }
    hits as f64 * d * d
}
