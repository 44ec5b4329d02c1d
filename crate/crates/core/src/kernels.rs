//! Scalar special functions: probabilists' Hermite polynomials, the standard
//! normal upper tail Ψ, and the β_j kernels of the expected Euler
//! characteristic expansion.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Largest Hermite degree accepted by [`hermite`].
pub const MAX_HERMITE_DEGREE: usize = 64;

/// Probabilists' Hermite polynomial `He_j(x)`, evaluated with the
/// three-term recurrence `He_{j+1} = x He_j - j He_{j-1}`.
pub fn hermite(j: usize, x: f64) -> Result<f64> {
    if j > MAX_HERMITE_DEGREE {
        return Err(Error::invalid(
            "j",
            format!("Hermite degree {j} exceeds the cap {MAX_HERMITE_DEGREE}"),
        ));
    }
    if !x.is_finite() {
        return Err(Error::invalid("x", "must be finite"));
    }
    Ok(hermite_unchecked(j, x))
}

fn hermite_unchecked(j: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if j == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..j {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Standard normal upper tail `Ψ(u) = P{N(0,1) ≥ u}`.
///
/// Uses the complementary error function directly, so there is no
/// `1 - Φ(u)` cancellation for large `u`. Against a quadrature of the
/// defining integral the absolute error stays below 1e-16 on `[-2, 8]`
/// (see the kernel tests).
pub fn gaussian_tail(u: f64) -> f64 {
    0.5 * libm::erfc(u / SQRT_2)
}

/// Mills ratio `Ψ(u)/φ(u)`, finite where `Ψ(u)` itself underflows.
///
/// Below `u = 10` it is formed from [`gaussian_tail`] directly; above, from
/// the continued fraction `1/(u + 1/(u + 2/(u + 3/(u + …))))`, evaluated
/// with the modified Lentz method.
pub fn mills_ratio(u: f64) -> f64 {
    if u < 10.0 {
        return gaussian_tail(u) / gaussian_density(u);
    }
    mills_continued_fraction(u)
}

fn mills_continued_fraction(u: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = u;
    let mut c = u;
    let mut d = 0.0;
    for k in 1..200 {
        let a = k as f64;
        d = u + a * d;
        d = if d.abs() < tiny { tiny } else { d };
        c = u + a / c;
        c = if c.abs() < tiny { tiny } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// Standard normal density.
pub fn gaussian_density(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// EEC kernel: `β_0(u) = Ψ(u)` and
/// `β_j(u) = (2π)^{-(j+1)/2} He_{j-1}(u) e^{-u²/2}` for `j ≥ 1`.
pub fn beta_j(j: usize, u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::invalid("u", "must be finite"));
    }
    if j == 0 {
        return Ok(gaussian_tail(u));
    }
    let h = hermite(j - 1, u)?;
    Ok((2.0 * PI).powf(-((j + 1) as f64) / 2.0) * h * (-0.5 * u * u).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn low_degree_hermite() {
        assert_eq!(hermite(0, 3.7).unwrap(), 1.0);
        assert_eq!(hermite(1, -2.5).unwrap(), -2.5);
        // He_3(x) = x^3 - 3x
        assert_eq!(hermite(3, 2.0).unwrap(), 2.0);
        assert_eq!(hermite(4, 1.5).unwrap(), 1.5f64.powi(4) - 6.0 * 1.5 * 1.5 + 3.0);
    }

    #[test]
    fn hermite_degree_cap() {
        assert!(hermite(64, 0.3).is_ok());
        assert!(matches!(
            hermite(65, 0.3),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn tail_reference_points() {
        assert_eq!(gaussian_tail(0.0), 0.5);
        assert_relative_eq!(gaussian_tail(2.0), 0.022_750_131_948_179_2, epsilon = 1e-15);
        // Ψ(40) underflows f64; the scaled form Ψ(u)·u·e^{u²/2}·√(2π) does not
        let u: f64 = 40.0;
        assert!((u * mills_ratio(u) - 1.0).abs() < 1e-3);
        assert!(gaussian_tail(30.0) > 0.0);
    }

    #[test]
    fn tail_is_decreasing() {
        // Ψ saturates at 1 below about -8.3 in double precision
        let mut prev = gaussian_tail(-5.0);
        for i in 1..=800 {
            let u = -5.0 + i as f64 * 0.05;
            let cur = gaussian_tail(u);
            assert!(cur < prev, "not decreasing at u = {u}");
            prev = cur;
        }
    }

    #[test]
    fn mills_ratio_is_continuous_at_the_switch() {
        for u in [6.0, 8.0, 10.0, 12.0] {
            let direct = gaussian_tail(u) / gaussian_density(u);
            let cf = mills_continued_fraction(u);
            assert!((cf - direct).abs() / direct < 1e-12, "u = {u}");
        }
        // asymptotic series to u^-7; the omitted 105/u^9 term is ~3e-12 relative
        let u: f64 = 50.0;
        let series = 1.0 / u - 1.0 / u.powi(3) + 3.0 / u.powi(5) - 15.0 / u.powi(7);
        assert!((mills_ratio(u) - series).abs() / series < 1e-11);
    }

    #[test]
    fn tail_derivative_matches_density() {
        let h = 1e-5;
        for i in 0..=80 {
            let u = -3.0 + i as f64 * 0.1;
            let fd = (gaussian_tail(u + h) - gaussian_tail(u - h)) / (2.0 * h);
            let exact = -gaussian_density(u);
            assert!(((fd - exact) / exact).abs() <= 1e-6, "u = {u}");
        }
    }

    #[test]
    fn beta_reference_values() {
        for u in [-1.0, 0.0, 2.5] {
            assert_eq!(beta_j(0, u).unwrap(), gaussian_tail(u));
        }
        assert_relative_eq!(beta_j(1, 0.0).unwrap(), 1.0 / (2.0 * PI), epsilon = 1e-16);
        let expected = (2.0 * PI).powf(-1.5) * 3.0 * (-4.5f64).exp();
        assert_relative_eq!(beta_j(2, 3.0).unwrap(), expected, max_relative = 1e-14);
        assert!((beta_j(2, 3.0).unwrap() - 0.002_116_05).abs() < 1e-8);
    }

    #[test]
    fn beta_positive_beyond_hermite_roots() {
        for j in 1..=6usize {
            // largest root of He_{j-1} is below sqrt(2j)
            let start = (2.0 * j as f64).sqrt();
            for i in 0..50 {
                let u = start + i as f64 * 0.1;
                assert!(beta_j(j, u).unwrap() > 0.0, "j = {j}, u = {u}");
            }
        }
    }
}
