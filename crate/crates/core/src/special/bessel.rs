//! Modified Bessel functions of the first kind `I_m(z)` for integer order and
//! complex argument, plus `J_n` on the real line and its positive zeros.
//!
//! Small arguments use the ascending series. Everywhere else the whole order
//! sequence comes from Miller's backward recurrence, normalised with
//! `exp(z) = I_0(z) + 2 sum_k I_k(z)` on the half plane `Re z >= 0`; the left
//! half plane follows from `I_m(-z) = (-1)^m I_m(z)`.

use num_complex::Complex64;
use thiserror::Error;

/// Largest `|z|` for which the evaluation is documented to meet its accuracy target.
pub const RELIABLE_RADIUS: f64 = 100.0;

const SERIES_RADIUS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BesselError {
    #[error("argument {0} lies outside the reliable range |z| <= {RELIABLE_RADIUS}")]
    OutOfRange(Complex64),
    #[error("argument is not finite: {0}")]
    NotFinite(Complex64),
}

/// `I_m(z)`.
pub fn bessel_i(m: u32, z: Complex64) -> Result<Complex64, BesselError> {
    Ok(bessel_i_orders(m, z)?[m as usize])
}

/// `[I_0(z), I_1(z), ..., I_max_order(z)]` from a single recurrence pass.
pub fn bessel_i_orders(max_order: u32, z: Complex64) -> Result<Vec<Complex64>, BesselError> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(BesselError::NotFinite(z));
    }
    let r = z.norm();
    if r > RELIABLE_RADIUS {
        return Err(BesselError::OutOfRange(z));
    }
    let count = max_order as usize + 1;
    if r == 0.0 {
        let mut out = vec![Complex64::new(0.0, 0.0); count];
        out[0] = Complex64::new(1.0, 0.0);
        return Ok(out);
    }
    let (w, flip) = if z.re < 0.0 { (-z, true) } else { (z, false) };
    let mut out = if r <= SERIES_RADIUS {
        (0..=max_order).map(|m| series(m, w)).collect()
    } else {
        miller(max_order, w)
    };
    if flip {
        for v in out.iter_mut().skip(1).step_by(2) {
            *v = -*v;
        }
    }
    Ok(out)
}

fn series(m: u32, z: Complex64) -> Complex64 {
    let half = z * 0.5;
    let q = half * half;
    let mut lead = Complex64::new(1.0, 0.0);
    for k in 1..=m {
        lead = lead * half / k as f64;
    }
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for k in 1..200u32 {
        term = term * q / (k as f64 * (k + m) as f64);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    lead * sum
}

fn miller(max_order: u32, z: Complex64) -> Vec<Complex64> {
    let r = z.norm();
    let start = max_order as usize + 24 + (r + 10.0 * r.sqrt()).ceil() as usize;
    let two_over_z = 2.0 / z;
    let mut out = vec![Complex64::new(0.0, 0.0); max_order as usize + 1];
    let mut above = Complex64::new(0.0, 0.0);
    let mut current = Complex64::new(1.0, 0.0);
    let mut norm = Complex64::new(0.0, 0.0);
    for k in (1..=start).rev() {
        if k <= max_order as usize {
            out[k] = current;
        }
        norm += current * 2.0;
        let below = two_over_z * k as f64 * current + above;
        above = current;
        current = below;
        if current.norm() > 1e200 {
            let s = 1e-200;
            current *= s;
            above *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    out[0] = current;
    norm += current;
    // keep the squared modulus representable
    let size = norm.norm();
    let scale = z.exp() / (norm / size) / size;
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// Bessel function of the first kind `J_n(x)` on the real line, using
/// `I_n(i x) = i^n J_n(x)`.
pub fn bessel_j(n: u32, x: f64) -> Result<f64, BesselError> {
    let seq = bessel_i_orders(n, Complex64::new(0.0, x))?;
    Ok(rotate_to_j(n, seq[n as usize]))
}

fn rotate_to_j(n: u32, v: Complex64) -> f64 {
    // multiply by i^{-n}
    match n % 4 {
        0 => v.re,
        1 => v.im,
        2 => -v.re,
        _ => -v.im,
    }
}

fn bessel_j_with_derivative(n: u32, x: f64) -> Result<(f64, f64), BesselError> {
    let seq = bessel_i_orders(n + 1, Complex64::new(0.0, x))?;
    let j = |k: u32| rotate_to_j(k, seq[k as usize]);
    let value = j(n);
    let deriv = if n == 0 { -j(1) } else { 0.5 * (j(n - 1) - j(n + 1)) };
    Ok((value, deriv))
}

/// First `count` strictly positive zeros of `J_order`, ascending, each to about
/// 1e-13 absolute. Zeros are bracketed by sign changes on a grid of step 0.05
/// and refined by bisection followed by a Newton polish.
pub fn bessel_j_roots(order: u32, count: usize) -> Result<Vec<f64>, BesselError> {
    let mut roots = Vec::with_capacity(count);
    let step = 0.05;
    // J_n(x) ~ x^n near the origin; the first zero lies beyond n.
    let mut lo = if order == 0 { step } else { order as f64 * 0.5 + step };
    let mut f_lo = bessel_j(order, lo)?;
    while roots.len() < count {
        let hi = lo + step;
        let f_hi = bessel_j(order, hi)?;
        if f_lo == 0.0 {
            roots.push(lo);
        } else if f_lo.signum() != f_hi.signum() {
            roots.push(refine_root(order, lo, hi, f_lo)?);
        }
        lo = hi;
        f_lo = f_hi;
    }
    Ok(roots)
}

fn refine_root(order: u32, mut a: f64, mut b: f64, mut fa: f64) -> Result<f64, BesselError> {
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if b - a < 1e-14 * mid {
            break;
        }
        let fm = bessel_j(order, mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..3 {
        let (f, df) = bessel_j_with_derivative(order, x)?;
        if df == 0.0 {
            break;
        }
        let next = x - f / df;
        if next <= a - 1e-12 || next >= b + 1e-12 {
            break;
        }
        x = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn values_at_origin() {
        assert_eq!(bessel_i(0, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        for m in 1..6 {
            assert_eq!(bessel_i(m, c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        }
    }

    #[test]
    fn reference_values() {
        // Frozen from a double-double ascending-series evaluation.
        assert_relative_eq!(bessel_i(0, c(1.0, 0.0)).unwrap().re, 1.2660658777520084, max_relative = 1e-15);
        let i1 = bessel_i(1, c(-2.0, 0.0)).unwrap();
        assert_relative_eq!(i1.re, -1.5906368546373291, max_relative = 1e-15);
        assert_eq!(i1.im, 0.0);
        let i1p = bessel_i(1, c(2.0, 0.0)).unwrap();
        assert_eq!(i1.re, -i1p.re);
    }

    #[test]
    fn series_and_recurrence_agree_at_switch() {
        for &z in &[c(1.9, 0.4), c(0.3, -1.95), c(-1.2, 1.5)] {
            let from_series: Vec<_> = (0..6).map(|m| series(m, if z.re < 0.0 { -z } else { z })).collect();
            let from_miller = miller(5, if z.re < 0.0 { -z } else { z });
            for (a, b) in from_series.iter().zip(&from_miller) {
                assert!((a - b).norm() <= 1e-15 * (1.0 + a.norm()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn range_and_nan_errors() {
        assert!(matches!(bessel_i(0, c(101.0, 0.0)), Err(BesselError::OutOfRange(_))));
        assert!(matches!(bessel_i(0, c(f64::NAN, 0.0)), Err(BesselError::NotFinite(_))));
        assert!(bessel_i(3, c(0.0, 99.0)).is_ok());
    }

    #[test]
    fn large_real_argument_matches_leading_asymptotics() {
        let x = 90.0;
        let v = bessel_i(0, c(x, 0.0)).unwrap().re;
        let mut series = 0.0;
        let mut term = 1.0;
        for k in 0..12 {
            series += term;
            let kk = (2 * k + 1) as f64;
            term *= kk * kk / ((k + 1) as f64 * 8.0 * x);
        }
        let asym = x.exp() / (2.0 * std::f64::consts::PI * x).sqrt() * series;
        assert_relative_eq!(v, asym, max_relative = 1e-13);
    }

    #[test]
    fn j_roots_known_values() {
        let r1 = bessel_j_roots(1, 4).unwrap();
        assert!((r1[0] - 3.8317059702075123).abs() < 1e-12);
        assert!((r1[1] - 7.0155866698156188).abs() < 1e-12);
        assert!((r1[2] - 10.173468135062722).abs() < 1e-12);
        assert!((r1[3] - 13.323691936314223).abs() < 1e-12);
        let r0 = bessel_j_roots(0, 5).unwrap();
        assert!((r0[0] - 2.4048255576957728).abs() < 1e-12);
        // Interlacing: j_{0,k} < j_{1,k} < j_{0,k+1}.
        for k in 0..4 {
            assert!(r1[k] > r0[k] && r1[k] < r0[k + 1]);
            if k > 0 {
                assert!(r1[k] > r1[k - 1]);
            }
        }
    }

    #[test]
    fn j_roots_higher_order() {
        let r = bessel_j_roots(3, 2).unwrap();
        assert!((r[0] - 6.3801618959239835).abs() < 1e-11);
        assert!((r[1] - 9.7610231299816697).abs() < 1e-11);
    }
}
