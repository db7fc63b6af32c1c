//! Reference computations that share no code with the library solvers.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::model::{ForceLaw, ModelParams};
use crate::special::quadrature::QuadratureRule;
use crate::traveling_wave::TravelingWaveState;

/// Fractional bits of the fixed-point oracle arithmetic.
const FRAC_BITS: u32 = 384;

#[derive(Clone)]
struct Fixed {
    re: BigInt,
    im: BigInt,
}

fn fixed_from_f64(x: f64) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
    let shift = e + FRAC_BITS as i64;
    let mag = if shift >= 0 {
        BigInt::from(mant) << shift as usize
    } else {
        BigInt::from(mant) >> (-shift) as usize
    };
    if x < 0.0 {
        -mag
    } else {
        mag
    }
}

fn fixed_to_f64(x: &BigInt) -> f64 {
    // keep 64 significant bits before the float conversion
    let bits = x.bits() as i64;
    let drop = (bits - 64).max(0);
    let head = x >> drop as usize;
    head.to_f64().unwrap_or(f64::NAN) * 2f64.powi((drop - FRAC_BITS as i64) as i32)
}

impl Fixed {
    fn new(z: Complex64) -> Self {
        Self {
            re: fixed_from_f64(z.re),
            im: fixed_from_f64(z.im),
        }
    }

    fn one() -> Self {
        Self {
            re: BigInt::from(1) << FRAC_BITS as usize,
            im: BigInt::zero(),
        }
    }

    fn mul(&self, o: &Fixed) -> Fixed {
        Fixed {
            re: (&self.re * &o.re - &self.im * &o.im) >> FRAC_BITS as usize,
            im: (&self.re * &o.im + &self.im * &o.re) >> FRAC_BITS as usize,
        }
    }

    fn div_int(&self, d: u64) -> Fixed {
        Fixed {
            re: &self.re / d,
            im: &self.im / d,
        }
    }

    fn add(&mut self, o: &Fixed) {
        self.re += &o.re;
        self.im += &o.im;
    }

    fn neg(&self) -> Fixed {
        Fixed {
            re: -&self.re,
            im: -&self.im,
        }
    }

    fn is_negligible(&self) -> bool {
        self.re.abs().bits() < 16 && self.im.abs().bits() < 16
    }

    fn to_complex(&self) -> Complex64 {
        Complex64::new(fixed_to_f64(&self.re), fixed_to_f64(&self.im))
    }
}

/// `sum_k s (z/2)^{2k+m} / (k! (k+m)!)` with `s = 1` (`I_m`) or `(-1)^k` (`J_m`),
/// summed in 384-bit fixed point.
fn bessel_series(m: u32, z: Complex64, alternating: bool) -> Complex64 {
    let half = Fixed::new(z * 0.5);
    let mut term = Fixed::one();
    for k in 1..=m as u64 {
        term = term.mul(&half).div_int(k);
    }
    let q = half.mul(&half);
    let mut sum = term.clone();
    let mut k = 0u64;
    loop {
        k += 1;
        term = term.mul(&q).div_int(k * (k + m as u64));
        if alternating {
            term = term.neg();
        }
        sum.add(&term);
        // past the largest term the tail is bounded by a geometric series
        if (k as f64) > z.norm() && term.is_negligible() {
            break;
        }
    }
    sum.to_complex()
}

/// `I_m(z)` from the ascending series in extended precision.
pub fn bessel_i_reference(m: u32, z: Complex64) -> Complex64 {
    bessel_series(m, z, false)
}

/// `J_m(x)` from the ascending series in extended precision.
pub fn bessel_j_reference(m: u32, x: f64) -> f64 {
    bessel_series(m, Complex64::new(x, 0.0), true).re
}

/// First `count` positive zeros of `J_1` by scanning and bisection.
pub fn j1_zeros_reference(count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let step = 0.25;
    let mut lo = 0.5;
    let mut f_lo = bessel_j_reference(1, lo);
    while out.len() < count {
        let hi = lo + step;
        let f_hi = bessel_j_reference(1, hi);
        if f_lo.signum() != f_hi.signum() {
            let (mut a, mut b, fa) = (lo, hi, f_lo);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                let fm = bessel_j_reference(1, mid);
                if fm.signum() == fa.signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            out.push(0.5 * (a + b));
        }
        lo = hi;
        f_lo = f_hi;
    }
    out
}

/// `c1 int int e^{-a V x}` over the state's domain by Gauss-Legendre in `r` and
/// the trapezoid rule in `theta`.
pub fn marker_mass(state: &TravelingWaveState, params: &ModelParams) -> f64 {
    let angles = QuadratureRule::periodic_trapezoid(512, 0.0);
    let mut total = 0.0;
    for (&t, &w) in angles.nodes.iter().zip(&angles.weights) {
        let r_max = state.shape.radius(t);
        let radial = QuadratureRule::gauss_legendre(48, 0.0, r_max);
        let ct = t.cos();
        total += w * radial.integrate(|r| (-params.a * state.v * r * ct).exp() * r);
    }
    state.c1 * total
}

/// The linearisation of `F` at `(chi_c, 0, 0, 0)` in cosine coefficients:
/// curvature `-gamma (rho + rho'') / R0^2`, concentration
/// `-(chi_c c0 f_act'(c0) / (pi R0)) int rho`, the `V cos theta` terms and `-p1`;
/// then the area row `2 R0 int rho` and the centering row `int rho cos`.
///
/// `pi_in_mass_term = false` drops the `1/pi`, reproducing the operator
/// as it is often displayed.
#[allow(clippy::too_many_arguments)]
pub fn linearized_operator(
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
    chi_c: f64,
    rho: &[f64],
    v: f64,
    p1: f64,
    pi_in_mass_term: bool,
) -> Vec<f64> {
    let (r, gamma, a, c0) = (params.r0, params.gamma, params.a, params.c0());
    let f1 = f_act.d1(c0);
    let g1 = f_und.d1(0.0);
    let n = rho.len() - 1;
    let int_rho = 2.0 * PI * rho[0];
    let mass_factor = if pi_in_mass_term { PI } else { 1.0 };
    let mut out = vec![0.0; n + 3];
    for (k, &rk) in rho.iter().enumerate() {
        let kf = k as f64;
        out[k] = -gamma * (1.0 - kf * kf) * rk / (r * r);
    }
    out[0] += -chi_c * c0 * f1 * int_rho / (mass_factor * r) - p1;
    out[1] += (-a * c0 * chi_c * f1 * r + r + params.chi_u * g1) * v;
    out[n + 1] = 2.0 * r * int_rho;
    out[n + 2] = PI * rho[1];
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_values() {
        let i0 = bessel_i_reference(0, Complex64::new(1.0, 0.0));
        assert!((i0.re - 1.2660658777520084).abs() < 1e-15);
        let i1 = bessel_i_reference(1, Complex64::new(-2.0, 0.0));
        assert!((i1.re + 1.5906368546373291).abs() < 1e-15);
        let z = j1_zeros_reference(2);
        assert!((z[0] - 3.8317059702075125).abs() < 1e-13);
        assert!((z[1] - 7.0155866698156190).abs() < 1e-13);
    }

    #[test]
    fn fixed_point_round_trip() {
        for &x in &[1.0, -3.5e-7, 123.456, 2f64.powi(-60)] {
            assert_eq!(fixed_to_f64(&fixed_from_f64(x)), x);
        }
    }
}
