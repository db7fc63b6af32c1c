//! Linear stability of the resting disk.
//!
//! For angular mode `m` the growth rates are the zeros of
//!
//! ```text
//! H_m(z) = z m K I_m(-R w) + (w/2) B(z) [I_{m-1} + I_{m+1}](-R w),   w = sqrt(z)
//! K = a chi_c c0 f_act'(c0) / R,   B(z) = z (1 + m chi_u f_und'(0) / R) + gamma m (m^2 - 1) / R^3
//! ```
//!
//! Writing `I_n(-R w) = (-R w / 2)^n S_n(z)` with the entire series
//! `S_n(z) = sum_k (R^2 z / 4)^k / (k! (k + n)!)` gives
//! `H_m = (-R/2)^(m-1) w^m E_m(z)` with `E_m` entire. Roots are searched on
//! `G_m = E_m / z^d` (`d = 2, 1, 0` for `m = 0, 1, >= 2`), which has neither
//! the branch cut nor the structural zero at the origin, and every root is
//! re-validated against `H_m` itself.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{chi_c_star, ForceLaw, ModelError, ModelParams};
use crate::special::bessel::{bessel_i, bessel_i_orders, BesselError};
use crate::special::roots::{find_complex_roots, Rect, RootSearchOptions, SeedGrid};

/// Default normalised residual accepted for a root of `H_m`.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-8;
/// Growth rates with real part above this count as unstable.
pub const CLASSIFICATION_TOL: f64 = 1e-9;
pub const DEFAULT_M_MAX: u32 = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bessel(#[from] BesselError),
    #[error("search region is empty or not finite")]
    InvalidRegion,
    #[error("chi_c grid must be sorted ascending and finite")]
    UnsortedGrid,
    #[error("lambda = {lambda} is not a root of H_{m} (normalised residual {residual:e})")]
    NotARoot { m: u32, lambda: Complex64, residual: f64 },
    #[error("lambda = 0 is not an eigenvalue for m = {0}: the eigenfunction vanishes")]
    NotAnEigenvalue(u32),
    #[error("Re(principal root) has no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("no root of H_{m} located in the search region at chi_c = {chi_c}")]
    NoRoots { m: u32, chi_c: f64 },
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Scalar coefficients of the mode-`m` dispersion relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dispersion {
    pub m: u32,
    pub r0: f64,
    pub gamma: f64,
    pub a: f64,
    pub c0: f64,
    pub chi_c: f64,
    pub chi_u: f64,
    /// `f_act'(c0)`.
    pub f_act1: f64,
    /// `f_und'(0)`.
    pub f_und1: f64,
}

impl Dispersion {
    pub fn new(m: u32, params: &ModelParams, f_act: &ForceLaw, f_und: &ForceLaw) -> Result<Self, ModelError> {
        params.validate()?;
        let c0 = params.c0();
        Ok(Self {
            m,
            r0: params.r0,
            gamma: params.gamma,
            a: params.a,
            c0,
            chi_c: params.chi_c,
            chi_u: params.chi_u,
            f_act1: f_act.d1(c0),
            f_und1: f_und.d1(0.0),
        })
    }

    fn k(&self) -> f64 {
        self.a * self.chi_c * self.c0 * self.f_act1 / self.r0
    }

    fn b(&self, z: Complex64) -> Complex64 {
        let m = self.m as f64;
        z * (1.0 + m * self.chi_u * self.f_und1 / self.r0) + self.gamma * m * (m * m - 1.0) / self.r0.powi(3)
    }

    /// The two additive terms of `H_m`, evaluated with the square root `w` of `z`,
    /// together with the envelope `max(|I_(m-1)|, |I_m|, |I_(m+1)|)` at `-R w`.
    fn parts_with_root(&self, w: Complex64) -> Result<(Complex64, Complex64, f64), BesselError> {
        let z = w * w;
        let m = self.m;
        let seq = bessel_i_orders(m + 1, -self.r0 * w)?;
        let i_m = seq[m as usize];
        let lower = if m == 0 { seq[1] } else { seq[m as usize - 1] };
        let upper = seq[m as usize + 1];
        let first = z * (m as f64) * self.k() * i_m;
        let second = w * 0.5 * self.b(z) * (lower + upper);
        let envelope = lower.norm().max(i_m.norm()).max(upper.norm());
        Ok((first, second, envelope))
    }

    pub fn terms_with_root(&self, w: Complex64) -> Result<(Complex64, Complex64), BesselError> {
        let (t1, t2, _) = self.parts_with_root(w)?;
        Ok((t1, t2))
    }

    /// `H_m(z)` on the principal branch of `sqrt(z)`.
    pub fn h(&self, z: Complex64) -> Result<Complex64, BesselError> {
        let (t1, t2) = self.terms_with_root(z.sqrt())?;
        Ok(t1 + t2)
    }

    pub fn h_with_root(&self, w: Complex64) -> Result<Complex64, BesselError> {
        let (t1, t2) = self.terms_with_root(w)?;
        Ok(t1 + t2)
    }

    /// `|H_m(z)|` relative to the size of its additive terms, each Bessel factor
    /// replaced by the envelope `max(|I_(m-1)|, |I_m|, |I_(m+1)|)`. Mode 0 has a
    /// single term, so the envelope is what makes its zeros measurable.
    pub fn normalized_residual(&self, z: Complex64) -> Result<f64, BesselError> {
        let w = z.sqrt();
        let (t1, t2, env) = self.parts_with_root(w)?;
        let h = (t1 + t2).norm();
        if h == 0.0 {
            return Ok(0.0);
        }
        let m = self.m as f64;
        let scale = (z.norm() * m * self.k().abs()).max(w.norm() * self.b(z).norm()) * env;
        Ok(h / scale)
    }

    /// `S_n(z)` for `n = lo..=hi`.
    fn s_values(&self, lo: u32, hi: u32, z: Complex64) -> Result<Vec<Complex64>, BesselError> {
        let q = z * (self.r0 * self.r0 / 4.0);
        if q.norm() <= 1.0 {
            return Ok((lo..=hi).map(|n| s_series(n, q)).collect());
        }
        let x = self.r0 * z.sqrt();
        let seq = bessel_i_orders(hi, x)?;
        let half = x * 0.5;
        Ok((lo..=hi).map(|n| seq[n as usize] / half.powu(n)).collect())
    }

    /// The deflated entire function `G_m` whose zeros are the nonzero zeros of `H_m`.
    pub fn reduced(&self, z: Complex64) -> Result<Complex64, BesselError> {
        let r = self.r0;
        let q = z * (r * r / 4.0);
        if self.m == 0 {
            let s = self.s_values(1, 1, z)?;
            return Ok(s[0] * (r * r / 4.0));
        }
        let m = self.m;
        let s = self.s_values(m - 1, m + 1, z)?;
        let t = s[0] + q * s[2];
        let kterm = -(r / 2.0) * (m as f64) * self.k() * s[1];
        if m == 1 {
            let bslope = 1.0 + self.chi_u * self.f_und1 / r;
            Ok(kterm + t * (bslope / 2.0))
        } else {
            Ok(z * kterm + self.b(z) * t * 0.5)
        }
    }

    /// Coefficient matrix of the modal eigen-system at `lambda`, acting on
    /// `(rho, c~, P)` where `c~ = c (-R w / 2)^m / m!` keeps the basis regular at `lambda = 0`.
    pub fn regularized_matrix(&self, lambda: Complex64) -> Result<Matrix3<Complex64>, BesselError> {
        let m = self.m;
        let mf = m as f64;
        let r = self.r0;
        let q = lambda * (r * r / 4.0);
        let fact = factorial(m);
        let (c_row2, c_row3) = if m == 0 {
            let s = self.s_values(0, 1, lambda)?;
            (s[0] * self.chi_c * self.f_act1, lambda * s[1] * (r / 2.0))
        } else {
            let s = self.s_values(m - 1, m + 1, lambda)?;
            (s[1] * (self.chi_c * self.f_act1 * fact), (s[0] + q * s[2]) * (fact / r))
        };
        Ok(Matrix3::new(
            lambda,
            c(0.0),
            c(mf * r.powi(m as i32 - 1)),
            c(self.gamma * (mf * mf - 1.0) / (r * r)) + lambda * (self.chi_u * self.f_und1),
            c_row2,
            c(-r.powi(m as i32)),
            lambda * (self.a * self.c0),
            c_row3,
            c(0.0),
        ))
    }
}

fn s_series(n: u32, q: Complex64) -> Complex64 {
    let mut term = c(1.0 / factorial(n));
    let mut sum = term;
    for k in 1..80u32 {
        term = term * q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

/// `H_m(z)` with `sqrt(z)` on the principal branch.
pub fn dispersion_h(
    m: u32,
    z: Complex64,
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
) -> Result<Complex64, StabilityError> {
    Ok(Dispersion::new(m, params, f_act, f_und)?.h(z)?)
}

/// Default root-search rectangle `[-80/R0^2, 20/R0^2] x [-10, 10]`.
pub fn default_region(r0: f64) -> Rect {
    let s = 1.0 / (r0 * r0);
    Rect::new(-80.0 * s, 20.0 * s, -10.0, 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub grid: SeedGrid,
    pub roots: RootSearchOptions,
    pub residual_tol: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            grid: SeedGrid::default(),
            roots: RootSearchOptions::default(),
            residual_tol: ROOT_RESIDUAL_TOL,
        }
    }
}

/// Located zeros of `H_m` for one mode and parameter point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSpectrum {
    pub m: u32,
    pub chi_c: f64,
    /// Nonzero roots (a root at the origin appears only when the principal
    /// branch itself passes through zero), sorted by real then imaginary part.
    pub roots: Vec<Complex64>,
    /// Normalised `H_m` residual of each root.
    pub residuals: Vec<f64>,
    /// Root with the largest real part.
    pub principal: Option<Complex64>,
    /// `lambda = 0` carries a genuine eigenfunction (`m` = 0 or 1).
    pub structural_zero: bool,
}

impl ModeSpectrum {
    pub fn margin(&self) -> Option<f64> {
        self.principal.map(|p| p.re)
    }
}

pub fn mode_spectrum(
    m: u32,
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
    region: &Rect,
) -> Result<ModeSpectrum, StabilityError> {
    mode_spectrum_with(m, params, f_act, f_und, region, &SpectrumOptions::default())
}

pub fn mode_spectrum_with(
    m: u32,
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
    region: &Rect,
    opts: &SpectrumOptions,
) -> Result<ModeSpectrum, StabilityError> {
    if !region.is_finite() {
        return Err(StabilityError::InvalidRegion);
    }
    let disp = Dispersion::new(m, params, f_act, f_und)?;
    let g = |z: Complex64| disp.reduced(z).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
    let candidates = find_complex_roots(g, region, opts.grid, &opts.roots);
    let mut roots = Vec::with_capacity(candidates.len());
    let mut residuals = Vec::with_capacity(candidates.len());
    for z in candidates {
        let res = disp.normalized_residual(z)?;
        if res <= opts.residual_tol {
            roots.push(z);
            residuals.push(res);
        }
    }
    let principal = roots.iter().copied().max_by(|a, b| a.re.total_cmp(&b.re).then(b.im.abs().total_cmp(&a.im.abs())));
    Ok(ModeSpectrum {
        m,
        chi_c: params.chi_c,
        roots,
        residuals,
        principal,
        structural_zero: m <= 1,
    })
}

/// One row of a principal-eigenvalue sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub chi_c: f64,
    pub principal: Option<Complex64>,
    /// Root continued from the previous grid point by nearest-neighbour matching.
    pub tracked: Option<Complex64>,
    /// Matching was not clear-cut: a competing root is about as close, or the
    /// jump exceeded five times the previous jump scaled by the grid spacing.
    pub ambiguous: bool,
    pub spectrum: ModeSpectrum,
}

pub fn principal_eigenvalue_sweep(
    m: u32,
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
    chi_grid: &[f64],
    region: &Rect,
    opts: &SpectrumOptions,
) -> Result<Vec<SweepPoint>, StabilityError> {
    if chi_grid.iter().any(|v| !v.is_finite()) || chi_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(StabilityError::UnsortedGrid);
    }
    let spectra: Vec<Result<ModeSpectrum, StabilityError>> = chi_grid
        .par_iter()
        .map(|&chi| {
            let p = params.with_chi_c(chi)?;
            mode_spectrum_with(m, &p, f_act, f_und, region, opts)
        })
        .collect();
    let mut out: Vec<SweepPoint> = Vec::with_capacity(chi_grid.len());
    let mut prev_jump: Option<f64> = None;
    for (i, spec) in spectra.into_iter().enumerate() {
        let spectrum = spec?;
        let chi = chi_grid[i];
        let (tracked, ambiguous) = match out.last().and_then(|p| p.tracked.map(|t| (t, p.chi_c))) {
            None => (spectrum.principal, false),
            Some((prev, prev_chi)) => {
                let mut dists: Vec<(f64, Complex64)> = spectrum.roots.iter().map(|&z| ((z - prev).norm(), z)).collect();
                dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.re.total_cmp(&b.1.re)));
                match dists.first().copied() {
                    None => (None, true),
                    Some((d, z)) => {
                        let close_rival = dists.get(1).is_some_and(|&(d2, _)| d2 <= 1.5 * d || d2 - d <= opts.roots.dedup_tol);
                        let spacing = chi - prev_chi;
                        let too_far = match (prev_jump, out.len() >= 2) {
                            (Some(j), true) => {
                                let prev_spacing = prev_chi - out[out.len() - 2].chi_c;
                                d > 5.0 * (j * spacing / prev_spacing).max(1e-6)
                            }
                            _ => false,
                        };
                        prev_jump = Some(d);
                        (Some(z), close_rival || too_far)
                    }
                }
            }
        };
        out.push(SweepPoint {
            chi_c: chi,
            principal: spectrum.principal,
            tracked,
            ambiguous,
            spectrum,
        });
    }
    Ok(out)
}

fn principal_re(
    m: u32,
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
    region: &Rect,
    chi: f64,
) -> Result<f64, StabilityError> {
    let p = params.with_chi_c(chi)?;
    let spec = mode_spectrum(m, &p, f_act, f_und, region)?;
    spec.principal
        .map(|z| z.re)
        .ok_or(StabilityError::NoRoots { m, chi_c: chi })
}

/// Bisects on the sign of `Re` of the principal mode-`m` root until the
/// bracket is narrower than `tol`; returns the midpoint.
#[allow(clippy::too_many_arguments)]
pub fn locate_crossing(
    m: u32,
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
    lo: f64,
    hi: f64,
    tol: f64,
    region: &Rect,
) -> Result<f64, StabilityError> {
    let (mut lo, mut hi) = (lo, hi);
    let f_lo = principal_re(m, params, f_act, f_und, region, lo)?;
    let f_hi = principal_re(m, params, f_act, f_und, region, hi)?;
    if f_lo.signum() == f_hi.signum() || f_lo == 0.0 || f_hi == 0.0 {
        if f_lo == 0.0 {
            return Ok(lo);
        }
        if f_hi == 0.0 {
            return Ok(hi);
        }
        return Err(StabilityError::NoSignChange { lo, hi });
    }
    let lo_negative = f_lo < 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f = principal_re(m, params, f_act, f_und, region, mid)?;
        if f == 0.0 {
            return Ok(mid);
        }
        if (f < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Modal amplitudes of an eigenfunction: `rho = rho_hat`,
/// `c(r) = c_hat I_m(-r sqrt(lambda))`, `P(r) = p_hat r^m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenMode {
    pub m: u32,
    pub lambda: Complex64,
    pub rho_hat: Complex64,
    pub c_hat: Complex64,
    pub p_hat: Complex64,
    /// Largest relative residual of the three modal relations.
    pub relation_residual: f64,
}

impl EigenMode {
    /// Concentration perturbation `c_hat I_m(-r sqrt(lambda))` at radius `r`.
    pub fn concentration_profile(&self, r: f64) -> Result<Complex64, BesselError> {
        Ok(self.c_hat * bessel_i(self.m, -r * self.lambda.sqrt())?)
    }

    pub fn pressure_profile(&self, r: f64) -> Complex64 {
        self.p_hat * r.powi(self.m as i32)
    }
}

fn relation_residuals(d: &Dispersion, lambda: Complex64, v: [Complex64; 3]) -> Result<f64, BesselError> {
    let m = d.m;
    let r = d.r0;
    let [rho, ch, p] = v;
    let w = lambda.sqrt();
    let seq = bessel_i_orders(m + 1, -r * w)?;
    let i_m = seq[m as usize];
    let lower = if m == 0 { seq[1] } else { seq[m as usize - 1] };
    let upper = seq[m as usize + 1];
    let env = lower.norm().max(i_m.norm()).max(upper.norm());
    let dd = w * 0.5 * (lower + upper);
    let mf = m as f64;
    // (term, size) pairs; Bessel factors are sized by their envelope.
    let alpha = c(d.gamma * (mf * mf - 1.0) / (r * r)) + lambda * d.chi_u * d.f_und1;
    let cf = d.chi_c * d.f_act1;
    let rows: [Vec<(Complex64, f64)>; 3] = [
        vec![
            (lambda * rho, (lambda * rho).norm()),
            (p * (mf * r.powi(m as i32 - 1)), (p * (mf * r.powi(m as i32 - 1))).norm()),
        ],
        vec![
            (alpha * rho, (alpha * rho).norm()),
            (ch * i_m * cf, (ch * cf).norm() * env),
            (-p * r.powi(m as i32), (p * r.powi(m as i32)).norm()),
        ],
        vec![
            (lambda * d.a * d.c0 * rho, (lambda * d.a * d.c0 * rho).norm()),
            (-dd * ch, (w * ch).norm() * env),
        ],
    ];
    let mut worst = 0.0f64;
    for row in rows {
        let sum: Complex64 = row.iter().map(|t| t.0).sum();
        let scale = row.iter().map(|t| t.1).fold(0.0, f64::max);
        if sum.norm() > 0.0 {
            worst = worst.max(sum.norm() / scale);
        }
    }
    Ok(worst)
}

fn normalize_max(v: [Complex64; 3]) -> [Complex64; 3] {
    let mut idx = 0;
    for i in 1..3 {
        if v[i].norm() > v[idx].norm() {
            idx = i;
        }
    }
    let pivot = v[idx];
    let mut out = [v[0] / pivot, v[1] / pivot, v[2] / pivot];
    out[idx] = c(1.0);
    out
}

fn to_original_basis(d: &Dispersion, lambda: Complex64, v: Vector3<Complex64>) -> [Complex64; 3] {
    let m = d.m;
    let ch = if m == 0 || v[1].norm() == 0.0 {
        v[1]
    } else {
        v[1] * factorial(m) / (-d.r0 * lambda.sqrt() * 0.5).powu(m)
    };
    [v[0], ch, v[2]]
}

/// Singular values (descending) and right singular vectors of the regularised matrix.
fn svd_parts(mat: &Matrix3<Complex64>) -> (Vec<f64>, Vec<Vector3<Complex64>>) {
    let svd = mat.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let row = v_t.row(i);
            Vector3::new(row[0].conj(), row[1].conj(), row[2].conj())
        })
        .collect();
    (values, vectors)
}

const RANK_TOL: f64 = 1e-9;

/// Dimension of the kernel of the modal system at `lambda = 0`.
pub fn zero_eigenspace_dimension(
    m: u32,
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
) -> Result<usize, StabilityError> {
    let d = Dispersion::new(m, params, f_act, f_und)?;
    let (values, _) = svd_parts(&d.regularized_matrix(c(0.0))?);
    Ok(values.iter().filter(|&&s| s <= RANK_TOL * values[0]).count())
}

/// Eigenfunction amplitudes at a root `lambda` of `H_m`, normalised so the
/// largest amplitude equals one. At `lambda = 0` the mode-0 kernel is two
/// dimensional and both basis vectors are returned.
pub fn eigenmode(
    m: u32,
    lambda: Complex64,
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
) -> Result<Vec<EigenMode>, StabilityError> {
    let d = Dispersion::new(m, params, f_act, f_und)?;
    if lambda == c(0.0) {
        return match m {
            0 => {
                let gamma_mode = [c(1.0), c(0.0), c(-d.gamma / (d.r0 * d.r0))];
                let c_mode = [c(0.0), c(1.0), c(d.chi_c * d.f_act1)];
                [gamma_mode, c_mode]
                    .into_iter()
                    .map(|v| {
                        let v = normalize_max(v);
                        Ok(EigenMode {
                            m,
                            lambda,
                            rho_hat: v[0],
                            c_hat: v[1],
                            p_hat: v[2],
                            relation_residual: relation_residuals(&d, lambda, v)?,
                        })
                    })
                    .collect()
            }
            _ => {
                let (values, vectors) = svd_parts(&d.regularized_matrix(lambda)?);
                if values[2] > RANK_TOL * values[0] {
                    return Err(StabilityError::NotAnEigenvalue(m));
                }
                let v = normalize_max(to_original_basis(&d, lambda, vectors[2]));
                Ok(vec![EigenMode {
                    m,
                    lambda,
                    rho_hat: v[0],
                    c_hat: v[1],
                    p_hat: v[2],
                    relation_residual: relation_residuals(&d, lambda, v)?,
                }])
            }
        };
    }
    let residual = d.normalized_residual(lambda)?;
    if residual > ROOT_RESIDUAL_TOL {
        return Err(StabilityError::NotARoot { m, lambda, residual });
    }
    let (_, vectors) = svd_parts(&d.regularized_matrix(lambda)?);
    let v = normalize_max(to_original_basis(&d, lambda, vectors[2]));
    Ok(vec![EigenMode {
        m,
        lambda,
        rho_hat: v[0],
        c_hat: v[1],
        p_hat: v[2],
        relation_residual: relation_residuals(&d, lambda, v)?,
    }])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    /// Largest real part over all located nonzero roots.
    pub margin: f64,
    /// Modes with a root of real part above the classification tolerance.
    pub unstable_modes: Vec<u32>,
    /// Modes for which the search region contained no root.
    pub modes_without_roots: Vec<u32>,
    pub spectra: Vec<ModeSpectrum>,
}

/// Stable/unstable verdict from the located spectra of modes `0..=m_max`.
pub fn classify(
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
    m_max: u32,
) -> Result<Classification, StabilityError> {
    let region = default_region(params.r0);
    let spectra: Vec<Result<ModeSpectrum, StabilityError>> = (0..=m_max)
        .into_par_iter()
        .map(|m| mode_spectrum(m, params, f_act, f_und, &region))
        .collect();
    let spectra: Vec<ModeSpectrum> = spectra.into_iter().collect::<Result<_, _>>()?;
    let margin = spectra
        .iter()
        .filter_map(|s| s.margin())
        .fold(f64::NEG_INFINITY, f64::max);
    let unstable_modes: Vec<u32> = spectra
        .iter()
        .filter(|s| s.margin().is_some_and(|r| r > CLASSIFICATION_TOL))
        .map(|s| s.m)
        .collect();
    let modes_without_roots = spectra.iter().filter(|s| s.roots.is_empty()).map(|s| s.m).collect();
    Ok(Classification {
        verdict: if unstable_modes.is_empty() {
            Verdict::Stable
        } else {
            Verdict::Unstable
        },
        margin,
        unstable_modes,
        modes_without_roots,
        spectra,
    })
}

/// Two closed-form predictions for the mode-1 growth rate slope
/// `d lambda_1 / d chi_c` at threshold, and the measured slope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSlope {
    pub chi_c_star: f64,
    pub measured: f64,
    /// From the root `z_1 = -8 (1 + u - K R) / (R^2 (3 (1 + u) - K R))` of the
    /// two-term expansion of `G_1`: `4 a c0 f_act'(c0) / (R^2 (1 + u))`.
    pub from_root_expansion: f64,
    /// From the expansion `lambda_1 = (4/R^2)(a c0 chi_c f_act'(c0) - 1 + u)`: `4 a c0 f_act'(c0) / R^2`.
    pub from_linear_expansion: f64,
    pub relative_error_root: f64,
    pub relative_error_linear: f64,
    /// `"root_expansion"`, `"linear_expansion"` or `"neither"`.
    pub verdict: String,
}

/// Measures the slope of the principal mode-1 root across the threshold by a
/// central difference at relative offset `delta`.
pub fn threshold_slope(
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
    delta: f64,
) -> Result<ThresholdSlope, StabilityError> {
    let star = chi_c_star(params, f_act, f_und)?;
    let region = default_region(params.r0);
    let h = delta * star;
    let up = principal_re(1, params, f_act, f_und, &region, star + h)?;
    let down = principal_re(1, params, f_act, f_und, &region, star - h)?;
    let measured = (up - down) / (2.0 * h);
    let d = Dispersion::new(1, params, f_act, f_und)?;
    let u = d.chi_u * d.f_und1 / d.r0;
    let base = 4.0 * d.a * d.c0 * d.f_act1 / (d.r0 * d.r0);
    let from_root_expansion = base / (1.0 + u);
    let from_linear_expansion = base;
    let relative_error_root = ((measured - from_root_expansion) / from_root_expansion).abs();
    let relative_error_linear = ((measured - from_linear_expansion) / from_linear_expansion).abs();
    let verdict = if relative_error_root < 1e-3 && relative_error_root < relative_error_linear {
        "root_expansion"
    } else if relative_error_linear < 1e-3 && relative_error_linear < relative_error_root {
        "linear_expansion"
    } else {
        "neither"
    };
    Ok(ThresholdSlope {
        chi_c_star: star,
        measured,
        from_root_expansion,
        from_linear_expansion,
        relative_error_root,
        relative_error_linear,
        verdict: verdict.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bessel::{bessel_j, bessel_j_roots};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn laws() -> (ForceLaw, ForceLaw) {
        (ForceLaw::hill(2.0, 1.5, 2.0).unwrap(), ForceLaw::linear(1.0).unwrap())
    }

    fn params(chi_c: f64, chi_u: f64) -> ModelParams {
        ModelParams::new(0.8, 1.3, chi_c, chi_u, 1.0, PI).unwrap()
    }

    fn cz(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn vanishes_at_origin() {
        let (fa, fu) = laws();
        for m in 0..6 {
            assert_eq!(dispersion_h(m, cz(0.0, 0.0), &params(1.0, 0.5), &fa, &fu).unwrap(), cz(0.0, 0.0));
        }
    }

    #[test]
    fn mode_zero_reduces_to_single_bessel_term() {
        let (fa, fu) = laws();
        let p = params(3.0, 0.7);
        for z in [cz(-3.0, 1.0), cz(2.0, -0.5), cz(-40.0, 0.0)] {
            let h = dispersion_h(0, z, &p, &fa, &fu).unwrap();
            let w = z.sqrt();
            let expected = z * w * bessel_i(1, -p.r0 * w).unwrap();
            assert!((h - expected).norm() <= 1e-13 * expected.norm());
        }
    }

    #[test]
    fn mode_one_matches_explicit_form() {
        let (fa, fu) = laws();
        let p = params(2.0, 0.9);
        let c0 = p.c0();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let z = cz(rng.random_range(-50.0..10.0), rng.random_range(-8.0..8.0));
            let w = z.sqrt();
            let x = -p.r0 * w;
            let i0 = bessel_i(0, x).unwrap();
            let i1 = bessel_i(1, x).unwrap();
            let i2 = bessel_i(2, x).unwrap();
            let expected = z * p.a * p.chi_c * c0 * fa.d1(c0) / p.r0 * i1
                + w / 2.0 * z * (1.0 + p.chi_u * fu.d1(0.0) / p.r0) * (i0 + i2);
            let h = dispersion_h(1, z, &p, &fa, &fu).unwrap();
            assert!((h - expected).norm() <= 1e-12 * expected.norm(), "{h} vs {expected}");
        }
    }

    #[test]
    fn reduced_form_is_consistent_with_h() {
        let (fa, fu) = laws();
        let p = params(2.5, 0.4);
        for m in 0..7u32 {
            let d = Dispersion::new(m, &p, &fa, &fu).unwrap();
            for z in [cz(-7.0, 2.0), cz(3.0, 0.5), cz(0.1, -0.05), cz(-60.0, -3.0)] {
                let w = z.sqrt();
                let dpow = match m {
                    0 => 2,
                    1 => 1,
                    _ => 0,
                };
                let expected = d.h(z).unwrap();
                let rebuilt = d.reduced(z).unwrap() * z.powu(dpow) * w.powu(m) * Complex64::from(-p.r0 / 2.0).powi(m as i32 - 1);
                assert!((rebuilt - expected).norm() <= 1e-11 * expected.norm(), "m={m} z={z}: {rebuilt} vs {expected}");
            }
        }
    }

    #[test]
    fn branch_choice_only_flips_sign() {
        let (fa, fu) = laws();
        let p = params(1.7, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in 0..=8u32 {
            let d = Dispersion::new(m, &p, &fa, &fu).unwrap();
            for _ in 0..50 {
                let z = cz(rng.random_range(-60.0..20.0), rng.random_range(-10.0..10.0));
                let w = z.sqrt();
                let hp = d.h_with_root(w).unwrap();
                let hm = d.h_with_root(-w).unwrap();
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                assert!((hm - sign * hp).norm() <= 1e-12 * hp.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn determinant_of_modal_system_is_proportional_to_h() {
        // det A = -R^m H_m in the original basis; the regularisation rescales the c column.
        let (fa, fu) = laws();
        let p = ModelParams::new(0.6, 0.9, 2.0, 0.5, 1.4, 3.0).unwrap();
        for m in 1..5u32 {
            let d = Dispersion::new(m, &p, &fa, &fu).unwrap();
            let z = cz(-2.3, 1.1);
            let det = d.regularized_matrix(z).unwrap().determinant();
            let col_scale = (-p.r0 * z.sqrt() * 0.5).powu(m) / factorial(m);
            let expected = -Complex64::from(p.r0.powi(m as i32)) * d.h(z).unwrap();
            assert!((det * col_scale - expected).norm() <= 1e-11 * expected.norm(), "m={m}");
        }
    }

    #[test]
    fn mode_zero_spectrum_is_bessel_zeros() {
        let (fa, fu) = laws();
        let p = params(1.0, 0.0);
        let spec = mode_spectrum(0, &p, &fa, &fu, &Rect::new(-60.0, 1.0, -1.0, 1.0)).unwrap();
        let zeros = bessel_j_roots(1, 3).unwrap();
        let expected: Vec<f64> = zeros.iter().map(|x| -x * x).filter(|v| *v > -60.0).rev().collect();
        assert_eq!(spec.roots.len(), expected.len(), "{:?}", spec.roots);
        for (r, e) in spec.roots.iter().zip(&expected) {
            assert!((r.re - e).abs() < 1e-9 && r.im == 0.0);
        }
        assert!(spec.structural_zero);
    }

    #[test]
    fn roots_come_in_conjugate_pairs() {
        let (fa, fu) = laws();
        let p = params(0.5, 1.0);
        for m in 0..5 {
            let spec = mode_spectrum(m, &p, &fa, &fu, &default_region(p.r0)).unwrap();
            for r in &spec.roots {
                assert!(spec.roots.iter().any(|s| (s - r.conj()).norm() < 1e-6));
            }
        }
    }

    #[test]
    fn threshold_separates_stable_and_unstable() {
        let (fa, fu) = laws();
        let p = params(0.0, 0.8);
        let star = chi_c_star(&p, &fa, &fu).unwrap();
        let below = classify(&p.with_chi_c(0.5 * star).unwrap(), &fa, &fu, DEFAULT_M_MAX).unwrap();
        assert_eq!(below.verdict, Verdict::Stable);
        let above = classify(&p.with_chi_c(2.0 * star).unwrap(), &fa, &fu, DEFAULT_M_MAX).unwrap();
        assert_eq!(above.verdict, Verdict::Unstable);
        assert!(above.unstable_modes.contains(&1));
        let at = classify(&p.with_chi_c(star).unwrap(), &fa, &fu, DEFAULT_M_MAX).unwrap();
        assert!(at.margin.abs() <= 1e-6);
    }

    #[test]
    fn crossing_matches_closed_form_threshold() {
        let (fa, fu) = laws();
        let p = params(0.0, 1.2);
        let star = chi_c_star(&p, &fa, &fu).unwrap();
        let x = locate_crossing(1, &p, &fa, &fu, 0.5 * star, 1.5 * star, 1e-8, &default_region(p.r0)).unwrap();
        assert!(((x - star) / star).abs() < 1e-6);
    }

    #[test]
    fn zero_eigenspace_dimensions() {
        let (fa, fu) = laws();
        let p = params(0.3, 0.5);
        assert_eq!(zero_eigenspace_dimension(0, &p, &fa, &fu).unwrap(), 2);
        assert_eq!(zero_eigenspace_dimension(1, &p, &fa, &fu).unwrap(), 1);
        for m in 2..=8 {
            assert_eq!(zero_eigenspace_dimension(m, &p, &fa, &fu).unwrap(), 0);
        }
    }

    #[test]
    fn translation_and_mass_modes() {
        let (fa, fu) = laws();
        let p = params(0.3, 0.5);
        let t = eigenmode(1, cz(0.0, 0.0), &p, &fa, &fu).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t[0].rho_hat - 1.0).norm() < 1e-12);
        assert!(t[0].c_hat.norm() < 1e-12 && t[0].p_hat.norm() < 1e-12);
        let k = eigenmode(0, cz(0.0, 0.0), &p, &fa, &fu).unwrap();
        assert_eq!(k.len(), 2);
        for mode in &k {
            assert!(mode.relation_residual < 1e-12);
        }
        assert!(matches!(
            eigenmode(3, cz(0.0, 0.0), &p, &fa, &fu),
            Err(StabilityError::NotAnEigenvalue(3))
        ));
    }

    #[test]
    fn mode_zero_profile_is_j0() {
        let (fa, fu) = laws();
        let p = ModelParams::new(0.8, 1.0, 0.6, 0.2, 1.5, 2.0).unwrap();
        let x = bessel_j_roots(1, 1).unwrap()[0];
        let lambda = cz(-x * x / (p.r0 * p.r0), 0.0);
        let mode = &eigenmode(0, lambda, &p, &fa, &fu).unwrap()[0];
        assert!(mode.relation_residual < 1e-9);
        let scale = mode.concentration_profile(0.0).unwrap();
        for i in 0..=10 {
            let r = p.r0 * i as f64 / 10.0;
            let prof = mode.concentration_profile(r).unwrap() / scale;
            let j0 = bessel_j(0, x * r / p.r0).unwrap();
            assert!((prof - j0).norm() < 1e-9);
        }
    }

    #[test]
    fn eigenmodes_satisfy_relations_at_located_roots() {
        let (fa, fu) = laws();
        let p = params(1.5, 0.6);
        for m in 0..4 {
            let spec = mode_spectrum(m, &p, &fa, &fu, &default_region(p.r0)).unwrap();
            assert!(!spec.roots.is_empty());
            for &z in &spec.roots {
                let mode = &eigenmode(m, z, &p, &fa, &fu).unwrap()[0];
                assert!(mode.relation_residual < 1e-9, "m={m} z={z} res={}", mode.relation_residual);
                let big = [mode.rho_hat, mode.c_hat, mode.p_hat].iter().map(|v| v.norm()).fold(0.0, f64::max);
                assert!((big - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sweep_rejects_unsorted_grid_and_tracks_roots() {
        let (fa, fu) = laws();
        let p = params(0.0, 0.5);
        let region = default_region(p.r0);
        let opts = SpectrumOptions::default();
        assert!(matches!(
            principal_eigenvalue_sweep(1, &p, &fa, &fu, &[1.0, 0.5], &region, &opts),
            Err(StabilityError::UnsortedGrid)
        ));
        assert!(principal_eigenvalue_sweep(1, &p, &fa, &fu, &[], &region, &opts).unwrap().is_empty());
        let star = chi_c_star(&p, &fa, &fu).unwrap();
        let grid: Vec<f64> = (0..9).map(|i| star * (0.8 + 0.05 * i as f64)).collect();
        let sweep = principal_eigenvalue_sweep(1, &p, &fa, &fu, &grid, &region, &opts).unwrap();
        assert!(sweep.iter().all(|s| !s.ambiguous));
        let re: Vec<f64> = sweep.iter().map(|s| s.tracked.unwrap().re).collect();
        assert!(re.windows(2).all(|w| w[1] > w[0]));
        assert!(re[0] < 0.0 && *re.last().unwrap() > 0.0);
    }

    #[test]
    fn threshold_slope_follows_root_expansion() {
        let (fa, fu) = laws();
        let p = params(0.0, 1.5);
        let s = threshold_slope(&p, &fa, &fu, 1e-4).unwrap();
        assert_eq!(s.verdict, "root_expansion", "{s:?}");
    }
}
