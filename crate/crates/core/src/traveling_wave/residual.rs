//! Marker normalisation and the collocated functional `F`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use super::shape::{area_defect, collocation_nodes, cosine_table, project_cosine, Shape};
use super::{TravelingWaveState, TwError};
use crate::model::{ForceLaw, LawKind, ModelError, ModelParams};
use crate::special::newton::Vector;

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

/// `int_0^R e^{s r} r dr`.
pub fn radial_moment(s: f64, r: f64) -> f64 {
    let x = s * r;
    if x.abs() < 1.0 {
        // sum_k x^k / (k! (k + 2))
        let mut term = 1.0;
        let mut sum = 0.5;
        for k in 1..40 {
            term *= x / k as f64;
            let add = term / (k + 2) as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        r * r * sum
    } else {
        (x.exp() * (x - 1.0) + 1.0) / (s * s)
    }
}

/// `c1 = M / int int e^{-a V r cos} r dr dtheta` with the trapezoid rule on
/// `max(2N, 64)` angles.
pub fn marker_normalization(shape: &Shape, v: f64, params: &ModelParams) -> f64 {
    let n_c = (2 * shape.order()).max(64);
    marker_normalization_with(shape, v, params, &collocation_nodes(n_c))
}

/// As [`marker_normalization`] on the given equispaced angles.
pub fn marker_normalization_with(shape: &Shape, v: f64, params: &ModelParams, theta: &[f64]) -> f64 {
    let radii: Vec<f64> = theta.iter().map(|&t| shape.radius(t)).collect();
    normalization_from_radii(params, v, theta, &radii)
}

fn normalization_from_radii(params: &ModelParams, v: f64, theta: &[f64], radii: &[f64]) -> f64 {
    let w = 2.0 * PI / theta.len() as f64;
    let total: f64 = theta
        .iter()
        .zip(radii)
        .map(|(&t, &r)| radial_moment(-params.a * v * t.cos(), r))
        .sum();
    params.mass / (w * total)
}

/// Precomputed collocation data for one parameter set and truncation order.
#[derive(Debug, Clone)]
pub struct TwProblem {
    pub params: ModelParams,
    pub f_act: ForceLaw,
    pub f_und: ForceLaw,
    pub order: usize,
    theta: Vec<f64>,
    cos_theta: Vec<f64>,
    cos_table: Vec<f64>,
    sin_table: Vec<f64>,
    f_act_c0: f64,
}

impl TwProblem {
    pub fn new(params: &ModelParams, f_act: &ForceLaw, f_und: &ForceLaw, order: usize) -> Result<Self, TwError> {
        params.validate()?;
        for (law, kind) in [(f_act, LawKind::Active), (f_und, LawKind::Undercooling)] {
            if law.kind() != kind {
                return Err(ModelError::WrongKind {
                    family: law.family().name(),
                    kind,
                }
                .into());
            }
        }
        if order < 2 {
            return Err(TwError::Order(order));
        }
        let theta = collocation_nodes(2 * order);
        let cos_table = cosine_table(order, &theta);
        let mut sin_table = Vec::with_capacity(cos_table.len());
        for k in 0..=order {
            for &t in &theta {
                sin_table.push((k as f64 * t).sin());
            }
        }
        Ok(Self {
            params: *params,
            f_act: *f_act,
            f_und: *f_und,
            order,
            cos_theta: theta.iter().map(|t| t.cos()).collect(),
            theta,
            cos_table,
            sin_table,
            f_act_c0: f_act.eval(params.c0()),
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.theta
    }

    pub fn n_unknowns(&self) -> usize {
        self.order + 3
    }

    /// `(R, R', R'')` at the collocation nodes.
    fn radii(&self, rho: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n_c = self.theta.len();
        let mut r = vec![self.params.r0; n_c];
        let mut d1 = vec![0.0; n_c];
        let mut d2 = vec![0.0; n_c];
        for (k, &a) in rho.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let kf = k as f64;
            let c = &self.cos_table[k * n_c..(k + 1) * n_c];
            let s = &self.sin_table[k * n_c..(k + 1) * n_c];
            for j in 0..n_c {
                r[j] += a * c[j];
                d1[j] -= kf * a * s[j];
                d2[j] -= kf * kf * a * c[j];
            }
        }
        (r, d1, d2)
    }

    pub fn c1(&self, rho: &[f64], v: f64) -> f64 {
        let (r, _, _) = self.radii(rho);
        normalization_from_radii(&self.params, v, &self.theta, &r)
    }

    /// Curvature-equation residual at each collocation node.
    pub fn nodal_residual(&self, rho: &[f64], v: f64, p1: f64, chi_c: f64) -> Result<Vec<f64>, TwError> {
        let (r, d1, d2) = self.radii(rho);
        for (j, &rj) in r.iter().enumerate() {
            if !(rj > 0.0) {
                return Err(TwError::Geometry {
                    theta: self.theta[j],
                    radius: rj,
                });
            }
        }
        let p = &self.params;
        let c1 = normalization_from_radii(p, v, &self.theta, &r);
        let mut out = Vec::with_capacity(r.len());
        for j in 0..r.len() {
            let (rj, dr, ddr) = (r[j], d1[j], d2[j]);
            let q = rj * rj + dr * dr;
            let kappa = (rj * rj + 2.0 * dr * dr - rj * ddr) / q.powf(1.5);
            let (sn, cs) = self.theta[j].sin_cos();
            let n1 = (rj * cs + dr * sn) / q.sqrt();
            let mut z = c1 * (-p.a * v * rj * self.cos_theta[j]).exp();
            if z < 0.0 {
                if !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
                    log::warn!("negative marker concentration {z:e} clamped to 0");
                }
                z = 0.0;
            }
            out.push(
                p.gamma * kappa + chi_c * (self.f_act.eval(z) - self.f_act_c0) + p.chi_u * self.f_und.eval(v * n1)
                    + v * rj * self.cos_theta[j]
                    - p1
                    - p.gamma / p.r0,
            );
        }
        Ok(out)
    }

    /// `F` as a vector of length `N + 3`: projected modes, area, centering.
    pub fn residual(&self, rho: &[f64], v: f64, p1: f64, chi_c: f64) -> Result<Vector, TwError> {
        let nodal = self.nodal_residual(rho, v, p1, chi_c)?;
        let modes = project_cosine(&nodal, self.order, &self.cos_table);
        let mut out = Vector::zeros(self.order + 3);
        for (k, m) in modes.into_iter().enumerate() {
            out[k] = m;
        }
        out[self.order + 1] = area_defect(self.params.r0, rho);
        out[self.order + 2] = PI * rho[1];
        Ok(out)
    }

    /// Residual with unknowns packed as `(rho_0..rho_N, p1, chi_c)`.
    pub fn residual_packed(&self, x: &Vector, v: f64) -> Result<Vector, TwError> {
        let n = self.order;
        self.residual(&x.as_slice()[..=n], v, x[n + 1], x[n + 2])
    }

    pub fn pack(&self, state: &TravelingWaveState) -> Vector {
        let n = self.order;
        let mut x = Vector::zeros(n + 3);
        for (k, &a) in state.shape.rho_cos.iter().take(n + 1).enumerate() {
            x[k] = a;
        }
        x[n + 1] = state.p1;
        x[n + 2] = state.chi_c;
        x
    }

    pub fn unpack(&self, x: &Vector, v: f64) -> TravelingWaveState {
        let n = self.order;
        let rho = x.as_slice()[..=n].to_vec();
        TravelingWaveState {
            c1: self.c1(&rho, v),
            shape: Shape::new(self.params.r0, rho),
            v,
            p1: x[n + 1],
            chi_c: x[n + 2],
        }
    }
}

/// `F(state)` at the truncation order of `state.shape`.
pub fn residual_f(
    state: &TravelingWaveState,
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
) -> Result<Vector, TwError> {
    let problem = TwProblem::new(params, f_act, f_und, state.shape.order())?;
    problem.residual(&state.shape.rho_cos, state.v, state.p1, state.chi_c)
}
