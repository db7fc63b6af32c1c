//! Star-shaped boundaries `r = R0 + rho(theta)` with `rho` an even cosine series.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::TwError;

/// `rho(theta) = sum_{k=0}^{N} rho_cos[k] cos(k theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub rho_cos: Vec<f64>,
    pub r0: f64,
}

/// Boundary quantities sampled at a set of angles.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySamples {
    pub theta: Vec<f64>,
    pub radius: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl BoundarySamples {
    /// Outward unit normal at sample `j`.
    pub fn normal(&self, j: usize) -> (f64, f64) {
        let (r, dr, t) = (self.radius[j], self.d1[j], self.theta[j]);
        let norm = (r * r + dr * dr).sqrt();
        let (s, c) = t.sin_cos();
        ((r * c + dr * s) / norm, (r * s - dr * c) / norm)
    }

    pub fn mean_curvature(&self, j: usize) -> f64 {
        let (r, dr, ddr) = (self.radius[j], self.d1[j], self.d2[j]);
        (r * r + 2.0 * dr * dr - r * ddr) / (r * r + dr * dr).powf(1.5)
    }

    /// Arclength density `|d x / d theta|`.
    pub fn speed(&self, j: usize) -> f64 {
        (self.radius[j].powi(2) + self.d1[j].powi(2)).sqrt()
    }
}

/// `n_c` equispaced angles `2 pi j / n_c` on `[0, 2 pi)`.
pub fn collocation_nodes(n_c: usize) -> Vec<f64> {
    (0..n_c).map(|j| 2.0 * PI * j as f64 / n_c as f64).collect()
}

impl Shape {
    pub fn disk(r0: f64, order: usize) -> Self {
        Self {
            rho_cos: vec![0.0; order + 1],
            r0,
        }
    }

    pub fn new(r0: f64, rho_cos: Vec<f64>) -> Self {
        Self { rho_cos, r0 }
    }

    /// Truncation order `N`.
    pub fn order(&self) -> usize {
        self.rho_cos.len().saturating_sub(1)
    }

    /// `(rho, rho', rho'')` at `theta`.
    pub fn rho_jet(&self, theta: f64) -> (f64, f64, f64) {
        let mut out = (0.0, 0.0, 0.0);
        for (k, &a) in self.rho_cos.iter().enumerate() {
            let kf = k as f64;
            let (s, c) = (kf * theta).sin_cos();
            out.0 += a * c;
            out.1 -= kf * a * s;
            out.2 -= kf * kf * a * c;
        }
        out
    }

    pub fn radius(&self, theta: f64) -> f64 {
        self.r0 + self.rho_jet(theta).0
    }

    fn checked(&self, theta: f64) -> Result<BoundarySamples, TwError> {
        let s = self.sample(&[theta]);
        if !(s.radius[0] > 0.0) {
            return Err(TwError::Geometry { theta, radius: s.radius[0] });
        }
        Ok(s)
    }

    /// Outward unit normal `(n_1, n_2)`.
    pub fn normal(&self, theta: f64) -> Result<(f64, f64), TwError> {
        Ok(self.checked(theta)?.normal(0))
    }

    pub fn normal_x(&self, theta: f64) -> Result<f64, TwError> {
        Ok(self.normal(theta)?.0)
    }

    pub fn mean_curvature(&self, theta: f64) -> Result<f64, TwError> {
        Ok(self.checked(theta)?.mean_curvature(0))
    }

    pub fn sample(&self, theta: &[f64]) -> BoundarySamples {
        let mut radius = Vec::with_capacity(theta.len());
        let mut d1 = Vec::with_capacity(theta.len());
        let mut d2 = Vec::with_capacity(theta.len());
        for &t in theta {
            let (r, dr, ddr) = self.rho_jet(t);
            radius.push(self.r0 + r);
            d1.push(dr);
            d2.push(ddr);
        }
        BoundarySamples {
            theta: theta.to_vec(),
            radius,
            d1,
            d2,
        }
    }

    /// Smallest radius over the given angles must be positive.
    pub fn validate_on(&self, theta: &[f64]) -> Result<(), TwError> {
        for &t in theta {
            let r = self.radius(t);
            if !(r > 0.0) {
                return Err(TwError::Geometry { theta: t, radius: r });
            }
        }
        Ok(())
    }

    /// `int (R0 + rho)^2 - R0^2 dtheta`, exact for the truncated series.
    pub fn area_defect(&self) -> f64 {
        area_defect(self.r0, &self.rho_cos)
    }

    /// `int rho cos(theta) dtheta`.
    pub fn centering(&self) -> f64 {
        PI * self.rho_cos.get(1).copied().unwrap_or(0.0)
    }

    /// Enclosed area `1/2 int (R0 + rho)^2 dtheta`.
    pub fn area(&self) -> f64 {
        PI * self.r0 * self.r0 + 0.5 * self.area_defect()
    }
}

pub(crate) fn area_defect(r0: f64, rho: &[f64]) -> f64 {
    let mut sq = 0.0;
    for (k, &a) in rho.iter().enumerate() {
        sq += if k == 0 { 2.0 * a * a } else { a * a };
    }
    4.0 * PI * r0 * rho.first().copied().unwrap_or(0.0) + PI * sq
}

/// Cosine coefficients `0..=n` of even nodal data on `2n` equispaced nodes.
pub fn project_cosine(values: &[f64], n: usize, cos_table: &[f64]) -> Vec<f64> {
    let n_c = values.len();
    let mut out = vec![0.0; n + 1];
    for (k, slot) in out.iter_mut().enumerate() {
        let row = &cos_table[k * n_c..(k + 1) * n_c];
        let s: f64 = values.iter().zip(row).map(|(v, c)| v * c).sum();
        *slot = if k == 0 || k == n { s / n_c as f64 } else { 2.0 * s / n_c as f64 };
    }
    out
}

/// Row-major table `cos(k theta_j)` for `k = 0..=n`.
pub fn cosine_table(n: usize, theta: &[f64]) -> Vec<f64> {
    let mut t = Vec::with_capacity((n + 1) * theta.len());
    for k in 0..=n {
        for &th in theta {
            t.push((k as f64 * th).cos());
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::quadrature::QuadratureRule;

    #[test]
    fn disk_geometry() {
        let s = Shape::disk(1.5, 8);
        for &t in &[0.0, 0.3, 1.0, PI / 2.0, 2.5] {
            assert!((s.normal_x(t).unwrap() - t.cos()).abs() < 1e-15);
            assert!((s.mean_curvature(t).unwrap() - 1.0 / 1.5).abs() < 1e-15);
        }
        assert!(s.normal_x(PI / 2.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn symmetry_axis_normal() {
        let mut s = Shape::disk(1.0, 4);
        s.rho_cos[2] = 0.1;
        assert!((s.normal_x(0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn linearised_curvature() {
        let eps = 1e-6;
        let mut s = Shape::disk(1.3, 4);
        s.rho_cos[2] = eps;
        for &t in &[0.0f64, 0.4, 1.1, 2.0] {
            let lin = 1.0 / 1.3 + eps * 3.0 * (2.0 * t).cos() / (1.3 * 1.3);
            assert!((s.mean_curvature(t).unwrap() - lin).abs() < 1e-11);
        }
    }

    #[test]
    fn gauss_bonnet() {
        let mut s = Shape::disk(1.0, 64);
        s.rho_cos[2] = 0.2;
        s.rho_cos[3] = -0.05;
        s.rho_cos[4] = 0.02;
        let rule = QuadratureRule::periodic_trapezoid(64, 0.0);
        let b = s.sample(&rule.nodes);
        let total: f64 = (0..64).map(|j| b.mean_curvature(j) * b.speed(j) * rule.weights[j]).sum();
        assert!((total - 2.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn area_matches_quadrature() {
        let s = Shape::new(1.0, vec![0.01, 0.02, -0.1, 0.03]);
        let rule = QuadratureRule::periodic_trapezoid(64, 0.0);
        let q = rule.integrate(|t| s.radius(t).powi(2) - 1.0);
        assert!((q - s.area_defect()).abs() < 1e-14);
        assert!((s.centering() - rule.integrate(|t| (s.radius(t) - 1.0) * t.cos())).abs() < 1e-14);
    }

    #[test]
    fn projection_recovers_coefficients() {
        let n = 8;
        let theta = collocation_nodes(2 * n);
        let table = cosine_table(n, &theta);
        let coef: Vec<f64> = (0..=n).map(|k| 1.0 / (1.0 + k as f64)).collect();
        let s = Shape::new(0.0, coef.clone());
        let values: Vec<f64> = theta.iter().map(|&t| s.rho_jet(t).0).collect();
        let back = project_cosine(&values, n, &table);
        for (a, b) in coef.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_radius_is_an_error() {
        let s = Shape::new(1.0, vec![-1.5]);
        assert!(matches!(s.mean_curvature(0.0), Err(TwError::Geometry { .. })));
    }
}
