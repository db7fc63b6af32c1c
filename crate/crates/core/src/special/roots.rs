//! Newton root search for analytic functions over a rectangle of the complex plane.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle `[re_min, re_max] x [im_min, im_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Self { re_min, re_max, im_min, im_max }
    }

    pub fn contains(&self, z: Complex64, margin: f64) -> bool {
        z.re >= self.re_min - margin
            && z.re <= self.re_max + margin
            && z.im >= self.im_min - margin
            && z.im <= self.im_max + margin
    }

    pub fn is_finite(&self) -> bool {
        [self.re_min, self.re_max, self.im_min, self.im_max].iter().all(|v| v.is_finite())
            && self.re_min < self.re_max
            && self.im_min <= self.im_max
    }

    fn expanded(&self, frac: f64) -> Self {
        let dr = frac * (self.re_max - self.re_min);
        let di = frac * (self.im_max - self.im_min).max(1.0);
        Self::new(self.re_min - dr, self.re_max + dr, self.im_min - di, self.im_max + di)
    }
}

/// Cell-centred seed lattice of `n_re x n_im` starting points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedGrid {
    pub n_re: usize,
    pub n_im: usize,
}

impl Default for SeedGrid {
    fn default() -> Self {
        Self { n_re: 40, n_im: 20 }
    }
}

impl SeedGrid {
    pub fn seeds(&self, region: &Rect) -> Vec<Complex64> {
        let dr = (region.re_max - region.re_min) / self.n_re as f64;
        let di = (region.im_max - region.im_min) / self.n_im as f64;
        let mut out = Vec::with_capacity(self.n_re * self.n_im);
        for i in 0..self.n_re {
            for j in 0..self.n_im {
                out.push(Complex64::new(
                    region.re_min + (i as f64 + 0.5) * dr,
                    region.im_min + (j as f64 + 0.5) * di,
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSearchOptions {
    pub max_iter: usize,
    /// Relative Newton step size at which an iterate counts as converged.
    pub step_tol: f64,
    /// Residual bound relative to `1 + max |f|` over the seeds.
    pub residual_tol: f64,
    /// Roots closer than this are merged.
    pub dedup_tol: f64,
    /// Imaginary parts below this (relative) are snapped to zero.
    pub real_snap: f64,
}

impl Default for RootSearchOptions {
    fn default() -> Self {
        Self {
            max_iter: 60,
            step_tol: 1e-13,
            residual_tol: 1e-10,
            dedup_tol: 1e-6,
            real_snap: 1e-12,
        }
    }
}

fn derivative(f: &impl Fn(Complex64) -> Complex64, z: Complex64) -> Complex64 {
    let h = 1e-5 * (1.0 + z.norm());
    let hr = Complex64::new(h, 0.0);
    (f(z + hr) - f(z - hr)) / (2.0 * h)
}

fn is_finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

fn newton_from(
    f: &impl Fn(Complex64) -> Complex64,
    seed: Complex64,
    fence: &Rect,
    opts: &RootSearchOptions,
) -> Option<Complex64> {
    let mut z = seed;
    let mut fz = f(z);
    if !is_finite(fz) {
        return None;
    }
    for _ in 0..opts.max_iter {
        if fz == Complex64::new(0.0, 0.0) {
            return Some(z);
        }
        let d = derivative(f, z);
        if !is_finite(d) || d.norm() == 0.0 {
            return None;
        }
        let step = fz / d;
        let mut t = 1.0;
        let mut next = z - step;
        let mut f_next = f(next);
        for _ in 0..8 {
            if is_finite(f_next) && f_next.norm() < fz.norm() {
                break;
            }
            t *= 0.5;
            next = z - step * t;
            f_next = f(next);
        }
        if !is_finite(f_next) || !fence.contains(next, 0.0) {
            return None;
        }
        let moved = (next - z).norm();
        z = next;
        fz = f_next;
        if moved <= opts.step_tol * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    None
}

/// Distinct roots of `f` inside `region`, located by damped Newton iteration
/// from every seed of `grid`. Sorted by real part, then imaginary part. An empty
/// list means no seed converged.
pub fn find_complex_roots<F>(f: F, region: &Rect, grid: SeedGrid, opts: &RootSearchOptions) -> Vec<Complex64>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let seeds = grid.seeds(region);
    let scale = seeds
        .par_iter()
        .map(|&s| f(s).norm())
        .filter(|v| v.is_finite())
        .reduce(|| 0.0, f64::max);
    let fence = region.expanded(0.5);
    let candidates: Vec<Option<Complex64>> = seeds
        .par_iter()
        .map(|&s| newton_from(&f, s, &fence, opts))
        .collect();
    let bound = opts.residual_tol * (1.0 + scale);
    let mut roots: Vec<Complex64> = candidates
        .into_iter()
        .flatten()
        .map(|mut z| {
            if z.im.abs() <= opts.real_snap * (1.0 + z.norm()) {
                z.im = 0.0;
            }
            z
        })
        .filter(|&z| region.contains(z, opts.dedup_tol) && f(z).norm() <= bound)
        .collect();
    sort_roots(&mut roots);
    let mut distinct: Vec<Complex64> = Vec::new();
    for z in roots {
        if distinct.iter().all(|d| (d - z).norm() > opts.dedup_tol) {
            distinct.push(z);
        }
    }
    distinct
}

/// Deterministic order: real part, then imaginary part.
pub fn sort_roots(roots: &mut [Complex64]) {
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}
