use std::f64::consts::PI;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureKind {
    PeriodicTrapezoid,
    GaussLegendre,
}

/// Nodes and weights for a fixed integration interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: QuadratureKind,
}

impl QuadratureRule {
    /// `n` equispaced nodes `start + 2 pi j / n` with equal weights over one period.
    pub fn periodic_trapezoid(n: usize, start: f64) -> Self {
        let h = 2.0 * PI / n as f64;
        Self {
            nodes: (0..n).map(|j| start + h * j as f64).collect(),
            weights: vec![h; n],
            kind: QuadratureKind::PeriodicTrapezoid,
        }
    }

    /// `n`-point Gauss-Legendre rule mapped to `[a, b]`.
    pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Self {
        let (x, w) = legendre_nodes(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        Self {
            nodes: x.iter().map(|t| mid + half * t).collect(),
            weights: w.iter().map(|v| v * half).collect(),
            kind: QuadratureKind::GaussLegendre,
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }
}

// Newton iteration on P_n from the Chebyshev-like initial guesses.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}
