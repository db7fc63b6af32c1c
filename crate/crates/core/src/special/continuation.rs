//! Pseudo-arclength predictor-corrector continuation for `F: R^{n+1} -> R^n`.

use thiserror::Error;

use super::newton::{jacobian_fd, newton_solve, Jacobian, Matrix, NewtonOptions, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    pub newton: NewtonOptions,
    /// Smallest admissible step as a fraction of the nominal `ds`.
    pub min_step_fraction: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            newton: NewtonOptions::default(),
            min_step_fraction: 1.0 / 64.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContinuationError {
    #[error("start point residual {0:e} exceeds tolerance")]
    BadStart(f64),
    #[error("continuation stalled at step {step}: step size fell below {min_step:e}")]
    Stalled {
        partial: Vec<Vector>,
        step: usize,
        min_step: f64,
    },
    #[error("tangent computation failed at step {step}")]
    Tangent { partial: Vec<Vector>, step: usize },
}

impl ContinuationError {
    pub fn partial(&self) -> &[Vector] {
        match self {
            ContinuationError::Stalled { partial, .. } | ContinuationError::Tangent { partial, .. } => partial,
            ContinuationError::BadStart(_) => &[],
        }
    }
}

/// Unit tangent `t` solving `J t = 0`, `previous . t = 1`, then normalised.
pub fn branch_tangent(jac: &Matrix, previous: &Vector) -> Option<Vector> {
    let n = jac.nrows();
    let mut aug = Matrix::zeros(n + 1, jac.ncols());
    aug.view_mut((0, 0), (n, jac.ncols())).copy_from(jac);
    aug.set_row(n, &previous.transpose());
    let mut rhs = Vector::zeros(n + 1);
    rhs[n] = 1.0;
    let t = aug.lu().solve(&rhs)?;
    let norm = t.norm();
    if !norm.is_finite() || norm == 0.0 {
        return None;
    }
    Some(t / norm)
}

fn inf_norm(v: &Vector) -> f64 {
    if v.iter().any(|x| x.is_nan()) {
        return f64::NAN;
    }
    v.amax()
}

/// Traces up to `steps` points of the solution curve of `f` starting at `start`
/// in the direction `tangent0`. The returned list begins with `start`.
pub fn arclength_continue(
    f: impl Fn(&Vector) -> Vector,
    start: Vector,
    tangent0: Vector,
    steps: usize,
    ds: f64,
    opts: &ContinuationOptions,
) -> Result<Vec<Vector>, ContinuationError> {
    arclength_continue_until(f, start, tangent0, steps, ds, opts, |_| false)
}

/// As [`arclength_continue`], stopping early after the first accepted point
/// for which `stop` returns true.
pub fn arclength_continue_until(
    f: impl Fn(&Vector) -> Vector,
    start: Vector,
    tangent0: Vector,
    steps: usize,
    ds: f64,
    opts: &ContinuationOptions,
    stop: impl Fn(&Vector) -> bool,
) -> Result<Vec<Vector>, ContinuationError> {
    let r0 = inf_norm(&f(&start));
    if !(r0 <= opts.newton.tol * (1.0 + inf_norm(&start))) {
        return Err(ContinuationError::BadStart(r0));
    }
    let min_step = ds * opts.min_step_fraction;
    let mut points = vec![start];
    let mut tangent = tangent0.normalize();
    let mut h = ds;
    for step in 1..=steps {
        let prev = points.last().expect("non-empty").clone();
        let accepted = loop {
            let predicted = &prev + &tangent * h;
            let t_fixed = tangent.clone();
            let base = prev.clone();
            let h_now = h;
            let g = |y: &Vector| {
                let fy = f(y);
                let mut out = Vector::zeros(fy.len() + 1);
                out.rows_mut(0, fy.len()).copy_from(&fy);
                out[fy.len()] = t_fixed.dot(&(y - &base)) - h_now;
                out
            };
            match newton_solve(g, Jacobian::ForwardDifference, predicted, &opts.newton) {
                Ok(sol) => break sol.x,
                Err(_) => {
                    h *= 0.5;
                    if h < min_step {
                        return Err(ContinuationError::Stalled {
                            partial: points,
                            step,
                            min_step,
                        });
                    }
                }
            }
        };
        let fy = f(&accepted);
        let jac = jacobian_fd(&f, &accepted, &fy, opts.newton.fd_step, false);
        tangent = match branch_tangent(&jac, &tangent) {
            Some(t) if t.iter().all(|v| v.is_finite()) => t,
            _ => {
                let secant = &accepted - &prev;
                let norm = secant.norm();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(ContinuationError::Tangent { partial: points, step });
                }
                secant / norm
            }
        };
        let done = stop(&accepted);
        points.push(accepted);
        h = (2.0 * h).min(ds);
        if done {
            break;
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_vec(x.to_vec())
    }

    #[test]
    fn traces_unit_circle() {
        let f = |y: &Vector| v(&[y[0] * y[0] + y[1] * y[1] - 1.0]);
        let pts = arclength_continue(f, v(&[1.0, 0.0]), v(&[0.0, 1.0]), 80, 0.1, &Default::default()).unwrap();
        assert_eq!(pts.len(), 81);
        for p in &pts {
            assert!((p.norm() - 1.0).abs() < 1e-8);
        }
        // Each step advances the projection onto the unit tangent by 0.1.
        let mut winding = 0.0;
        for w in pts.windows(2) {
            let a0 = w[0][1].atan2(w[0][0]);
            let a1 = w[1][1].atan2(w[1][0]);
            let mut d = a1 - a0;
            if d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            assert!(d > 0.0);
            winding += d;
        }
        assert!((winding - 80.0 * 0.1f64.asin()).abs() < 1e-6);
    }

    #[test]
    fn passes_through_fold() {
        // x^2 - mu = 0 with unknowns (x, mu); the fold sits at mu = 0.
        let f = |y: &Vector| v(&[y[0] * y[0] - y[1]]);
        let start = v(&[-1.0, 1.0]);
        let tangent = v(&[1.0, -2.0]);
        let pts = arclength_continue(f, start, tangent, 40, 0.1, &Default::default()).unwrap();
        let last = pts.last().unwrap();
        assert!(last[0] > 0.5, "did not cross the fold: {last}");
        assert!(pts.iter().any(|p| p[1] < 0.01));
        for p in &pts {
            assert!((p[0] * p[0] - p[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_start() {
        let f = |y: &Vector| v(&[y[0] * y[0] + y[1] * y[1] - 1.0]);
        let err = arclength_continue(f, v(&[2.0, 0.0]), v(&[0.0, 1.0]), 3, 0.1, &Default::default()).unwrap_err();
        assert!(matches!(err, ContinuationError::BadStart(_)));
    }

    #[test]
    fn stall_returns_partial_branch() {
        // The curve ends at the boundary of the domain where f becomes NaN.
        let f = |y: &Vector| {
            if y[0] > 1.05 {
                v(&[f64::NAN])
            } else {
                v(&[y[1] - y[0]])
            }
        };
        let err = arclength_continue(f, v(&[0.0, 0.0]), v(&[1.0, 1.0]), 50, 0.1, &Default::default()).unwrap_err();
        match err {
            ContinuationError::Stalled { partial, .. } => {
                assert!(partial.len() > 5);
                assert!(partial.iter().all(|p| p[0] <= 1.05));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
