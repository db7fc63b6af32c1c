//! Damped Newton iteration for square nonlinear systems.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

// about eps^(1/3)
const CENTRAL_STEP: f64 = 6e-6;

/// How the solver obtains the Jacobian.
pub enum Jacobian<'a> {
    /// Forward differences with step `fd_step * (1 + |x_i|)`.
    ForwardDifference,
    /// Central differences with a fixed relative step of about `eps^(1/3)`.
    CentralDifference,
    Analytic(&'a dyn Fn(&Vector) -> Matrix),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Converged when `|F(x)|_inf <= tol * (1 + |x|_inf)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Budget of step halvings across the whole solve.
    pub max_halvings: usize,
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 60,
            fd_step: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub x: Vector,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NewtonError {
    #[error("Newton did not converge (best residual {residual:e} after {iterations} iterations)")]
    IterationLimit {
        best: Vector,
        residual: f64,
        iterations: usize,
    },
    #[error("singular Jacobian at iteration {iteration} (residual {residual:e})")]
    SingularJacobian {
        best: Vector,
        residual: f64,
        iteration: usize,
    },
    #[error("residual is not finite at the initial guess")]
    NonFiniteStart,
}

impl NewtonError {
    pub fn best(&self) -> Option<&Vector> {
        match self {
            NewtonError::IterationLimit { best, .. } | NewtonError::SingularJacobian { best, .. } => Some(best),
            NewtonError::NonFiniteStart => None,
        }
    }
}

fn inf_norm(v: &Vector) -> f64 {
    if v.iter().any(|x| x.is_nan()) {
        return f64::NAN;
    }
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Finite-difference Jacobian of `f` at `x`.
pub fn jacobian_fd(f: &impl Fn(&Vector) -> Vector, x: &Vector, fx: &Vector, step: f64, central: bool) -> Matrix {
    let n = x.len();
    let mut jac = Matrix::zeros(fx.len(), n);
    let mut xp = x.clone();
    for i in 0..n {
        let h = step * (1.0 + x[i].abs());
        let orig = xp[i];
        xp[i] = orig + h;
        let fp = f(&xp);
        let col = if central {
            xp[i] = orig - h;
            let fm = f(&xp);
            (fp - fm) / (2.0 * h)
        } else {
            (fp - fx) / h
        };
        xp[i] = orig;
        jac.set_column(i, &col);
    }
    jac
}

/// Solves `F(x) = 0` from `x0` with a halving line search on `|F|_inf`.
pub fn newton_solve(
    f: impl Fn(&Vector) -> Vector,
    jacobian: Jacobian<'_>,
    x0: Vector,
    opts: &NewtonOptions,
) -> Result<NewtonSolution, NewtonError> {
    let mut x = x0;
    let mut fx = f(&x);
    let mut res = inf_norm(&fx);
    if !res.is_finite() {
        return Err(NewtonError::NonFiniteStart);
    }
    let mut halvings = 0usize;
    for iter in 0..=opts.max_iter {
        if res <= opts.tol * (1.0 + inf_norm(&x)) {
            return Ok(NewtonSolution {
                x,
                residual: res,
                iterations: iter,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let jac = match jacobian {
            Jacobian::ForwardDifference => jacobian_fd(&f, &x, &fx, opts.fd_step, false),
            Jacobian::CentralDifference => jacobian_fd(&f, &x, &fx, CENTRAL_STEP, true),
            Jacobian::Analytic(j) => j(&x),
        };
        let Some(step) = jac.lu().solve(&(-&fx)) else {
            return Err(NewtonError::SingularJacobian {
                best: x,
                residual: res,
                iteration: iter,
            });
        };
        if step.iter().any(|v| !v.is_finite()) {
            return Err(NewtonError::SingularJacobian {
                best: x,
                residual: res,
                iteration: iter,
            });
        }
        let mut t = 1.0;
        loop {
            let trial = &x + &step * t;
            let f_trial = f(&trial);
            let r_trial = inf_norm(&f_trial);
            if r_trial.is_finite() && r_trial < res {
                x = trial;
                fx = f_trial;
                res = r_trial;
                break;
            }
            if halvings >= opts.max_halvings {
                return Err(NewtonError::IterationLimit {
                    best: x,
                    residual: res,
                    iterations: iter + 1,
                });
            }
            halvings += 1;
            t *= 0.5;
        }
    }
    Err(NewtonError::IterationLimit {
        best: x,
        residual: res,
        iterations: opts.max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_square_root() {
        let sol = newton_solve(
            |x| Vector::from_vec(vec![x[0] * x[0] - 4.0]),
            Jacobian::ForwardDifference,
            Vector::from_vec(vec![3.0]),
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn linear_system_in_one_step() {
        let a = Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let b = Vector::from_vec(vec![9.0, 8.0]);
        let jac = |_: &Vector| a.clone();
        let sol = newton_solve(
            |x| &a * x - &b,
            Jacobian::Analytic(&jac),
            Vector::zeros(2),
            &NewtonOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.iterations, 1);
        assert!((sol.x[0] - 2.0).abs() < 1e-14 && (sol.x[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn reports_best_iterate_on_failure() {
        // x^2 + 1 has no real root.
        let err = newton_solve(
            |x| Vector::from_vec(vec![x[0] * x[0] + 1.0]),
            Jacobian::CentralDifference,
            Vector::from_vec(vec![0.5]),
            &NewtonOptions::default(),
        )
        .unwrap_err();
        match err {
            NewtonError::IterationLimit { residual, .. } | NewtonError::SingularJacobian { residual, .. } => {
                assert!(residual >= 1.0)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn damping_rescues_overshoot() {
        // atan has a tiny basin for undamped Newton.
        let sol = newton_solve(
            |x| Vector::from_vec(vec![x[0].atan()]),
            Jacobian::ForwardDifference,
            Vector::from_vec(vec![3.0]),
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!(sol.x[0].abs() < 1e-10);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let err = newton_solve(
            |x| Vector::from_vec(vec![x[0].ln()]),
            Jacobian::ForwardDifference,
            Vector::from_vec(vec![-1.0]),
            &NewtonOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, NewtonError::NonFiniteStart);
    }
}
