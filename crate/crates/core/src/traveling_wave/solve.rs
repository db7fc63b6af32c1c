//! Newton solves at fixed speed and branch continuation from the bifurcation point.

use super::residual::TwProblem;
use super::{Branch, TravelingWaveState, TwError, DEFAULT_ORDER};
use crate::model::{chi_c_star, ForceLaw, ModelParams};
use crate::special::continuation::{arclength_continue_until, ContinuationError, ContinuationOptions};
use crate::special::newton::{jacobian_fd, newton_solve, Jacobian, Matrix, NewtonOptions, Vector};

const JACOBIAN_STEP: f64 = 6e-6;

pub(crate) fn solver_options() -> NewtonOptions {
    NewtonOptions {
        tol: 1e-12,
        max_iter: 40,
        ..NewtonOptions::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchOptions {
    pub order: usize,
    pub newton: NewtonOptions,
    /// Switch to pseudo-arclength above this Jacobian condition number.
    pub condition_limit: f64,
    pub min_step_fraction: f64,
}

impl Default for BranchOptions {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            newton: solver_options(),
            condition_limit: 1e10,
            min_step_fraction: 1.0 / 64.0,
        }
    }
}

fn nan_vector(n: usize) -> Vector {
    Vector::from_element(n, f64::NAN)
}

/// Newton solve at fixed `v` of either sign.
pub(crate) fn solve_signed(
    problem: &TwProblem,
    v: f64,
    x0: Vector,
    opts: &NewtonOptions,
) -> Result<TravelingWaveState, TwError> {
    let n = problem.n_unknowns();
    let f = |x: &Vector| problem.residual_packed(x, v).unwrap_or_else(|_| nan_vector(n));
    let sol = newton_solve(f, Jacobian::CentralDifference, x0, opts).map_err(|source| TwError::Solver { v, source })?;
    let state = problem.unpack(&sol.x, v);
    check_state(problem, &state)?;
    Ok(state)
}

fn check_state(problem: &TwProblem, state: &TravelingWaveState) -> Result<(), TwError> {
    state.shape.validate_on(problem.nodes())?;
    let p = &problem.params;
    for &t in problem.nodes() {
        let z = state.c1 * (-p.a * state.v * state.shape.radius(t) * t.cos()).exp();
        if !(z > 0.0) {
            return Err(TwError::NegativeConcentration(z));
        }
    }
    Ok(())
}

/// Solves `F = 0` for `(rho, p1, chi_c)` at fixed `v > 0` from `guess`.
pub fn solve_at_velocity(
    v: f64,
    guess: &TravelingWaveState,
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
) -> Result<TravelingWaveState, TwError> {
    solve_at_velocity_with(v, guess, params, f_act, f_und, &solver_options())
}

pub fn solve_at_velocity_with(
    v: f64,
    guess: &TravelingWaveState,
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
    opts: &NewtonOptions,
) -> Result<TravelingWaveState, TwError> {
    if v == 0.0 {
        return Err(TwError::RestingVelocity);
    }
    if !(v > 0.0 && v.is_finite()) {
        return Err(TwError::InvalidVelocity(v));
    }
    let problem = TwProblem::new(params, f_act, f_und, guess.shape.order())?;
    solve_signed(&problem, v, problem.pack(guess), opts)
}

/// 2-norm condition number of the Jacobian in `(rho, p1, chi_c)`.
pub(crate) fn condition_number(problem: &TwProblem, state: &TravelingWaveState) -> f64 {
    let n = problem.n_unknowns();
    let v = state.v;
    let f = |x: &Vector| problem.residual_packed(x, v).unwrap_or_else(|_| nan_vector(n));
    let x = problem.pack(state);
    let fx = f(&x);
    let jac: Matrix = jacobian_fd(&f, &x, &fx, JACOBIAN_STEP, true);
    let sv = jac.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Continues the traveling-wave branch from `(chi_c*, disk, V = 0)` up to `v_max`.
pub fn continue_branch(
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
    v_max: f64,
    ds: f64,
) -> Result<Branch, TwError> {
    continue_branch_with(params, f_act, f_und, v_max, ds, &BranchOptions::default())
}

pub fn continue_branch_with(
    params: &ModelParams,
    f_act: &ForceLaw,
    f_und: &ForceLaw,
    v_max: f64,
    ds: f64,
    opts: &BranchOptions,
) -> Result<Branch, TwError> {
    if !(v_max > 0.0 && v_max.is_finite()) {
        return Err(TwError::InvalidVelocity(v_max));
    }
    if !(ds > 0.0 && ds.is_finite()) {
        return Err(TwError::Resolution(format!("step ds must be positive, got {ds}")));
    }
    let chi_star = chi_c_star(params, f_act, f_und)?;
    let problem = TwProblem::new(params, f_act, f_und, opts.order)?;
    let start = TravelingWaveState::resting(params, chi_star, opts.order);
    let mut xs = vec![problem.pack(&start)];
    let mut branch = Branch {
        states: vec![start],
        arclength_from: None,
    };
    let min_step = ds * opts.min_step_fraction;
    let mut h = ds;
    let mut v = 0.0;
    while v < v_max {
        let v_next = (v + h).min(v_max);
        let last = xs.last().expect("non-empty");
        let predicted = if xs.len() >= 2 {
            let prev = &xs[xs.len() - 2];
            let v_prev = branch.states[branch.states.len() - 2].v;
            last + (last - prev) * ((v_next - v) / (v - v_prev))
        } else {
            last.clone()
        };
        match solve_signed(&problem, v_next, predicted, &opts.newton) {
            Ok(state) => {
                let cond = condition_number(&problem, &state);
                xs.push(problem.pack(&state));
                branch.states.push(state);
                v = v_next;
                h = (2.0 * h).min(ds);
                if cond > opts.condition_limit && v < v_max {
                    log::info!("Jacobian condition {cond:e} at V = {v}; switching to pseudo-arclength");
                    return arclength_tail(&problem, branch, v_max, ds, opts);
                }
            }
            Err(err) => {
                h *= 0.5;
                if h < min_step {
                    log::warn!("continuation stalled at V = {v}: {err}");
                    return Err(TwError::Stalled {
                        partial: Box::new(branch),
                        v_reached: v,
                    });
                }
            }
        }
    }
    Ok(branch)
}

fn arclength_tail(
    problem: &TwProblem,
    mut branch: Branch,
    v_max: f64,
    ds: f64,
    opts: &BranchOptions,
) -> Result<Branch, TwError> {
    let n = problem.n_unknowns();
    let extend = |s: &TravelingWaveState| {
        let x = problem.pack(s);
        let mut y = Vector::zeros(n + 1);
        y.rows_mut(0, n).copy_from(&x);
        y[n] = s.v;
        y
    };
    let k = branch.states.len();
    let y1 = extend(&branch.states[k - 1]);
    let y0 = extend(&branch.states[k - 2]);
    let f = |y: &Vector| {
        problem
            .residual_packed(&y.rows(0, n).into_owned(), y[n])
            .unwrap_or_else(|_| nan_vector(n))
    };
    let copts = ContinuationOptions {
        newton: opts.newton,
        min_step_fraction: opts.min_step_fraction,
    };
    let steps = (64.0 * v_max / ds).ceil() as usize + 64;
    let to_state = |y: &Vector| problem.unpack(&y.rows(0, n).into_owned(), y[n]);
    branch.arclength_from = Some(k);
    match arclength_continue_until(f, y1.clone(), &y1 - &y0, steps, ds, &copts, |y| y[n] >= v_max) {
        Ok(points) => {
            branch.states.extend(points.iter().skip(1).map(to_state));
            Ok(branch)
        }
        Err(err) => {
            if let ContinuationError::BadStart(r) = err {
                return Err(TwError::Resolution(format!("arclength start residual {r:e}")));
            }
            branch.states.extend(err.partial().iter().skip(1).map(to_state));
            let v_reached = branch.v_max();
            Err(TwError::Stalled {
                partial: Box::new(branch),
                v_reached,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ModelParams, ForceLaw, ForceLaw) {
        (
            ModelParams::new(1.0, 1.0, 2.0, 0.5, 1.0, 3.0).unwrap(),
            ForceLaw::hill(1.0, 1.0, 2.0).unwrap(),
            ForceLaw::linear(1.0).unwrap(),
        )
    }

    #[test]
    fn rest_is_rejected() {
        let (p, fa, fu) = setup();
        let g = TravelingWaveState::resting(&p, 1.0, 8);
        assert_eq!(solve_at_velocity(0.0, &g, &p, &fa, &fu), Err(TwError::RestingVelocity));
        assert!(matches!(solve_at_velocity(-0.1, &g, &p, &fa, &fu), Err(TwError::InvalidVelocity(_))));
    }

    #[test]
    fn small_speed_from_disk() {
        let (p, fa, fu) = setup();
        let chi = chi_c_star(&p, &fa, &fu).unwrap();
        let g = TravelingWaveState::resting(&p, chi, 16);
        let s = solve_at_velocity(1e-4, &g, &p, &fa, &fu).unwrap();
        assert!((s.chi_c - chi).abs() < 1e-6 * chi);
        assert!(s.shape.area_defect().abs() < 1e-10);
        assert!(s.shape.centering().abs() < 1e-10);
    }

    #[test]
    fn negative_speed_is_the_reflection() {
        let (p, fa, fu) = setup();
        let chi = chi_c_star(&p, &fa, &fu).unwrap();
        let problem = TwProblem::new(&p, &fa, &fu, 16).unwrap();
        let g = problem.pack(&TravelingWaveState::resting(&p, chi, 16));
        let plus = solve_signed(&problem, 0.05, g.clone(), &solver_options()).unwrap();
        let minus = solve_signed(&problem, -0.05, g, &solver_options()).unwrap();
        let refl = plus.reflected();
        assert!((refl.chi_c - minus.chi_c).abs() < 1e-10);
        for (a, b) in refl.shape.rho_cos.iter().zip(&minus.shape.rho_cos) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn short_branch() {
        let (p, fa, fu) = setup();
        let opts = BranchOptions {
            order: 16,
            ..BranchOptions::default()
        };
        let b = continue_branch_with(&p, &fa, &fu, 0.1, 0.025, &opts).unwrap();
        assert_eq!(b.states.len(), 5);
        assert!((b.v_max() - 0.1).abs() < 1e-15);
        assert!(b.states[4].shape.rho_cos[2].abs() > 0.0);
    }
}
